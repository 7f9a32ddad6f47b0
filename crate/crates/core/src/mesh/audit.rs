//! Topology checks on indexed triangle lists.

use super::Vec3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeAudit {
    /// Distinct undirected edges.
    pub edges: usize,
    /// Edges with a single incident triangle.
    pub boundary: usize,
    /// Edges with more than two incident triangles.
    pub non_manifold: usize,
    /// Edges with two triangles traversing them in the same direction.
    pub inconsistent: usize,
    /// Triangles repeating a vertex.
    pub degenerate: usize,
}

impl EdgeAudit {
    pub fn is_closed_manifold(&self) -> bool {
        self.boundary == 0 && self.is_manifold()
    }

    /// Every edge has one or two incident triangles, consistently wound.
    pub fn is_manifold(&self) -> bool {
        self.non_manifold == 0 && self.inconsistent == 0 && self.degenerate == 0
    }
}

fn directed_edges(tris: &[[u32; 3]]) -> Vec<(u32, u32, bool)> {
    // (low, high, forward) so both directions of an edge sort together
    let mut e = Vec::with_capacity(tris.len() * 3);
    for t in tris {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            e.push((a.min(b), a.max(b), a < b));
        }
    }
    e.sort_unstable();
    e
}

pub fn edge_audit(tris: &[[u32; 3]]) -> EdgeAudit {
    let mut out = EdgeAudit {
        degenerate: tris
            .iter()
            .filter(|t| t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
            .count(),
        ..Default::default()
    };
    let e = directed_edges(tris);
    let mut i = 0;
    while i < e.len() {
        let mut j = i;
        while j < e.len() && (e[j].0, e[j].1) == (e[i].0, e[i].1) {
            j += 1;
        }
        out.edges += 1;
        match j - i {
            1 => out.boundary += 1,
            2 => {
                if e[i].2 == e[i + 1].2 {
                    out.inconsistent += 1;
                }
            }
            _ => out.non_manifold += 1,
        }
        i = j;
    }
    out
}

/// `V - E + F` over the vertices referenced by `tris`.
pub fn euler_characteristic(vertex_count: usize, tris: &[[u32; 3]]) -> i64 {
    let mut used = vec![false; vertex_count];
    for t in tris {
        for &v in t {
            used[v as usize] = true;
        }
    }
    let v = used.iter().filter(|&&u| u).count() as i64;
    let e = edge_audit(tris).edges as i64;
    v - e + tris.len() as i64
}

/// Signed enclosed volume; positive when triangles wind counter-clockwise seen
/// from outside.
pub fn signed_volume(pos: &[Vec3], tris: &[[u32; 3]]) -> f64 {
    tris.iter()
        .map(|t| {
            let (a, b, c) = (pos[t[0] as usize], pos[t[1] as usize], pos[t[2] as usize]);
            a.dot(&b.cross(&c))
        })
        .sum::<f64>()
        / 6.0
}

/// Closed loops of boundary edges, each running against the winding of its
/// adjacent triangles, so triangles filling a loop wind along it. Also returns
/// the vertices with more than one outgoing boundary edge; loops through them
/// are not simple and are left out.
pub fn boundary_loops(tris: &[[u32; 3]]) -> (Vec<Vec<u32>>, Vec<u32>) {
    let e = directed_edges(tris);
    // boundary half-edges, as traversed by their only triangle
    let mut half: Vec<(u32, u32)> = Vec::new();
    let mut i = 0;
    while i < e.len() {
        let mut j = i;
        while j < e.len() && (e[j].0, e[j].1) == (e[i].0, e[i].1) {
            j += 1;
        }
        if j - i == 1 {
            let (lo, hi, fwd) = e[i];
            // the loop runs opposite to the triangle's edge
            half.push(if fwd { (hi, lo) } else { (lo, hi) });
        }
        i = j;
    }
    half.sort_unstable();
    let mut bad = Vec::new();
    for w in half.windows(2) {
        if w[0].0 == w[1].0 {
            bad.push(w[0].0);
        }
    }
    bad.dedup();
    let mut used = vec![false; half.len()];
    let mut loops = Vec::new();
    for s in 0..half.len() {
        if used[s] || bad.binary_search(&half[s].0).is_ok() {
            continue;
        }
        let mut lp = vec![half[s].0];
        used[s] = true;
        let mut cur = half[s].1;
        let mut ok = true;
        while cur != lp[0] {
            if bad.binary_search(&cur).is_ok() {
                ok = false;
                break;
            }
            let k = half.partition_point(|h| h.0 < cur);
            if k >= half.len() || half[k].0 != cur || used[k] {
                ok = false;
                break;
            }
            used[k] = true;
            lp.push(cur);
            cur = half[k].1;
        }
        if ok {
            loops.push(lp);
        }
    }
    (loops, bad)
}
