//! x-quad triangulation and normals.

use std::collections::HashMap;

use rayon::prelude::*;
use smallvec::SmallVec;

use super::{Vec3, XQuad, XQuadMesh, NO_QUAD};

/// Triangles below this area (grid units squared) get no normal weight.
const AREA_EPS: f64 = 1e-12;

#[inline]
pub(crate) fn tri_cross(pos: &[Vec3], t: &[u32; 3]) -> Vec3 {
    let a = pos[t[0] as usize];
    (pos[t[1] as usize] - a).cross(&(pos[t[2] as usize] - a))
}

/// Newell normal (twice the vector area) of a closed polygon.
pub(crate) fn newell(pos: &[Vec3], poly: &[u32]) -> Vec3 {
    let mut n = Vec3::zeros();
    for i in 0..poly.len() {
        let a = pos[poly[i] as usize];
        let b = pos[poly[(i + 1) % poly.len()] as usize];
        n += a.cross(&b);
    }
    n
}

fn normalize_or_zero(v: Vec3) -> Vec3 {
    let n = v.norm();
    if n > 0.0 {
        v / n
    } else {
        Vec3::zeros()
    }
}

/// Area-weighted unit vertex normals; vertices without area get zero.
pub(crate) fn vertex_normals_from(pos: &[Vec3], tris: &[[u32; 3]]) -> Vec<Vec3> {
    let mut acc = vec![Vec3::zeros(); pos.len()];
    for t in tris {
        let c = tri_cross(pos, t);
        if c.norm() * 0.5 < AREA_EPS {
            continue;
        }
        for &v in t {
            acc[v as usize] += c;
        }
    }
    acc.into_iter().map(normalize_or_zero).collect()
}

/// Fans a polygon from its vertex `start` after dropping repeated vertices.
fn fan(poly: &[u32], start: usize, out: &mut SmallVec<[[u32; 3]; 6]>) {
    let mut p: SmallVec<[u32; 4]> = SmallVec::new();
    for &v in poly {
        if p.last() != Some(&v) {
            p.push(v);
        }
    }
    while p.len() > 1 && p.first() == p.last() {
        p.pop();
    }
    if p.len() < 3 {
        return;
    }
    let r = start % p.len();
    p.rotate_left(r);
    for i in 1..p.len() - 1 {
        out.push([p[0], p[i], p[i + 1]]);
    }
}

/// Triangles of an x-quad split along the diagonal joining groups `k` and
/// `k + 2`. Bit `i` of `fans` moves the fan apex of piece `i` by one vertex.
fn split(q: &XQuad, k: usize, fans: u8) -> SmallVec<[[u32; 3]; 6]> {
    let g = |i: usize| q.groups[(k + i) % 4];
    let (a, b, c, d) = (g(0), g(1), g(2), g(3));
    let f = |i: u8| ((fans >> i) & 1) as usize;
    let mut out = SmallVec::new();
    fan(&[a[1], b[0], b[1], c[0]], f(0), &mut out);
    fan(&[c[1], d[0], d[1], a[0]], f(1), &mut out);
    fan(&[a[0], a[1], c[0], c[1]], f(2), &mut out);
    out
}

fn edge_key(a: u32, b: u32) -> (u32, u32) {
    (a.min(b), a.max(b))
}

/// Re-triangulates x-quads whose diagonals coincide with an edge used by
/// other triangles. Candidates are tried in order: the chosen diagonal with
/// other fans, then the other diagonal.
fn repair_shared_diagonals(
    quads: &[XQuad],
    choice: &[usize],
    per_quad: &mut [SmallVec<[[u32; 3]; 6]>],
    fixed: &[[u32; 3]],
) {
    let tri_edges = |t: &[u32; 3]| [0, 1, 2].map(|k| edge_key(t[k], t[(k + 1) % 3]));
    // edges that are not sides of their x-quad polygon
    let diagonals = |qi: usize| -> SmallVec<[(u32, u32); 8]> {
        let poly = quads[qi].polygon();
        let n = poly.len();
        let sides: SmallVec<[(u32, u32); 8]> =
            (0..n).map(|i| edge_key(poly[i], poly[(i + 1) % n])).collect();
        let mut out: SmallVec<[(u32, u32); 8]> = SmallVec::new();
        for t in &per_quad[qi] {
            for e in tri_edges(t) {
                if !sides.contains(&e) && !out.contains(&e) {
                    out.push(e);
                }
            }
        }
        out
    };
    let mut diag: Vec<((u32, u32), u32)> = (0..quads.len())
        .into_par_iter()
        .flat_map_iter(|qi| diagonals(qi).into_iter().map(move |e| (e, qi as u32)))
        .collect();
    diag.par_sort_unstable();
    let is_diag = |e: &(u32, u32)| {
        let i = diag.partition_point(|d| d.0 < *e);
        i < diag.len() && diag[i].0 == *e
    };
    let mut suspects: Vec<u32> = Vec::new();
    for w in diag.windows(2) {
        if w[0].0 == w[1].0 {
            suspects.extend([w[0].1, w[1].1]);
        }
    }
    // a diagonal may also coincide with a polygon side or a fixed triangle edge
    for (qi, q) in quads.iter().enumerate() {
        let poly = q.polygon();
        let n = poly.len();
        for i in 0..n {
            let e = edge_key(poly[i], poly[(i + 1) % n]);
            if is_diag(&e) {
                let j = diag.partition_point(|d| d.0 < e);
                suspects.extend(diag[j..].iter().take_while(|d| d.0 == e).map(|d| d.1));
                suspects.push(qi as u32);
            }
        }
    }
    for t in fixed {
        for e in tri_edges(t) {
            let j = diag.partition_point(|d| d.0 < e);
            suspects.extend(diag[j..].iter().take_while(|d| d.0 == e).map(|d| d.1));
        }
    }
    if suspects.is_empty() {
        return;
    }
    suspects.sort_unstable();
    suspects.dedup();
    log::debug!("re-triangulating {} x-quads with shared diagonals", suspects.len());

    // edge counts restricted to vertices of suspect quads
    let mut verts: Vec<u32> = suspects
        .iter()
        .flat_map(|&qi| quads[qi as usize].polygon())
        .collect();
    verts.sort_unstable();
    verts.dedup();
    let inside = |e: &(u32, u32)| verts.binary_search(&e.0).is_ok() && verts.binary_search(&e.1).is_ok();
    let mut count: HashMap<(u32, u32), i32> = HashMap::new();
    let add = |count: &mut HashMap<(u32, u32), i32>, ts: &[[u32; 3]], d: i32| {
        for t in ts {
            for e in tri_edges(t) {
                if inside(&e) {
                    *count.entry(e).or_insert(0) += d;
                }
            }
        }
    };
    for ts in per_quad.iter() {
        add(&mut count, ts, 1);
    }
    add(&mut count, fixed, 1);
    let load = |count: &HashMap<(u32, u32), i32>, e: &(u32, u32)| count.get(e).copied().unwrap_or(0);
    for _round in 0..8 {
        let mut changed = false;
        for &qi in &suspects {
            let qi = qi as usize;
            if !per_quad[qi].iter().any(|t| tri_edges(t).iter().any(|e| load(&count, e) > 2)) {
                continue;
            }
            let current = std::mem::take(&mut per_quad[qi]);
            add(&mut count, &current, -1);
            let mut next = current.clone();
            'search: for k in [choice[qi], 1 - choice[qi]] {
                for fans in 0..8u8 {
                    let cand = split(&quads[qi], k, fans);
                    if cand.iter().all(|t| tri_edges(t).iter().all(|e| load(&count, e) < 2)) {
                        next = cand;
                        break 'search;
                    }
                }
            }
            changed |= next != current;
            add(&mut count, &next, 1);
            per_quad[qi] = next;
        }
        if !changed {
            break;
        }
    }
}

/// Diagonal for one x-quad: 0 joins groups 0 and 2, 1 joins groups 1 and 3.
fn choose_diagonal(pos: &[Vec3], vn: &[Vec3], q: &XQuad) -> usize {
    let centroid = |g: [u32; 2]| (pos[g[0] as usize] + pos[g[1] as usize]) * 0.5;
    let gnormal = |g: [u32; 2]| normalize_or_zero(vn[g[0] as usize] + vn[g[1] as usize]);
    let gc: [Vec3; 4] = std::array::from_fn(|k| centroid(q.groups[k]));
    let n = newell(pos, &q.polygon());
    let side = |a: usize, c: usize, b: usize| n.dot(&(gc[c] - gc[a]).cross(&(gc[b] - gc[a])));
    let valid02 = side(0, 2, 1) * side(0, 2, 3) < 0.0;
    let valid13 = side(1, 3, 2) * side(1, 3, 0) < 0.0;
    match (valid02, valid13) {
        (true, false) => return 0,
        (false, true) => return 1,
        _ => {}
    }
    let d02 = gnormal(q.groups[0]).dot(&gnormal(q.groups[2]));
    let d13 = gnormal(q.groups[1]).dot(&gnormal(q.groups[3]));
    if (d02 - d13).abs() > 1e-12 {
        return if d02 > d13 { 0 } else { 1 };
    }
    let l02 = (gc[2] - gc[0]).norm_squared();
    let l13 = (gc[3] - gc[1]).norm_squared();
    if l13 < l02 {
        1
    } else {
        0
    }
}

/// Splits every x-quad into `m - 2` triangles (m = 4..8 boundary vertices)
/// and appends the cell-internal triangles. Normals are recomputed.
pub fn triangulate_xquads(mesh: &mut XQuadMesh) {
    let pos = &mesh.positions;
    // provisional vertex normals from x-quad vector areas
    let newells: Vec<Vec3> = mesh
        .quads
        .par_iter()
        .map(|q| newell(pos, &q.polygon()))
        .collect();
    let vn: Vec<Vec3> = (0..pos.len())
        .into_par_iter()
        .map(|v| {
            let s: Vec3 = mesh.quads_of(v).iter().map(|&q| newells[q as usize]).sum();
            normalize_or_zero(s)
        })
        .collect();
    let choice: Vec<usize> = mesh
        .quads
        .par_iter()
        .map(|q| choose_diagonal(pos, &vn, q))
        .collect();
    let mut per_quad: Vec<SmallVec<[[u32; 3]; 6]>> = mesh
        .quads
        .par_iter()
        .zip(&choice)
        .map(|(q, &k)| split(q, k, 0))
        .collect();
    repair_shared_diagonals(&mesh.quads, &choice, &mut per_quad, &mesh.internal_tris);
    let mut tris = Vec::with_capacity(per_quad.iter().map(|t| t.len()).sum::<usize>());
    let mut tri_quad = Vec::with_capacity(tris.capacity());
    for (qi, ts) in per_quad.iter().enumerate() {
        for t in ts {
            tris.push(*t);
            tri_quad.push(qi as u32);
        }
    }
    for t in &mesh.internal_tris {
        tris.push(*t);
        tri_quad.push(NO_QUAD);
    }
    mesh.triangles = tris;
    mesh.tri_quad = tri_quad;
    compute_normals(mesh);
}

/// Per x-quad unit normals and areas from the triangles, and area-weighted
/// vertex normals.
pub fn compute_normals(mesh: &mut XQuadMesh) {
    let nq = mesh.quads.len();
    let mut qn = vec![Vec3::zeros(); nq];
    let mut qa = vec![0.0; nq];
    for (t, &q) in mesh.triangles.iter().zip(&mesh.tri_quad) {
        if q == NO_QUAD {
            continue;
        }
        let c = tri_cross(&mesh.positions, t);
        qn[q as usize] += c;
        qa[q as usize] += c.norm() * 0.5;
    }
    mesh.quad_normals = qn.into_iter().map(normalize_or_zero).collect();
    mesh.quad_areas = qa;
    mesh.vertex_normals = vertex_normals_from(&mesh.positions, &mesh.triangles);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_mesh(pos: Vec<Vec3>, groups: [[u32; 2]; 4]) -> XQuadMesh {
        let mut m = XQuadMesh {
            positions: pos,
            quads: vec![XQuad { groups, edge: 0 }],
            ..Default::default()
        };
        m.build_adjacency();
        m
    }

    #[test]
    fn planar_square_gives_coplanar_pair() {
        let pos = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let mut m = quad_mesh(pos, [[0, 0], [1, 1], [2, 2], [3, 3]]);
        triangulate_xquads(&mut m);
        assert_eq!(m.triangles.len(), 2);
        for t in &m.triangles {
            let n = tri_cross(&m.positions, t).normalize();
            assert!((n - Vec3::z()).norm() < 1e-12);
        }
        assert!((m.quad_areas[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn octagon_gives_six_triangles() {
        let pos: Vec<Vec3> = (0..8)
            .map(|i| {
                let t = i as f64 * std::f64::consts::TAU / 8.0;
                Vec3::new(t.cos(), t.sin(), 0.0)
            })
            .collect();
        let mut m = quad_mesh(pos, [[0, 1], [2, 3], [4, 5], [6, 7]]);
        triangulate_xquads(&mut m);
        assert_eq!(m.triangles.len(), 6);
        let area: f64 = m.triangles.iter().map(|t| tri_cross(&m.positions, t).norm() / 2.0).sum();
        assert!((area - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        for t in &m.triangles {
            assert!(tri_cross(&m.positions, t).z > 0.0);
        }
    }

    #[test]
    fn concave_quad_takes_valid_diagonal() {
        // dart with reflex vertex 2: only the 0-2 diagonal stays inside
        let pos = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(0.5, 0.5, 0.0),
            Vec3::new(0.0, 2.0, 0.0),
        ];
        let m = quad_mesh(pos, [[0, 0], [1, 1], [2, 2], [3, 3]]);
        let vn = vec![Vec3::z(); 4];
        assert_eq!(choose_diagonal(&m.positions, &vn, &m.quads[0]), 0);
    }

    #[test]
    fn crease_follows_flatter_pair() {
        // folded square: groups 0 and 2 share a normal, 1 and 3 tilt apart
        let pos = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.3),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.3),
        ];
        let m = quad_mesh(pos, [[0, 0], [1, 1], [2, 2], [3, 3]]);
        let vn = vec![
            Vec3::z(),
            Vec3::new(0.3, 0.0, 1.0).normalize(),
            Vec3::z(),
            Vec3::new(0.0, 0.3, 1.0).normalize(),
        ];
        assert_eq!(choose_diagonal(&m.positions, &vn, &m.quads[0]), 0);
    }

    #[test]
    fn degenerate_triangles_carry_no_weight() {
        let pos = vec![Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0];
        let n = vertex_normals_from(&pos, &[[0, 1, 2]]);
        assert!(n.iter().all(|v| v.norm() == 0.0));
    }
}
