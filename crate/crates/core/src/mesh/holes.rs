//! Minimum-area hole filling.

use super::audit::boundary_loops;
use super::triangulate::tri_cross;
use super::{TriMesh, Vec3};

#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct HoleReport {
    pub filled: usize,
    /// Loops longer than the limit.
    pub too_long: usize,
    /// Boundary vertices where loops touch; such loops are skipped.
    pub non_simple: usize,
    pub triangles_added: usize,
}

/// Minimum total area triangulation of a closed polygon, as triangles winding
/// along the polygon.
fn min_area_triangulation(pos: &[Vec3], lp: &[u32]) -> Vec<[u32; 3]> {
    let n = lp.len();
    let area = |i: usize, k: usize, j: usize| tri_cross(pos, &[lp[i], lp[k], lp[j]]).norm() * 0.5;
    let mut w = vec![0.0f64; n * n];
    let mut arg = vec![0usize; n * n];
    for len in 2..n {
        for i in 0..n - len {
            let j = i + len;
            let mut best = f64::INFINITY;
            let mut bk = i + 1;
            for k in i + 1..j {
                let c = w[i * n + k] + w[k * n + j] + area(i, k, j);
                if c < best {
                    best = c;
                    bk = k;
                }
            }
            w[i * n + j] = best;
            arg[i * n + j] = bk;
        }
    }
    let mut out = Vec::with_capacity(n - 2);
    let mut stack = vec![(0usize, n - 1)];
    while let Some((i, j)) = stack.pop() {
        if j < i + 2 {
            continue;
        }
        let k = arg[i * n + j];
        out.push([lp[i], lp[k], lp[j]]);
        stack.push((i, k));
        stack.push((k, j));
    }
    out
}

/// Closes boundary loops of at most `max_loop_len` edges. Added triangles are
/// flagged synthetic and vertex normals are recomputed.
pub fn fill_holes(mesh: &mut TriMesh, max_loop_len: usize) -> HoleReport {
    let (loops, bad) = boundary_loops(&mesh.triangles);
    let mut report = HoleReport {
        non_simple: bad.len(),
        ..Default::default()
    };
    for lp in loops {
        if lp.len() > max_loop_len {
            report.too_long += 1;
            continue;
        }
        let tris = min_area_triangulation(&mesh.positions, &lp);
        report.triangles_added += tris.len();
        report.filled += 1;
        mesh.synthetic.extend(std::iter::repeat(true).take(tris.len()));
        mesh.triangles.extend(tris);
    }
    if report.filled > 0 {
        mesh.recompute_normals();
    }
    report
}
