use rayon::prelude::*;

use super::median::geometric_median;
use crate::mesh::{Vec3, XQuadMesh};

/// Maximum vertex displacement per update iteration, in grid units.
pub const MAX_STEP: f64 = 0.5;

/// For every x-quad, the x-quads sharing at least one vertex with it
/// (itself included), sorted. CSR offsets and list.
pub fn face_neighbors(mesh: &XQuadMesh) -> (Vec<u32>, Vec<u32>) {
    let lists: Vec<Vec<u32>> = mesh
        .quads
        .par_iter()
        .map(|q| {
            let mut l: Vec<u32> = q
                .polygon()
                .iter()
                .flat_map(|&v| mesh.quads_of(v as usize).iter().copied())
                .collect();
            l.sort_unstable();
            l.dedup();
            l
        })
        .collect();
    let mut offsets = Vec::with_capacity(lists.len() + 1);
    offsets.push(0u32);
    let mut flat = Vec::with_capacity(lists.iter().map(Vec::len).sum());
    for l in lists {
        flat.extend(l);
        offsets.push(flat.len() as u32);
    }
    (offsets, flat)
}

/// Replaces every x-quad normal by the area-weighted vector median of the
/// normals of its neighbouring x-quads, `iterations` times.
pub fn smooth_face_normals(mesh: &mut XQuadMesh, iterations: usize) {
    if iterations == 0 || mesh.quads.is_empty() {
        return;
    }
    let (off, nb) = face_neighbors(mesh);
    let areas = &mesh.quad_areas;
    let mut cur = mesh.quad_normals.clone();
    let mut next = vec![Vec3::zeros(); cur.len()];
    for _ in 0..iterations {
        next.par_iter_mut().enumerate().for_each(|(f, out)| {
            let ids = &nb[off[f] as usize..off[f + 1] as usize];
            let pts: Vec<Vec3> = ids.iter().map(|&g| cur[g as usize]).collect();
            let w: Vec<f64> = ids
                .iter()
                .map(|&g| if cur[g as usize] == Vec3::zeros() { 0.0 } else { areas[g as usize] })
                .collect();
            let m = geometric_median(&pts, &w);
            let n = m.norm();
            *out = if n > 0.0 { m / n } else { cur[f] };
        });
        std::mem::swap(&mut cur, &mut next);
    }
    mesh.quad_normals = cur;
}

fn polygon_area(mesh: &XQuadMesh, q: usize) -> f64 {
    let poly = mesh.quads[q].polygon();
    crate::mesh::polygon_normal(&mesh.positions, &poly).norm() * 0.5
}

/// Moves vertices towards the planes of their incident x-quads, which are
/// fixed by the (smoothed) face normals and pass through the face
/// centroids. Each step is capped at [`MAX_STEP`]. Vertex normals are then
/// recomputed as area-weighted means of the face normals.
pub fn update_vertex_positions(mesh: &mut XQuadMesh, iterations: usize) {
    let nv = mesh.vertex_count();
    for _ in 0..iterations {
        let centroids: Vec<Vec3> = (0..mesh.quads.len())
            .into_par_iter()
            .map(|q| mesh.quad_centroid(q))
            .collect();
        let moved: Vec<Vec3> = (0..nv)
            .into_par_iter()
            .map(|v| {
                let p = mesh.positions[v];
                let quads = mesh.quads_of(v);
                if quads.is_empty() {
                    return p;
                }
                let mut d = Vec3::zeros();
                for &q in quads {
                    let n = mesh.quad_normals[q as usize];
                    d += n * n.dot(&(centroids[q as usize] - p));
                }
                d /= quads.len() as f64;
                let len = d.norm();
                if len > MAX_STEP {
                    d *= MAX_STEP / len;
                }
                p + d
            })
            .collect();
        mesh.positions = moved;
    }
    mesh.quad_areas = (0..mesh.quads.len())
        .into_par_iter()
        .map(|q| polygon_area(mesh, q))
        .collect();
    mesh.vertex_normals = (0..nv)
        .into_par_iter()
        .map(|v| {
            let s: Vec3 = mesh
                .quads_of(v)
                .iter()
                .map(|&q| mesh.quad_normals[q as usize] * mesh.quad_areas[q as usize])
                .sum();
            let n = s.norm();
            if n > 0.0 {
                s / n
            } else {
                Vec3::zeros()
            }
        })
        .collect();
}
