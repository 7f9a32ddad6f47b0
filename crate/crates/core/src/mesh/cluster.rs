//! Adaptive vertex clustering over octree cells.
//!
//! Cells of size 2, 4, 8, ... are visited from fine to coarse. All vertices in
//! a cell are merged when their original normals pairwise deviate by less than
//! the angle tolerance and the original vertices lie within the position
//! tolerance of their least-squares plane. Merging is done by edge collapses
//! that keep the mesh manifold and never flip a triangle.

use std::collections::BTreeMap;

use nalgebra::Matrix3;
use smallvec::SmallVec;

use super::triangulate::tri_cross;
use super::{MeshError, TriMesh, Vec3};

struct Collapser {
    pos: Vec<Vec3>,
    tris: Vec<[u32; 3]>,
    alive: Vec<bool>,
    vtris: Vec<SmallVec<[u32; 8]>>,
}

impl Collapser {
    fn new(mesh: &TriMesh) -> Self {
        let mut vtris = vec![SmallVec::new(); mesh.positions.len()];
        for (i, t) in mesh.triangles.iter().enumerate() {
            for &v in t {
                vtris[v as usize].push(i as u32);
            }
        }
        Self {
            pos: mesh.positions.clone(),
            tris: mesh.triangles.clone(),
            alive: vec![true; mesh.triangles.len()],
            vtris,
        }
    }

    fn neighbors(&self, v: u32) -> SmallVec<[u32; 16]> {
        let mut out: SmallVec<[u32; 16]> = SmallVec::new();
        for &t in &self.vtris[v as usize] {
            for &w in &self.tris[t as usize] {
                if w != v && !out.contains(&w) {
                    out.push(w);
                }
            }
        }
        out
    }

    fn shared(&self, u: u32, v: u32) -> SmallVec<[u32; 2]> {
        self.vtris[u as usize]
            .iter()
            .copied()
            .filter(|&t| self.tris[t as usize].contains(&v))
            .collect()
    }

    fn is_boundary_edge(&self, u: u32, v: u32) -> bool {
        self.shared(u, v).len() == 1
    }

    fn is_boundary_vertex(&self, v: u32) -> bool {
        self.neighbors(v).iter().any(|&w| self.is_boundary_edge(v, w))
    }

    /// Merges `v` into `u`, placing `u` at `target`, if that keeps the mesh
    /// manifold and no surviving triangle flips or collapses.
    fn try_collapse(&mut self, u: u32, v: u32, target: Vec3) -> bool {
        let shared = self.shared(u, v);
        if shared.is_empty() || shared.len() > 2 {
            return false;
        }
        // link condition
        let opposite: SmallVec<[u32; 2]> = shared
            .iter()
            .map(|&t| {
                *self.tris[t as usize]
                    .iter()
                    .find(|&&w| w != u && w != v)
                    .unwrap()
            })
            .collect();
        let nu = self.neighbors(u);
        let nv = self.neighbors(v);
        let common = nu.iter().filter(|w| nv.contains(w)).count();
        if common != opposite.len() {
            return false;
        }
        if shared.len() == 2 && self.is_boundary_vertex(u) && self.is_boundary_vertex(v) {
            return false;
        }
        // orientation check on the surviving triangles around u and v
        let mut changed: SmallVec<[(u32, [u32; 3]); 16]> = SmallVec::new();
        for &w in &[u, v] {
            for &t in &self.vtris[w as usize] {
                if shared.contains(&t) {
                    continue;
                }
                let old = self.tris[t as usize];
                let new = old.map(|x| if x == v { u } else { x });
                changed.push((t, new));
            }
        }
        if changed.is_empty() {
            return false;
        }
        // two surviving triangles must not become the same triangle
        let mut sets: SmallVec<[[u32; 3]; 16]> = changed
            .iter()
            .map(|(_, t)| {
                let mut t = *t;
                t.sort_unstable();
                t
            })
            .collect();
        sets.sort_unstable();
        if sets.windows(2).any(|w| w[0] == w[1]) {
            return false;
        }
        for &(t, new) in &changed {
            let before = tri_cross(&self.pos, &self.tris[t as usize]);
            let mut p = [Vec3::zeros(); 3];
            for k in 0..3 {
                p[k] = if new[k] == u { target } else { self.pos[new[k] as usize] };
            }
            let after = (p[1] - p[0]).cross(&(p[2] - p[0]));
            if after.norm() <= 1e-12 || after.dot(&before) <= 0.0 {
                return false;
            }
        }
        for &t in &shared {
            self.alive[t as usize] = false;
            for &w in &self.tris[t as usize] {
                self.vtris[w as usize].retain(|x| *x != t);
            }
        }
        for &(t, new) in &changed {
            self.tris[t as usize] = new;
        }
        let moved = std::mem::take(&mut self.vtris[v as usize]);
        for t in moved {
            if !self.vtris[u as usize].contains(&t) {
                self.vtris[u as usize].push(t);
            }
        }
        self.pos[u as usize] = target;
        true
    }
}

/// Least-squares plane through `pts`: centroid and maximum distance.
fn plane_fit(pts: &[Vec3]) -> (Vec3, f64) {
    let c: Vec3 = pts.iter().sum::<Vec3>() / pts.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p - c;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let (k, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |b, (i, &v)| if v < b.1 { (i, v) } else { b });
    let n: Vec3 = eig.eigenvectors.column(k).into();
    let dmax = pts.iter().map(|p| (p - c).dot(&n).abs()).fold(0.0, f64::max);
    (c, dmax)
}

fn normals_within(ns: &[Vec3], cos_tol: f64) -> bool {
    for i in 0..ns.len() {
        for j in i + 1..ns.len() {
            if ns[i].dot(&ns[j]) <= cos_tol {
                return false;
            }
        }
    }
    true
}

/// Clusters vertices; returns the new mesh and the old to new vertex map.
///
/// `angle_tol` is in degrees; 0 leaves the mesh unchanged.
pub fn cluster_vertices(
    mesh: &TriMesh,
    angle_tol: f64,
    pos_tol: f64,
) -> Result<(TriMesh, Vec<u32>), MeshError> {
    if !(angle_tol >= 0.0) || !angle_tol.is_finite() {
        return Err(MeshError::Tolerance(format!("angle {angle_tol}")));
    }
    if !(pos_tol > 0.0) || !pos_tol.is_finite() {
        return Err(MeshError::Tolerance(format!("position {pos_tol}")));
    }
    let n = mesh.positions.len();
    let identity: Vec<u32> = (0..n as u32).collect();
    if angle_tol == 0.0 || n == 0 {
        return Ok((mesh.clone(), identity));
    }
    let cos_tol = angle_tol.to_radians().cos();
    let normals = if mesh.normals.len() == n {
        mesh.normals.clone()
    } else {
        super::triangulate::vertex_normals_from(&mesh.positions, &mesh.triangles)
    };
    let mut c = Collapser::new(mesh);
    // representative of each vertex, and originals per representative
    let mut rep: Vec<u32> = identity.clone();
    let mut members: Vec<Vec<u32>> = (0..n as u32).map(|v| vec![v]).collect();
    let (lo, hi) = mesh.positions.iter().fold(
        (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY)),
        |(lo, hi), p| (lo.inf(p), hi.sup(p)),
    );
    let extent = (hi - lo).max().max(1.0);
    let mut size = 2.0;
    while size <= 2.0 * extent.ceil() {
        let mut cells: BTreeMap<[i64; 3], Vec<u32>> = BTreeMap::new();
        for v in 0..n as u32 {
            if rep[v as usize] != v {
                continue;
            }
            let p = mesh.positions[v as usize];
            let key = [0, 1, 2].map(|a| (p[a] / size).floor() as i64);
            cells.entry(key).or_default().push(v);
        }
        for group in cells.values().filter(|g| g.len() > 1) {
            let originals: Vec<u32> = group.iter().flat_map(|&v| members[v as usize].clone()).collect();
            let ns: Vec<Vec3> = originals.iter().map(|&v| normals[v as usize]).collect();
            if !normals_within(&ns, cos_tol) {
                continue;
            }
            let pts: Vec<Vec3> = originals.iter().map(|&v| mesh.positions[v as usize]).collect();
            let (_, dmax) = plane_fit(&pts);
            if dmax >= pos_tol {
                continue;
            }
            // collapse group members into the lowest id reachable by edges
            let r = group[0];
            let mut pending: Vec<u32> = group[1..].to_vec();
            loop {
                let mut progress = false;
                let mut rest = Vec::new();
                for &w in &pending {
                    let mut merged: Vec<Vec3> = members[r as usize]
                        .iter()
                        .chain(&members[w as usize])
                        .map(|&o| mesh.positions[o as usize])
                        .collect();
                    let target = merged.drain(..).sum::<Vec3>()
                        / (members[r as usize].len() + members[w as usize].len()) as f64;
                    if c.try_collapse(r, w, target) {
                        let m = std::mem::take(&mut members[w as usize]);
                        members[r as usize].extend(m);
                        rep[w as usize] = r;
                        progress = true;
                    } else {
                        rest.push(w);
                    }
                }
                pending = rest;
                if !progress || pending.is_empty() {
                    break;
                }
            }
        }
        size *= 2.0;
    }
    // compact
    let mut map = vec![u32::MAX; n];
    let mut positions = Vec::new();
    for v in 0..n {
        if rep[v] == v as u32 {
            map[v] = positions.len() as u32;
            positions.push(c.pos[v]);
        }
    }
    for v in 0..n {
        let mut r = v;
        while rep[r] != r as u32 {
            r = rep[r] as usize;
        }
        map[v] = map[r];
    }
    let mut triangles = Vec::new();
    let mut synthetic = Vec::new();
    for (i, t) in c.tris.iter().enumerate() {
        if c.alive[i] {
            triangles.push(t.map(|v| map[v as usize]));
            synthetic.push(mesh.synthetic.get(i).copied().unwrap_or(false));
        }
    }
    let mut out = TriMesh {
        positions,
        normals: Vec::new(),
        triangles,
        synthetic,
    };
    out.recompute_normals();
    Ok((out, map))
}
