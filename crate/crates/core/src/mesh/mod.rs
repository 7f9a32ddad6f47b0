//! Manifold dual marching cubes with x-quads.
//!
//! One dual vertex is placed per arc of every cell face (see [`ConfigTable`]),
//! and one polygon, the x-quad, is emitted per active edge from the dual
//! vertices of its 4 incident cells.

mod audit;
mod build;
mod cluster;
mod config;
mod holes;
mod triangulate;

use nalgebra::Vector3;
use smallvec::SmallVec;
use thiserror::Error;

pub use audit::{
    boundary_loops, edge_audit, euler_characteristic, signed_volume, EdgeAudit,
};
pub use build::{build_mesh, build_mesh_with, count_vertices};
pub use cluster::cluster_vertices;
pub use config::{
    ambiguous_facets, build_config_table, edge_facets, facet_cycle, local_edge, CaseFace,
    ConfigCase, ConfigTable, Segment, EDGES, NO_VERTEX,
};
pub use holes::{fill_holes, HoleReport};
pub use triangulate::{compute_normals, triangulate_xquads};

pub type Vec3 = Vector3<f64>;

/// Vector area times two (Newell normal) of a closed polygon.
pub fn polygon_normal(pos: &[Vec3], poly: &[u32]) -> Vec3 {
    triangulate::newell(pos, poly)
}

/// Sentinel in [`XQuadMesh::tri_quad`] for triangles closing 3-vertex faces.
pub const NO_QUAD: u32 = u32::MAX;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("contour offsets are not quantized")]
    NotQuantized,
    #[error("active edge {0} has no entry in the cell list")]
    MissingCell(u64),
    #[error("cell {0} lies outside the volume")]
    OutOfBounds(u64),
    #[error("invalid tolerance: {0}")]
    Tolerance(String),
}

/// An x-quad: the polygon around one active edge.
///
/// `groups[k]` holds the dual vertices contributed by the k-th incident cell
/// as `[entry, exit]`; both entries are equal when the cell contributes a single
/// vertex. Groups are stored in winding order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct XQuad {
    pub groups: [[u32; 2]; 4],
    /// Key of the active edge (`3 * point + axis`).
    pub edge: u64,
}

impl XQuad {
    /// Boundary vertices in winding order (4 to 8).
    pub fn polygon(&self) -> SmallVec<[u32; 8]> {
        let mut out = SmallVec::new();
        for g in &self.groups {
            out.push(g[0]);
            if g[1] != g[0] {
                out.push(g[1]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
pub struct XQuadMesh {
    /// Dual vertex positions in grid coordinates.
    pub positions: Vec<Vec3>,
    /// Owning cell (linear index of its lowest corner) per vertex.
    pub vertex_cell: Vec<u64>,
    /// Vertex slot within the cell's case.
    pub vertex_slot: Vec<u8>,
    pub quads: Vec<XQuad>,
    /// Triangles closing 3-vertex cell faces.
    pub internal_tris: Vec<[u32; 3]>,
    pub triangles: Vec<[u32; 3]>,
    /// Source x-quad per triangle, [`NO_QUAD`] for cell-internal triangles.
    pub tri_quad: Vec<u32>,
    /// Unit normal per x-quad (zero when degenerate).
    pub quad_normals: Vec<Vec3>,
    pub quad_areas: Vec<f64>,
    pub vertex_normals: Vec<Vec3>,
    /// Vertex to incident x-quads, CSR.
    pub vertex_quad_offsets: Vec<u32>,
    pub vertex_quads: Vec<u32>,
}

impl XQuadMesh {
    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// x-quads incident to vertex `v`.
    #[inline]
    pub fn quads_of(&self, v: usize) -> &[u32] {
        let a = self.vertex_quad_offsets[v] as usize;
        let b = self.vertex_quad_offsets[v + 1] as usize;
        &self.vertex_quads[a..b]
    }

    /// Mean of an x-quad's boundary vertices.
    pub fn quad_centroid(&self, q: usize) -> Vec3 {
        let poly = self.quads[q].polygon();
        let sum: Vec3 = poly.iter().map(|&v| self.positions[v as usize]).sum();
        sum / poly.len() as f64
    }

    /// Rebuilds vertex to x-quad incidence.
    pub fn build_adjacency(&mut self) {
        let n = self.positions.len();
        let mut counts = vec![0u32; n + 1];
        for q in &self.quads {
            for &v in q.polygon().iter() {
                counts[v as usize + 1] += 1;
            }
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut list = vec![0u32; counts[n] as usize];
        for (qi, q) in self.quads.iter().enumerate() {
            for &v in q.polygon().iter() {
                list[fill[v as usize] as usize] = qi as u32;
                fill[v as usize] += 1;
            }
        }
        self.vertex_quad_offsets = counts;
        self.vertex_quads = list;
    }

    pub fn to_trimesh(&self) -> TriMesh {
        TriMesh {
            positions: self.positions.clone(),
            normals: self.vertex_normals.clone(),
            triangles: self.triangles.clone(),
            synthetic: vec![false; self.triangles.len()],
        }
    }
}

/// Plain indexed triangle mesh used for clustering, hole filling and export.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    pub positions: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    /// Triangles added by hole filling.
    pub synthetic: Vec<bool>,
}

impl TriMesh {
    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    /// Area-weighted vertex normals from the triangles.
    pub fn recompute_normals(&mut self) {
        self.normals = triangulate::vertex_normals_from(&self.positions, &self.triangles);
    }

    pub fn surface_area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| triangulate::tri_cross(&self.positions, t).norm() * 0.5)
            .sum()
    }
}
