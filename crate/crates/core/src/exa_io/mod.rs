//! EXA delta and feature sections, interchange exports and the viewer bundle.

mod delta;
mod emphasis;
mod export;
mod feat;
pub mod simple8b;

use thiserror::Error;

pub use delta::{
    decode_vertex_deltas, encode_vertex_deltas, DeltaSection, VertexGeometry, DELTA_BLOCK, Q_NRM,
    Q_POS,
};
pub use emphasis::{emphasis, emphasis_color, EmphasisMode};
pub use export::{
    export_mesh, parse_ply, read_bundle_manifest, read_ply, triangle_partition, BufferInfo,
    BundleManifest, ExportFormat, ExportOptions, PartitionInfo, PlyData, BUNDLE_FORMAT,
};
pub use feat::{pack_features, unpack_features, AoSection, AOCC_HEADER_LEN, FEAT_HEADER_LEN};

pub use crate::features::VertexAttributes;

#[derive(Debug, Error)]
pub enum ExaIoError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("vertex count mismatch: expected {expected}, found {found}")]
    CountMismatch { expected: usize, found: usize },
    #[error("stream truncated")]
    Truncated,
    #[error("selector {0} out of range")]
    Selector(u32),
    #[error("corrupt section: {0}")]
    Corrupt(String),
    #[error("value out of range: {0}")]
    Overflow(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(
        "STL needs a closed selection ({boundary_edges} boundary, {nonmanifold_edges} \
         non-manifold edges); enable hole filling or select closed partitions"
    )]
    OpenMesh {
        boundary_edges: usize,
        nonmanifold_edges: usize,
    },
    #[error("{0}")]
    Format(String),
}
