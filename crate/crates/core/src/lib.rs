//! Processing pipeline for micro-CT volumes of enveloped clay tablets.
//!
//! The crate turns a noisy scalar volume on a regular grid into a compressed,
//! 2-manifold, feature-attributed and segmented triangle mesh:
//!
//! 1. [`volume`]: import, crop, low-pass + 2:1 resampling, histogram analysis
//!    (noise sigma, threshold tau, SNR) and joint bilateral denoising.
//! 2. [`codec`]: sign field extraction and the octree-coded EXA container
//!    (topology, ambiguity, precision sections).
//! 3. [`mesh`]: table-driven manifold dual marching cubes with x-quads,
//!    triangulation, normals, vertex clustering and hole filling.
//! 4. [`features`]: median normal smoothing, vertex updates, principal
//!    curvatures, 7-bit shape codes, segmentation and ambient occlusion.
//! 5. [`exa_io`]: delta sections, feature words, and PLY/OBJ/STL/bundle export.
//! 6. [`pipeline`]: end-to-end orchestration and the JSON stage report.

pub mod codec;
pub mod exa_io;
pub mod features;
pub mod mesh;
pub mod pipeline;
pub mod volume;

pub(crate) mod par;

pub use codec::{
    asymptotic_decider, build_code_table, build_sign_field, exa_decode, exa_encode, exa_read,
    exa_write, CodeTable, ContourData, ExaContainer,
};
pub use exa_io::{
    decode_vertex_deltas, encode_vertex_deltas, export_mesh, pack_features, unpack_features,
    DeltaSection, ExportFormat, VertexAttributes, VertexGeometry,
};
pub use features::{
    classify_shape, compute_ambient_occlusion, estimate_curvatures, fibonacci_directions,
    segment_mesh, smooth_face_normals, update_vertex_positions, CurvaturePair,
};
pub use mesh::{build_config_table, build_mesh, ConfigTable, TriMesh, XQuadMesh};
pub use pipeline::{report_stats, run_pipeline, PipelineConfig, Report};
pub use volume::{
    build_histogram, crop_volume, denoise_joint_bilateral, estimate_sigma, estimate_snr,
    estimate_threshold, gauss_resample, generate_phantom, import_volume, tukey_weight,
    HistogramModel, PhantomSpec, Volume3D,
};
