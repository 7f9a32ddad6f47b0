//! Fixtures shared by the stage benchmarks in `benches/`.

use exa_core::codec::{build_sign_field, quantize_offsets, ContourData};
use exa_core::mesh::{build_mesh, XQuadMesh};
use exa_core::volume::{generate_phantom, PhantomSpec, Volume3D};

/// Noisy nested box, the usual end-to-end phantom.
pub fn nested_box(n: usize) -> Volume3D {
    let spec = PhantomSpec::nested_box([n, n * 7 / 8, n * 5 / 8]).with_noise(0.1, 1);
    generate_phantom(&spec).expect("phantom")
}

/// Radius field sphere with its threshold.
pub fn sphere(n: usize) -> (Volume3D, f64) {
    let spec = PhantomSpec::sphere(n);
    (generate_phantom(&spec).expect("phantom"), spec.nominal_tau())
}

pub fn contour(vol: &Volume3D, tau: f64) -> ContourData {
    let mut c = build_sign_field(vol, tau);
    quantize_offsets(&mut c, vol, 8).expect("precision");
    c
}

pub fn mesh(vol: &Volume3D, tau: f64) -> XQuadMesh {
    build_mesh(&contour(vol, tau)).expect("mesh")
}
