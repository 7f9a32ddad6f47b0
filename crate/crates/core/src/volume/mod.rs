//! Scalar volumes on regular grids and the preprocessing that automates the
//! rest of the pipeline (filtering, histogram statistics, phantoms).

mod filter;
mod histogram;
mod phantom;
mod raw3d;

use rayon::prelude::*;
use thiserror::Error;

pub use filter::{
    denoise_joint_bilateral, denoise_with, gauss3, gauss_resample, median3, tukey_weight,
    DenoiseOptions, RangeFn, TUKEY_SIGMA_SCALE,
};
pub use histogram::{
    build_histogram, estimate_sigma, estimate_snr, estimate_threshold, histogram_from_values,
    HistogramModel, DEFAULT_BINS,
};
pub use phantom::{generate_phantom, PhantomKind, PhantomSpec, Polarity, NOISE_GENERATOR};
pub use raw3d::{import_volume, write_raw3d, VolumeFormat};

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed sidecar {path}: {message}")]
    Sidecar { path: String, message: String },
    #[error("file not found: {0}")]
    MissingFile(String),
    #[error("payload holds {found} bytes, dims require {expected}")]
    PayloadMismatch { expected: usize, found: usize },
    #[error("value count {found} does not match dims {dims:?}")]
    CountMismatch { dims: [usize; 3], found: usize },
    #[error("non-finite value {value} at voxel ({x}, {y}, {z})")]
    NonFinite { x: usize, y: usize, z: usize, value: f32 },
    #[error("invalid dims {0:?}: every axis needs at least one voxel")]
    InvalidDims([usize; 3]),
    #[error("crop box offset {offset:?} size {size:?} exceeds dims {dims:?}")]
    CropOutOfRange {
        offset: [usize; 3],
        size: [usize; 3],
        dims: [usize; 3],
    },
    #[error("axis {axis} has {len} voxels, at least 2 required")]
    TooSmall { axis: usize, len: usize },
    #[error("unsupported volume format: {0}")]
    UnsupportedFormat(String),
    #[error("hdf5: {0}")]
    Hdf5(String),
    #[error("histogram is not bimodal (fewer than two separated maxima)")]
    NonBimodal,
    #[error("density never drops to the e^-1/2 level before the valley")]
    DegeneratePeak,
    #[error("density never exceeds f * pd_min between valley and upper peak")]
    ThresholdNotFound,
    #[error("sigma is zero")]
    ZeroSigma,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("phantom geometry: {0}")]
    Phantom(String),
}

pub type Result<T, E = VolumeError> = std::result::Result<T, E>;

/// Scalar field on a regular 3D grid, x-fastest layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    dims: [usize; 3],
    spacing_um: Option<f64>,
    values: Vec<f32>,
}

impl Volume3D {
    pub fn new(dims: [usize; 3], values: Vec<f32>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(VolumeError::InvalidDims(dims));
        }
        if values.len() != dims[0] * dims[1] * dims[2] {
            return Err(VolumeError::CountMismatch {
                dims,
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            let (x, y, z) = unravel(dims, i);
            return Err(VolumeError::NonFinite {
                x,
                y,
                z,
                value: values[i],
            });
        }
        Ok(Self {
            dims,
            spacing_um: None,
            values,
        })
    }

    /// Builds a volume by evaluating `f(x, y, z)` at every voxel (parallel over z).
    pub fn from_fn<F>(dims: [usize; 3], f: F) -> Result<Self>
    where
        F: Fn(usize, usize, usize) -> f32 + Sync,
    {
        if dims.iter().any(|&d| d == 0) {
            return Err(VolumeError::InvalidDims(dims));
        }
        let [nx, ny, nz] = dims;
        let mut values = vec![0f32; nx * ny * nz];
        values
            .par_chunks_mut(nx * ny)
            .enumerate()
            .for_each(|(z, slice)| {
                for y in 0..ny {
                    for x in 0..nx {
                        slice[y * nx + x] = f(x, y, z);
                    }
                }
            });
        Self::new(dims, values)
    }

    pub fn filled(dims: [usize; 3], value: f32) -> Result<Self> {
        Self::new(dims, vec![value; dims[0] * dims[1] * dims[2]])
    }

    /// Internal constructor for filter outputs that are finite by construction.
    pub(crate) fn from_parts(dims: [usize; 3], spacing_um: Option<f64>, values: Vec<f32>) -> Self {
        debug_assert_eq!(values.len(), dims[0] * dims[1] * dims[2]);
        Self {
            dims,
            spacing_um,
            values,
        }
    }

    pub fn with_spacing(mut self, spacing_um: Option<f64>) -> Self {
        self.spacing_um = spacing_um;
        self
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing_um(&self) -> Option<f64> {
        self.spacing_um
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.values[self.index(x, y, z)]
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.values
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

pub(crate) fn unravel(dims: [usize; 3], i: usize) -> (usize, usize, usize) {
    let x = i % dims[0];
    let y = (i / dims[0]) % dims[1];
    let z = i / (dims[0] * dims[1]);
    (x, y, z)
}

/// Extracts the sub-box `[offset, offset + size)`.
pub fn crop_volume(vol: &Volume3D, offset: [usize; 3], size: [usize; 3]) -> Result<Volume3D> {
    let dims = vol.dims();
    let fits = (0..3).all(|a| size[a] >= 1 && offset[a] + size[a] <= dims[a]);
    if !fits {
        return Err(VolumeError::CropOutOfRange { offset, size, dims });
    }
    let [sx, sy, sz] = size;
    let mut values = vec![0f32; sx * sy * sz];
    values
        .par_chunks_mut(sx * sy)
        .enumerate()
        .for_each(|(z, slice)| {
            for y in 0..sy {
                let src = vol.index(offset[0], offset[1] + y, offset[2] + z);
                slice[y * sx..(y + 1) * sx].copy_from_slice(&vol.values[src..src + sx]);
            }
        });
    Ok(Volume3D::from_parts(size, vol.spacing_um, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_with_location() {
        let mut v = vec![0.0f32; 8];
        v[5] = f32::NAN;
        match Volume3D::new([2, 2, 2], v) {
            Err(VolumeError::NonFinite { x, y, z, .. }) => assert_eq!((x, y, z), (1, 0, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn full_crop_is_identity() {
        let vol = Volume3D::from_fn([5, 4, 3], |x, y, z| (x + 10 * y + 100 * z) as f32).unwrap();
        assert_eq!(crop_volume(&vol, [0, 0, 0], vol.dims()).unwrap(), vol);
    }

    #[test]
    fn crop_of_ramp_is_shifted_ramp() {
        let ramp = |x: usize, y: usize, z: usize| 0.5 * x as f32 - 2.0 * y as f32 + 3.0 * z as f32;
        let vol = Volume3D::from_fn([9, 8, 7], ramp).unwrap();
        let off = [2, 3, 1];
        let c = crop_volume(&vol, off, [4, 5, 6]).unwrap();
        assert_eq!(c.dims(), [4, 5, 6]);
        for z in 0..6 {
            for y in 0..5 {
                for x in 0..4 {
                    assert_eq!(c.get(x, y, z), ramp(x + off[0], y + off[1], z + off[2]));
                }
            }
        }
    }

    #[test]
    fn crop_out_of_range() {
        let vol = Volume3D::filled([4, 4, 4], 0.0).unwrap();
        assert!(matches!(
            crop_volume(&vol, [2, 0, 0], [3, 4, 4]),
            Err(VolumeError::CropOutOfRange { .. })
        ));
    }
}
