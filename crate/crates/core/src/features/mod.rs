//! Surface attributes on x-quad meshes: median normal smoothing, vertex
//! updates, principal curvatures and shape codes, curvature segmentation and
//! ambient occlusion.

mod ao;
mod curvature;
mod median;
mod segment;
mod shape;
mod smooth;

use thiserror::Error;

pub use ao::{
    ambient_occlusion, compute_ambient_occlusion, fibonacci_directions, quantize_ao, w1, AoFalloff,
    AoOptions,
};
pub use curvature::{estimate_curvatures, estimate_curvatures_with, normal_curvature, VertexReduce};
pub use median::geometric_median;
pub use segment::{segment_mesh, MAX_PARTITIONS};
pub use shape::{classify_shape, shape_bins, DEFAULT_C_MIN};
pub use smooth::{face_neighbors, smooth_face_normals, update_vertex_positions};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("curvatures out of order: k1 {0} < k2 {1}")]
    Unordered(f64, f64),
    #[error("non-finite curvature ({0}, {1})")]
    NonFinite(f64, f64),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("zero normal")]
    ZeroNormal,
    #[error("attribute field out of range: {0}")]
    FieldOverflow(String),
}

/// Principal curvatures in reciprocal grid units, `k1 >= k2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CurvaturePair {
    pub k1: f64,
    pub k2: f64,
}

impl CurvaturePair {
    /// Orders the two values.
    pub fn new(a: f64, b: f64) -> Self {
        if a >= b {
            Self { k1: a, k2: b }
        } else {
            Self { k1: b, k2: a }
        }
    }

    pub fn curvedness(&self) -> f64 {
        self.k1.hypot(self.k2)
    }
}

/// Per-vertex attributes packed into one 16-bit word: bits 15..9 shape code,
/// 8..6 partition, 5..0 ambient occlusion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct VertexAttributes {
    /// 0 = flat, else `1 + shape_bin * 14 + curvedness_bin` (at most 126).
    pub shape_code: u8,
    /// 0 = boundary or unassigned, 1..=7 partitions.
    pub partition: u8,
    /// Quantized openness, 0 = fully occluded, 63 = open.
    pub ao: u8,
}

impl VertexAttributes {
    pub fn pack(&self) -> Result<u16, FeatureError> {
        if self.shape_code > 127 {
            return Err(FeatureError::FieldOverflow(format!("shape {}", self.shape_code)));
        }
        if self.partition > 7 {
            return Err(FeatureError::FieldOverflow(format!("partition {}", self.partition)));
        }
        if self.ao > 63 {
            return Err(FeatureError::FieldOverflow(format!("ao {}", self.ao)));
        }
        Ok((self.shape_code as u16) << 9 | (self.partition as u16) << 6 | self.ao as u16)
    }

    pub fn unpack(word: u16) -> Self {
        Self {
            shape_code: (word >> 9) as u8,
            partition: ((word >> 6) & 7) as u8,
            ao: (word & 63) as u8,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_layout() {
        let a = VertexAttributes {
            shape_code: 0,
            partition: 0,
            ao: 63,
        };
        assert_eq!(a.pack().unwrap(), 0x003F);
        let b = VertexAttributes {
            shape_code: 126,
            partition: 7,
            ao: 0,
        };
        assert_eq!(b.pack().unwrap(), 126 << 9 | 7 << 6);
    }

    #[test]
    fn every_word_round_trips() {
        for w in 0..=u16::MAX {
            assert_eq!(VertexAttributes::unpack(w).pack().unwrap(), w);
        }
    }

    #[test]
    fn overflow_is_rejected() {
        let a = VertexAttributes {
            shape_code: 0,
            partition: 8,
            ao: 0,
        };
        assert!(a.pack().is_err());
        let a = VertexAttributes {
            shape_code: 0,
            partition: 0,
            ao: 64,
        };
        assert!(a.pack().is_err());
    }
}
