use std::f64::consts::{FRAC_PI_4, PI};

use super::FeatureError;

/// Default flatness threshold on curvedness, reciprocal grid units.
pub const DEFAULT_C_MIN: f64 = 1.0 / 64.0;

const SHAPE_BINS: i64 = 9;
const CURVEDNESS_BINS: i64 = 14;

/// Shape bin (0 = dome .. 4 = saddle .. 8 = cup) and curvedness bin, or
/// `None` when flat.
pub fn shape_bins(k1: f64, k2: f64, c_min: f64) -> Result<Option<(u8, u8)>, FeatureError> {
    if !k1.is_finite() || !k2.is_finite() {
        return Err(FeatureError::NonFinite(k1, k2));
    }
    if k1 < k2 {
        return Err(FeatureError::Unordered(k1, k2));
    }
    if !(c_min > 0.0) || !c_min.is_finite() {
        return Err(FeatureError::Parameter(format!("c_min {c_min}")));
    }
    let c2 = k1 * k1 + k2 * k2;
    if c2 < c_min * c_min {
        return Ok(None);
    }
    let mut phi = k1.atan2(k2);
    if phi < FRAC_PI_4 - 1e-12 {
        phi += 2.0 * PI;
    }
    let shape = ((SHAPE_BINS as f64 * (phi - FRAC_PI_4) / PI).floor() as i64).clamp(0, SHAPE_BINS - 1);
    // floor(2 log2(c / c_min)) is the binary exponent of c^2 / c_min^2
    let r = c2 / (c_min * c_min);
    let curved = (r.log2().floor() as i64).clamp(0, CURVEDNESS_BINS - 1);
    Ok(Some((shape as u8, curved as u8)))
}

/// 7-bit shape code: 0 when flat, else `1 + shape_bin * 14 + curvedness_bin`.
pub fn classify_shape(k1: f64, k2: f64, c_min: f64) -> Result<u8, FeatureError> {
    Ok(match shape_bins(k1, k2, c_min)? {
        None => 0,
        Some((s, c)) => 1 + s * CURVEDNESS_BINS as u8 + c,
    })
}
