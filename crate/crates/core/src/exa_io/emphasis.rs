//! Per-vertex colors baked from the feature word.

use serde::{Deserialize, Serialize};

use crate::features::VertexAttributes;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmphasisMode {
    /// Convex lighter, concave darker, flat neutral gray.
    #[default]
    Bw,
    /// Convex toward sun orange, concave toward sky blue.
    BlueOrange,
    /// Gray level from openness.
    Ao,
    /// Black/white emphasis darkened by occlusion.
    AoEmphasis,
}

pub const NEUTRAL: [f64; 3] = [0.5, 0.5, 0.5];
pub const SUN_ORANGE: [f64; 3] = [1.0, 0.6, 0.1];
pub const SKY_BLUE: [f64; 3] = [0.35, 0.65, 1.0];

/// Signed emphasis in [-1, 1]: sign from the shape bin (dome +1 .. saddle 0 ..
/// cup -1), magnitude from the curvedness bin. 0 for flat.
pub fn emphasis(shape_code: u8) -> f64 {
    if shape_code == 0 || shape_code > 126 {
        return 0.0;
    }
    let s = (shape_code - 1) / 14;
    let c = (shape_code - 1) % 14;
    (4.0 - s as f64) / 4.0 * (c as f64 + 1.0) / 14.0
}

fn mix(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [0, 1, 2].map(|i| a[i] * (1.0 - t) + b[i] * t)
}

fn to_rgb(c: [f64; 3]) -> [u8; 3] {
    c.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
}

pub fn emphasis_color(a: &VertexAttributes, mode: EmphasisMode) -> [u8; 3] {
    let e = emphasis(a.shape_code);
    let open = a.ao as f64 / 63.0;
    let gray = |v: f64| [v; 3];
    to_rgb(match mode {
        EmphasisMode::Bw => gray(0.5 + 0.5 * e),
        EmphasisMode::BlueOrange if e >= 0.0 => mix(NEUTRAL, SUN_ORANGE, e),
        EmphasisMode::BlueOrange => mix(NEUTRAL, SKY_BLUE, -e),
        EmphasisMode::Ao => gray(open),
        EmphasisMode::AoEmphasis => gray((0.5 + 0.5 * e) * open),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_is_neutral() {
        let a = VertexAttributes { shape_code: 0, partition: 1, ao: 63 };
        assert_eq!(emphasis_color(&a, EmphasisMode::Bw), [128; 3]);
        assert_eq!(emphasis_color(&a, EmphasisMode::BlueOrange), [128; 3]);
        assert_eq!(emphasis_color(&a, EmphasisMode::Ao), [255; 3]);
    }

    #[test]
    fn convex_and_concave_go_opposite_ways() {
        let dome = VertexAttributes { shape_code: 1 + 13, ..Default::default() };
        let cup = VertexAttributes { shape_code: 1 + 8 * 14 + 13, ..Default::default() };
        let saddle = VertexAttributes { shape_code: 1 + 4 * 14 + 13, ..Default::default() };
        assert_eq!(emphasis_color(&dome, EmphasisMode::Bw), [255; 3]);
        assert_eq!(emphasis_color(&cup, EmphasisMode::Bw), [0; 3]);
        assert_eq!(emphasis_color(&saddle, EmphasisMode::Bw), [128; 3]);
        assert_eq!(emphasis_color(&dome, EmphasisMode::BlueOrange), to_rgb(SUN_ORANGE));
        assert_eq!(emphasis_color(&cup, EmphasisMode::BlueOrange), to_rgb(SKY_BLUE));
    }
}
