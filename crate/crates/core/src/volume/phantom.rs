//! Synthetic volumes standing in for scanner output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::filter::gauss3;
use super::{Result, Volume3D, VolumeError};

/// Name of the noise generator, recorded in manifests and reports.
pub const NOISE_GENERATOR: &str = "ChaCha8";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarity {
    /// Value is the distance from the center (the material is the exterior).
    #[default]
    Distance,
    /// Solid ball: `mu_up` inside, `mu_low` outside, one-voxel linear ramp.
    Density,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhantomKind {
    Sphere {
        /// Defaults to 0.9 * (min(dims) - 1) / 2; only used by density polarity.
        #[serde(default)]
        radius: Option<f64>,
        #[serde(default)]
        polarity: Polarity,
    },
    /// Rounded envelope shell around a rounded inner box, separated by a gap
    /// and optionally joined by one box-shaped bridge along +x.
    NestedBox {
        #[serde(default = "default_margin")]
        margin: f64,
        #[serde(default = "default_shell")]
        shell: f64,
        #[serde(default = "default_gap")]
        gap: f64,
        /// Corner radius of the cavity; the outer and inner radii follow by offset.
        #[serde(default = "default_corner")]
        corner_radius: f64,
        /// Bridge cross-section edge length, `None` for no bridge.
        #[serde(default = "default_bridge")]
        bridge: Option<f64>,
    },
    /// Half-space step along x: the top `fraction_up` of the x range is `mu_up`.
    BimodalNoise { fraction_up: f64 },
    /// Uniform noise low-passed `passes` times and stretched to
    /// `[mu_low, mu_up]`; `border` outer layers are forced to `mu_low`.
    SmoothedNoise { passes: usize, border: usize },
}

fn default_margin() -> f64 {
    2.0
}
fn default_shell() -> f64 {
    4.0
}
fn default_gap() -> f64 {
    2.0
}
fn default_corner() -> f64 {
    4.0
}
fn default_bridge() -> Option<f64> {
    Some(4.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    #[serde(flatten)]
    pub kind: PhantomKind,
    #[serde(default)]
    pub mu_low: f64,
    #[serde(default = "default_mu_up")]
    pub mu_up: f64,
    /// Standard deviation of the additive Gaussian noise.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_mu_up() -> f64 {
    1.0
}

impl PhantomSpec {
    /// Radius field: value = distance from the volume center, threshold 0.9 of
    /// the largest inscribed radius.
    pub fn sphere(n: usize) -> Self {
        Self {
            dims: [n; 3],
            kind: PhantomKind::Sphere {
                radius: None,
                polarity: Polarity::Distance,
            },
            mu_low: 0.0,
            mu_up: 1.0,
            noise: 0.0,
            seed: 0,
        }
    }

    /// Solid ball of the given radius centred in an `n^3` grid.
    pub fn ball(n: usize, radius: f64) -> Self {
        Self {
            kind: PhantomKind::Sphere {
                radius: Some(radius),
                polarity: Polarity::Density,
            },
            ..Self::sphere(n)
        }
    }

    /// Envelope/tablet phantom with the default geometry.
    pub fn nested_box(dims: [usize; 3]) -> Self {
        Self {
            dims,
            kind: PhantomKind::NestedBox {
                margin: default_margin(),
                shell: default_shell(),
                gap: default_gap(),
                corner_radius: default_corner(),
                bridge: default_bridge(),
            },
            mu_low: 0.0,
            mu_up: 1.0,
            noise: 0.0,
            seed: 0,
        }
    }

    pub fn smoothed_noise(n: usize, seed: u64) -> Self {
        Self {
            dims: [n; 3],
            kind: PhantomKind::SmoothedNoise {
                passes: 3,
                border: 1,
            },
            mu_low: 0.0,
            mu_up: 1.0,
            noise: 0.0,
            seed,
        }
    }

    pub fn with_noise(mut self, noise: f64, seed: u64) -> Self {
        self.noise = noise;
        self.seed = seed;
        self
    }

    /// Iso-value separating the two materials (0.9 of the inscribed radius for the
    /// distance sphere).
    pub fn nominal_tau(&self) -> f64 {
        match self.kind {
            PhantomKind::Sphere {
                polarity: Polarity::Distance,
                ..
            } => default_radius(self.dims),
            _ => 0.5 * (self.mu_low + self.mu_up),
        }
    }
}

/// 0.9 times the distance from the center to the nearest face.
fn default_radius(dims: [usize; 3]) -> f64 {
    0.9 * (dims.iter().min().copied().unwrap_or(1) as f64 - 1.0) / 2.0
}

fn center(dims: [usize; 3]) -> [f64; 3] {
    [
        (dims[0] as f64 - 1.0) / 2.0,
        (dims[1] as f64 - 1.0) / 2.0,
        (dims[2] as f64 - 1.0) / 2.0,
    ]
}

/// Signed distance to an axis-aligned box with rounded edges.
fn rounded_box_sd(p: [f64; 3], c: [f64; 3], half: [f64; 3], r: f64) -> f64 {
    let q: Vec<f64> = (0..3).map(|a| (p[a] - c[a]).abs() - (half[a] - r)).collect();
    let outside = q.iter().map(|v| v.max(0.0).powi(2)).sum::<f64>().sqrt();
    let inside = q[0].max(q[1]).max(q[2]).min(0.0);
    outside + inside - r
}

/// Linear ramp over one voxel: 1 deep inside, 0 outside, 0.5 on the surface.
#[inline]
fn coverage(sd: f64) -> f64 {
    (0.5 - sd).clamp(0.0, 1.0)
}

pub fn generate_phantom(spec: &PhantomSpec) -> Result<Volume3D> {
    let dims = spec.dims;
    if dims.iter().any(|&d| d == 0) {
        return Err(VolumeError::InvalidDims(dims));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(VolumeError::Phantom(format!(
            "noise level must be >= 0, got {}",
            spec.noise
        )));
    }
    let lo = spec.mu_low;
    let delta = spec.mu_up - spec.mu_low;
    let c = center(dims);
    let base: Volume3D = match &spec.kind {
        PhantomKind::Sphere { radius, polarity } => {
            let r = radius.unwrap_or_else(|| default_radius(dims));
            if *polarity == Polarity::Density {
                let fits = (0..3).all(|a| r > 0.0 && r <= c[a]);
                if !fits {
                    return Err(VolumeError::Phantom(format!(
                        "radius {r} does not fit in dims {dims:?}"
                    )));
                }
            }
            let polarity = *polarity;
            Volume3D::from_fn(dims, |x, y, z| {
                let d = ((x as f64 - c[0]).powi(2)
                    + (y as f64 - c[1]).powi(2)
                    + (z as f64 - c[2]).powi(2))
                .sqrt();
                match polarity {
                    Polarity::Distance => d as f32,
                    Polarity::Density => (lo + delta * coverage(d - r)) as f32,
                }
            })?
        }
        PhantomKind::NestedBox {
            margin,
            shell,
            gap,
            corner_radius,
            bridge,
        } => nested_box(dims, *margin, *shell, *gap, *corner_radius, *bridge, lo, delta)?,
        PhantomKind::BimodalNoise { fraction_up } => {
            if !(0.0..=1.0).contains(fraction_up) {
                return Err(VolumeError::Phantom(format!(
                    "fraction_up must lie in [0, 1], got {fraction_up}"
                )));
            }
            let split = dims[0] as f64 * (1.0 - fraction_up);
            Volume3D::from_fn(dims, |x, _, _| {
                if x as f64 >= split {
                    spec.mu_up as f32
                } else {
                    lo as f32
                }
            })?
        }
        PhantomKind::SmoothedNoise { passes, border } => {
            smoothed_noise(dims, *passes, *border, spec.seed, lo, delta)?
        }
    };
    if spec.noise == 0.0 {
        return Ok(base);
    }
    add_noise(base, spec.noise, spec.seed)
}

#[allow(clippy::too_many_arguments)]
fn nested_box(
    dims: [usize; 3],
    margin: f64,
    shell: f64,
    gap: f64,
    corner_radius: f64,
    bridge: Option<f64>,
    lo: f64,
    delta: f64,
) -> Result<Volume3D> {
    if margin < 0.0 || shell <= 0.0 || gap <= 0.0 || corner_radius < 0.0 {
        return Err(VolumeError::Phantom(
            "margin >= 0, shell > 0, gap > 0 and corner_radius >= 0 required".into(),
        ));
    }
    let c = center(dims);
    let h_outer = c.map(|h| h - margin);
    let h_cavity = h_outer.map(|h| h - shell);
    let h_inner = h_cavity.map(|h| h - gap);
    let r_cavity = corner_radius;
    let r_outer = corner_radius + shell;
    let r_inner = (corner_radius - gap).max(0.0);
    let bw = bridge.unwrap_or(0.0);
    let smallest = h_inner.iter().cloned().fold(f64::INFINITY, f64::min);
    if smallest <= r_inner.max(bw / 2.0) + 1.0 || h_cavity.iter().any(|&h| h <= r_cavity) {
        return Err(VolumeError::Phantom(format!(
            "nested box (margin {margin}, shell {shell}, gap {gap}, radius {corner_radius}) does not fit in dims {dims:?}"
        )));
    }
    // bridge spans the +x gap and overlaps one voxel into both walls
    let b_center = [c[0] + h_inner[0] + gap / 2.0, c[1], c[2]];
    let b_half = [gap / 2.0 + 1.0, bw / 2.0, bw / 2.0];
    Volume3D::from_fn(dims, |x, y, z| {
        let p = [x as f64, y as f64, z as f64];
        let sd_shell = rounded_box_sd(p, c, h_outer, r_outer)
            .max(-rounded_box_sd(p, c, h_cavity, r_cavity));
        let mut sd = sd_shell.min(rounded_box_sd(p, c, h_inner, r_inner));
        if bridge.is_some() {
            sd = sd.min(rounded_box_sd(p, b_center, b_half, 0.0));
        }
        (lo + delta * coverage(sd)) as f32
    })
}

fn smoothed_noise(
    dims: [usize; 3],
    passes: usize,
    border: usize,
    seed: u64,
    lo: f64,
    delta: f64,
) -> Result<Volume3D> {
    let [nx, ny, _] = dims;
    let mut values = vec![0f32; dims.iter().product()];
    values
        .par_chunks_mut(nx * ny)
        .enumerate()
        .for_each(|(z, slice)| {
            let mut rng = slice_rng(seed ^ 0x5eed_0f_5a1d, z);
            for v in slice.iter_mut() {
                *v = rng.gen::<f32>();
            }
        });
    let mut vol = Volume3D::new(dims, values)?;
    for _ in 0..passes {
        vol = gauss3(&vol);
    }
    let (vmin, vmax) = vol.min_max();
    let span = (vmax - vmin).max(f32::MIN_POSITIVE) as f64;
    let src = vol;
    Volume3D::from_fn(dims, |x, y, z| {
        let on_border = [x, y, z]
            .iter()
            .zip(dims.iter())
            .any(|(&i, &n)| i < border || i + border >= n);
        if on_border {
            lo as f32
        } else {
            (lo + delta * (src.get(x, y, z) - vmin) as f64 / span) as f32
        }
    })
}

fn slice_rng(seed: u64, z: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(z as u64);
    rng
}

fn add_noise(vol: Volume3D, sigma: f64, seed: u64) -> Result<Volume3D> {
    let dims = vol.dims();
    let spacing = vol.spacing_um();
    let [nx, ny, _] = dims;
    let normal = Normal::new(0.0, sigma).map_err(|e| VolumeError::Phantom(e.to_string()))?;
    let mut values = vol.into_values();
    values
        .par_chunks_mut(nx * ny)
        .enumerate()
        .for_each(|(z, slice)| {
            let mut rng = slice_rng(seed, z);
            for v in slice.iter_mut() {
                *v = (*v as f64 + normal.sample(&mut rng)) as f32;
            }
        });
    Ok(Volume3D::new(dims, values)?.with_spacing(spacing))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_is_distance_from_center() {
        let vol = generate_phantom(&PhantomSpec::sphere(16)).unwrap();
        let c = 7.5f64;
        for &(x, y, z) in &[(0usize, 0usize, 0usize), (7, 8, 3), (15, 0, 9)] {
            let d = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2) + (z as f64 - c).powi(2))
                .sqrt();
            assert_eq!(vol.get(x, y, z), d as f32);
        }
        assert!((PhantomSpec::sphere(256).nominal_tau() - 0.9 * 127.5).abs() < 1e-12);
    }

    #[test]
    fn deterministic_noise() {
        let spec = PhantomSpec::ball(12, 4.0).with_noise(0.1, 42);
        let a = generate_phantom(&spec).unwrap();
        let b = generate_phantom(&spec).unwrap();
        assert_eq!(a, b);
        let c = generate_phantom(&spec.clone().with_noise(0.1, 43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_noise_is_exact_field() {
        let spec = PhantomSpec::ball(12, 4.0);
        let vol = generate_phantom(&spec).unwrap();
        assert_eq!(vol.get(0, 0, 0), 0.0);
        assert_eq!(vol.get(5, 5, 5), 1.0);
    }

    #[test]
    fn nested_box_layers() {
        let dims = [40, 32, 28];
        let vol = generate_phantom(&PhantomSpec::nested_box(dims)).unwrap();
        let (cy, cz) = (15.5f64, 13.5f64);
        let (y, z) = (cy.floor() as usize, cz.floor() as usize);
        // walk along -x through the middle: air, shell, gap, inner box
        let row: Vec<f32> = (0..20).map(|x| vol.get(x, y, z)).collect();
        assert_eq!(row[0], 0.0);
        assert_eq!(row[4], 1.0); // shell spans x in [2, 6]
        assert_eq!(row[7], 0.0); // gap
        assert_eq!(row[8], 0.5); // inner surface sits on the grid point
        assert_eq!(row[12], 1.0); // inner box
        // the bridge fills the gap on the +x side only
        assert_eq!(vol.get(32, y, z), 1.0);
        assert_eq!(vol.get(32, 10, z), 0.0);
        assert_eq!(vol.get(7, y, z), 0.0);
    }

    #[test]
    fn nested_box_too_small() {
        assert!(matches!(
            generate_phantom(&PhantomSpec::nested_box([12, 12, 12])),
            Err(VolumeError::Phantom(_))
        ));
    }

    #[test]
    fn smoothed_noise_range_and_border() {
        let vol = generate_phantom(&PhantomSpec::smoothed_noise(16, 3)).unwrap();
        let (lo, hi) = vol.min_max();
        assert_eq!(lo, 0.0);
        assert!(hi <= 1.0 && hi > 0.5);
        assert_eq!(vol.get(0, 5, 5), 0.0);
        assert_eq!(vol.get(15, 5, 5), 0.0);
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = PhantomSpec::nested_box([64, 48, 40]).with_noise(0.05, 9);
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"kind\":\"nested-box\""));
        let back: PhantomSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }
}
