//! Windowed 3x3x3 filters with clamp-to-edge borders.
//!
//! All arithmetic runs in f64 per voxel and the loops are parallel over z
//! slices with no cross-slice reductions, so outputs do not depend on the
//! worker count.

use rayon::prelude::*;

use super::{Result, Volume3D, VolumeError};

/// Tukey scale so that `tukey(sigma)` attenuates like `exp(-x^2 / 2 sigma^2)`
/// does at `x = sigma`: `1 / sqrt(1 - sqrt(exp(-1/2)))`, rounded.
pub const TUKEY_SIGMA_SCALE: f64 = 2.1262;

/// Binomial (1, 2, 1) / 4 taps.
const TAPS: [f64; 3] = [0.25, 0.5, 0.25];

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RangeFn {
    Tukey,
    Gauss,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseOptions {
    pub sigma: f64,
    pub iterations: usize,
    pub range_fn: RangeFn,
    /// Rebuild the Gauss-filtered guidance image before every iteration.
    pub recompute_guide: bool,
}

impl DenoiseOptions {
    pub fn new(sigma: f64) -> Self {
        Self {
            sigma,
            iterations: 2,
            range_fn: RangeFn::Tukey,
            recompute_guide: true,
        }
    }
}

/// `(1 - (x / s')^2)^2` for `|x| < s'`, else 0.
#[inline]
pub fn tukey_weight(x: f64, sigma_prime: f64) -> f64 {
    let x = x.abs();
    if x < sigma_prime {
        let r = x / sigma_prime;
        let t = 1.0 - r * r;
        t * t
    } else {
        0.0
    }
}

#[inline]
fn clamp_idx(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// One separable binomial pass along `axis`.
fn binomial_pass(src: &[f32], dims: [usize; 3], axis: usize) -> Vec<f32> {
    let [nx, ny, nz] = dims;
    let stride = [1, nx, nx * ny][axis];
    let n = dims[axis];
    let mut out = vec![0f32; src.len()];
    out.par_chunks_mut(nx * ny)
        .enumerate()
        .for_each(|(z, slice)| {
            for y in 0..ny {
                for x in 0..nx {
                    let p = [x, y, z];
                    let i = p[axis] as isize;
                    let base = x + nx * (y + ny * z) - p[axis] * stride;
                    let mut acc = 0.0f64;
                    for (k, w) in TAPS.iter().enumerate() {
                        let j = clamp_idx(i + k as isize - 1, n);
                        acc += w * src[base + j * stride] as f64;
                    }
                    slice[y * nx + x] = acc as f32;
                }
            }
        });
    let _ = nz;
    out
}

/// 3x3x3 normalized binomial low-pass (clamped borders).
pub fn gauss3(vol: &Volume3D) -> Volume3D {
    let dims = vol.dims();
    let a = binomial_pass(vol.values(), dims, 0);
    let b = binomial_pass(&a, dims, 1);
    let c = binomial_pass(&b, dims, 2);
    Volume3D::from_parts(dims, vol.spacing_um(), c)
}

/// Low-pass then keep the even-index voxel of every 2x2x2 block.
pub fn gauss_resample(vol: &Volume3D) -> Result<Volume3D> {
    let dims = vol.dims();
    for (axis, &len) in dims.iter().enumerate() {
        if len < 2 {
            return Err(VolumeError::TooSmall { axis, len });
        }
    }
    let smooth = gauss3(vol);
    let out_dims = [dims[0] / 2, dims[1] / 2, dims[2] / 2];
    let [ox, oy, _] = out_dims;
    let mut values = vec![0f32; out_dims.iter().product()];
    values
        .par_chunks_mut(ox * oy)
        .enumerate()
        .for_each(|(z, slice)| {
            for y in 0..oy {
                for x in 0..ox {
                    slice[y * ox + x] = smooth.get(2 * x, 2 * y, 2 * z);
                }
            }
        });
    let spacing = vol.spacing_um().map(|s| 2.0 * s);
    Ok(Volume3D::from_parts(out_dims, spacing, values))
}

fn spatial_weights() -> [f64; 27] {
    let mut w = [0.0; 27];
    for dz in 0..3 {
        for dy in 0..3 {
            for dx in 0..3 {
                w[dx + 3 * dy + 9 * dz] = TAPS[dx] * TAPS[dy] * TAPS[dz];
            }
        }
    }
    w
}

/// Joint bilateral filtering with the default options (guide recomputed each
/// iteration).
pub fn denoise_joint_bilateral(
    vol: &Volume3D,
    sigma: f64,
    iterations: usize,
    range_fn: RangeFn,
) -> Result<Volume3D> {
    denoise_with(
        vol,
        &DenoiseOptions {
            sigma,
            iterations,
            range_fn,
            recompute_guide: true,
        },
    )
}

pub fn denoise_with(vol: &Volume3D, opts: &DenoiseOptions) -> Result<Volume3D> {
    if opts.iterations == 0 {
        return Err(VolumeError::InvalidParameter("iterations must be >= 1".into()));
    }
    if !(opts.sigma > 0.0 && opts.sigma.is_finite()) {
        return Err(VolumeError::InvalidParameter(format!(
            "sigma must be positive, got {}",
            opts.sigma
        )));
    }
    let mut cur = vol.clone();
    let mut guide = gauss3(vol);
    for it in 0..opts.iterations {
        if it > 0 && opts.recompute_guide {
            guide = gauss3(&cur);
        }
        cur = bilateral_pass(&cur, &guide, opts.sigma, opts.range_fn);
    }
    Ok(cur)
}

fn bilateral_pass(cur: &Volume3D, guide: &Volume3D, sigma: f64, range_fn: RangeFn) -> Volume3D {
    let dims = cur.dims();
    let [nx, ny, nz] = dims;
    let ws = spatial_weights();
    let sigma_prime = TUKEY_SIGMA_SCALE * sigma;
    let inv_two_var = 1.0 / (2.0 * sigma * sigma);
    let range = |d: f64| match range_fn {
        RangeFn::Tukey => tukey_weight(d, sigma_prime),
        RangeFn::Gauss => (-d * d * inv_two_var).exp(),
    };
    let src = cur.values();
    let gv = guide.values();
    let mut out = vec![0f32; src.len()];
    out.par_chunks_mut(nx * ny)
        .enumerate()
        .for_each(|(z, slice)| {
            let zs = [
                clamp_idx(z as isize - 1, nz),
                z,
                clamp_idx(z as isize + 1, nz),
            ];
            for y in 0..ny {
                let ys = [
                    clamp_idx(y as isize - 1, ny),
                    y,
                    clamp_idx(y as isize + 1, ny),
                ];
                for x in 0..nx {
                    let xs = [
                        clamp_idx(x as isize - 1, nx),
                        x,
                        clamp_idx(x as isize + 1, nx),
                    ];
                    let g0 = gv[x + nx * (y + ny * z)] as f64;
                    let mut num = 0.0f64;
                    let mut den = 0.0f64;
                    for (kz, &zz) in zs.iter().enumerate() {
                        for (ky, &yy) in ys.iter().enumerate() {
                            let row = nx * (yy + ny * zz);
                            for (kx, &xx) in xs.iter().enumerate() {
                                let q = row + xx;
                                let w = ws[kx + 3 * ky + 9 * kz] * range(gv[q] as f64 - g0);
                                num += w * src[q] as f64;
                                den += w;
                            }
                        }
                    }
                    // den > 0: the centre tap always has range weight 1
                    slice[y * nx + x] = (num / den) as f32;
                }
            }
        });
    Volume3D::from_parts(dims, cur.spacing_um(), out)
}

/// 3x3x3 median filter (clamped borders).
pub fn median3(vol: &Volume3D) -> Volume3D {
    let dims = vol.dims();
    let [nx, ny, nz] = dims;
    let src = vol.values();
    let mut out = vec![0f32; src.len()];
    out.par_chunks_mut(nx * ny)
        .enumerate()
        .for_each(|(z, slice)| {
            let mut window = [0f32; 27];
            for y in 0..ny {
                for x in 0..nx {
                    let mut k = 0;
                    for dz in -1..=1isize {
                        let zz = clamp_idx(z as isize + dz, nz);
                        for dy in -1..=1isize {
                            let yy = clamp_idx(y as isize + dy, ny);
                            for dx in -1..=1isize {
                                let xx = clamp_idx(x as isize + dx, nx);
                                window[k] = src[xx + nx * (yy + ny * zz)];
                                k += 1;
                            }
                        }
                    }
                    window.sort_unstable_by(|a, b| a.total_cmp(b));
                    slice[y * nx + x] = window[13];
                }
            }
        });
    Volume3D::from_parts(dims, vol.spacing_um(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tukey_anchor_values() {
        assert_eq!(tukey_weight(0.0, TUKEY_SIGMA_SCALE), 1.0);
        assert_eq!(tukey_weight(TUKEY_SIGMA_SCALE, TUKEY_SIGMA_SCALE), 0.0);
        let at_sigma = tukey_weight(1.0, TUKEY_SIGMA_SCALE);
        assert!((at_sigma - 0.60654).abs() < 1e-4, "{at_sigma}");
        assert!((at_sigma - (-0.5f64).exp()).abs() < 1e-4);
    }

    #[test]
    fn tukey_scale_matches_closed_form() {
        let exact = 1.0 / (1.0 - (-0.5f64).exp().sqrt()).sqrt();
        assert!((exact - TUKEY_SIGMA_SCALE).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn tukey_monotone(a in 0.0f64..5.0, b in 0.0f64..5.0, s in 0.1f64..4.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(tukey_weight(lo, s) >= tukey_weight(hi, s));
            prop_assert_eq!(tukey_weight(-a, s), tukey_weight(a, s));
            if a >= s { prop_assert_eq!(tukey_weight(a, s), 0.0); }
        }

        #[test]
        fn resample_dims_and_constant(nx in 2usize..9, ny in 2usize..9, nz in 2usize..9, c in -1e3f32..1e3) {
            let vol = Volume3D::filled([nx, ny, nz], c).unwrap();
            let out = gauss_resample(&vol).unwrap();
            prop_assert_eq!(out.dims(), [nx / 2, ny / 2, nz / 2]);
            for &v in out.values() {
                prop_assert!((v - c).abs() <= c.abs() * f32::EPSILON);
            }
        }
    }

    #[test]
    fn resample_rejects_thin_axis() {
        let vol = Volume3D::filled([4, 1, 4], 0.0).unwrap();
        assert!(matches!(
            gauss_resample(&vol),
            Err(VolumeError::TooSmall { axis: 1, len: 1 })
        ));
    }

    #[test]
    fn impulse_response() {
        // impulse at (4,4,4) lands on output (2,2,2) with weight (1/2)^3; the
        // output neighbours sit two input voxels away, outside the kernel.
        let vol = Volume3D::from_fn([9, 9, 9], |x, y, z| {
            if (x, y, z) == (4, 4, 4) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let out = gauss_resample(&vol).unwrap();
        assert_eq!(out.dims(), [4, 4, 4]);
        for z in 0..4 {
            for y in 0..4 {
                for x in 0..4 {
                    let expect = if (x, y, z) == (2, 2, 2) { 0.125 } else { 0.0 };
                    assert_eq!(out.get(x, y, z), expect);
                }
            }
        }
        // the full-resolution low-pass carries the separable kernel itself
        let lp = gauss3(&vol);
        assert_eq!(lp.get(5, 4, 4), 0.0625);
        assert_eq!(lp.get(5, 5, 4), 0.03125);
        assert_eq!(lp.get(5, 5, 5), 0.015625);
    }

    #[test]
    fn denoise_constant_is_fixed_point() {
        let vol = Volume3D::filled([6, 5, 4], 0.37).unwrap();
        for f in [RangeFn::Tukey, RangeFn::Gauss] {
            let out = denoise_joint_bilateral(&vol, 0.1, 2, f).unwrap();
            assert_eq!(out, vol);
        }
    }

    #[test]
    fn denoise_rejects_bad_parameters() {
        let vol = Volume3D::filled([3, 3, 3], 0.0).unwrap();
        assert!(denoise_joint_bilateral(&vol, 0.0, 2, RangeFn::Tukey).is_err());
        assert!(denoise_joint_bilateral(&vol, 0.1, 0, RangeFn::Tukey).is_err());
    }

    #[test]
    fn median_removes_isolated_spike() {
        let vol = Volume3D::from_fn([5, 5, 5], |x, y, z| {
            if (x, y, z) == (2, 2, 2) {
                9.0
            } else {
                1.0
            }
        })
        .unwrap();
        assert!(median3(&vol).values().iter().all(|&v| v == 1.0));
    }
}
