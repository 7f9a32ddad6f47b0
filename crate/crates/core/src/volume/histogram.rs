//! Value histogram, peak/valley location and the σ, τ and SNR estimators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Result, Volume3D, VolumeError};

pub const DEFAULT_BINS: usize = 1024;

/// Width of the moving average applied to `pd` before peak finding.
const SMOOTH_WIDTH: usize = 5;

/// Secondary peaks whose prominence is below this fraction of the global
/// maximum are treated as noise.
const MIN_PROMINENCE: f64 = 0.01;

/// Relative height of the cap used to refine peak locations.
const PEAK_CAP: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramModel {
    pub bin_count: usize,
    pub vmin: f64,
    pub vmax: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
    /// Normalized density, `sum(pd) * bin_width == 1`.
    pub pd: Vec<f64>,
    /// `pd` after the 5-bin moving average; all locations refer to this curve.
    pub pd_smooth: Vec<f64>,
    pub low_bin: usize,
    pub up_bin: usize,
    pub min_bin: usize,
    pub mu_low: f64,
    pub mu_up: f64,
    pub pd_up: f64,
    pub min_loc: f64,
    pub pd_min: f64,
    pub sigma: f64,
}

impl HistogramModel {
    pub fn center(&self, bin: usize) -> f64 {
        self.vmin + (bin as f64 + 0.5) * self.bin_width
    }

    /// Density-weighted centroid of the contiguous cap around `bin` where the
    /// smoothed density stays above `PEAK_CAP` of the peak value.
    fn refine_peak(&self, bin: usize) -> f64 {
        let s = &self.pd_smooth;
        let floor = PEAK_CAP * s[bin];
        let mut a = bin;
        while a > 0 && s[a - 1] >= floor {
            a -= 1;
        }
        let mut b = bin;
        while b + 1 < s.len() && s[b + 1] >= floor {
            b += 1;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for k in a..=b {
            num += s[k] * self.center(k);
            den += s[k];
        }
        num / den
    }
}

pub fn build_histogram(vol: &Volume3D, bin_count: usize) -> Result<HistogramModel> {
    histogram_from_values(vol.values(), bin_count)
}

/// Same as [`build_histogram`] for a bare sample slice.
pub fn histogram_from_values(values: &[f32], bin_count: usize) -> Result<HistogramModel> {
    if bin_count < 64 {
        return Err(VolumeError::InvalidParameter(format!(
            "bin_count must be >= 64, got {bin_count}"
        )));
    }
    if values.is_empty() {
        return Err(VolumeError::NonBimodal);
    }
    let (lo, hi) = values
        .par_iter()
        .fold(
            || (f32::INFINITY, f32::NEG_INFINITY),
            |(lo, hi), &v| (lo.min(v), hi.max(v)),
        )
        .reduce(
            || (f32::INFINITY, f32::NEG_INFINITY),
            |a, b| (a.0.min(b.0), a.1.max(b.1)),
        );
    let (vmin, vmax) = (lo as f64, hi as f64);
    if !(vmax > vmin) {
        return Err(VolumeError::NonBimodal);
    }
    let bin_width = (vmax - vmin) / bin_count as f64;
    let scale = bin_count as f64 / (vmax - vmin);
    let counts = values
        .par_chunks(1 << 16)
        .map(|chunk| {
            let mut c = vec![0u64; bin_count];
            for &v in chunk {
                let b = ((v as f64 - vmin) * scale) as usize;
                c[b.min(bin_count - 1)] += 1;
            }
            c
        })
        .reduce(
            || vec![0u64; bin_count],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let norm = 1.0 / (values.len() as f64 * bin_width);
    let pd: Vec<f64> = counts.iter().map(|&c| c as f64 * norm).collect();
    let pd_smooth = moving_average(&pd, SMOOTH_WIDTH);

    let (low_bin, up_bin) = find_peaks(&pd_smooth).ok_or(VolumeError::NonBimodal)?;
    // valley: argmin between the peaks, ties resolved toward the upper peak
    let mut min_bin = low_bin + 1;
    for b in low_bin + 1..up_bin {
        if pd_smooth[b] <= pd_smooth[min_bin] {
            min_bin = b;
        }
    }
    let mut model = HistogramModel {
        bin_count,
        vmin,
        vmax,
        bin_width,
        counts,
        pd,
        low_bin,
        up_bin,
        min_bin,
        mu_low: 0.0,
        mu_up: 0.0,
        pd_up: pd_smooth[up_bin],
        min_loc: 0.0,
        pd_min: pd_smooth[min_bin],
        pd_smooth,
        sigma: 0.0,
    };
    model.mu_low = model.refine_peak(low_bin);
    model.mu_up = model.refine_peak(up_bin);
    model.min_loc = model.center(min_bin);
    model.sigma = estimate_sigma(&model)?;
    Ok(model)
}

/// Centered moving average, window truncated at the ends.
fn moving_average(pd: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    (0..pd.len())
        .map(|i| {
            let a = i.saturating_sub(half);
            let b = (i + half + 1).min(pd.len());
            pd[a..b].iter().sum::<f64>() / (b - a) as f64
        })
        .collect()
}

/// Local maxima as plateau runs (middle bin), each higher than both neighbours.
fn local_maxima(s: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < s.len() {
        let mut j = i;
        while j + 1 < s.len() && s[j + 1] == s[i] {
            j += 1;
        }
        let left_lower = i == 0 || s[i - 1] < s[i];
        let right_lower = j + 1 == s.len() || s[j + 1] < s[i];
        if left_lower && right_lower && s[i] > 0.0 {
            out.push((i + j) / 2);
        }
        i = j + 1;
    }
    out
}

/// Global maximum plus the most prominent other local maximum, where
/// prominence is the height above the deepest point between the two.
/// Returns `(lower, upper)` in value order.
fn find_peaks(s: &[f64]) -> Option<(usize, usize)> {
    let maxima = local_maxima(s);
    let &g = maxima
        .iter()
        .max_by(|&&a, &&b| s[a].total_cmp(&s[b]).then(b.cmp(&a)))?;
    let mut best: Option<(f64, usize)> = None;
    for &m in &maxima {
        if m == g {
            continue;
        }
        let (a, b) = if m < g { (m, g) } else { (g, m) };
        let valley = s[a..=b].iter().cloned().fold(f64::INFINITY, f64::min);
        let prom = s[m] - valley;
        if prom > MIN_PROMINENCE * s[g] && best.map_or(true, |(p, _)| prom > p) {
            best = Some((prom, m));
        }
    }
    let (_, m) = best?;
    Some(if m < g { (m, g) } else { (g, m) })
}

/// Half-width of the upper peak at the `e^(-1/2)` level, measured on the slope
/// facing the valley.
pub fn estimate_sigma(hist: &HistogramModel) -> Result<f64> {
    let s = &hist.pd_smooth;
    let target = hist.pd_up * (-0.5f64).exp();
    let mut j = hist.up_bin;
    while j > hist.min_bin {
        j -= 1;
        if s[j] <= target {
            // crossing between bins j and j + 1
            let t = (s[j + 1] - target) / (s[j + 1] - s[j]);
            let x = hist.center(j + 1) - t * hist.bin_width;
            let sigma = hist.mu_up - x;
            return if sigma > 0.0 {
                Ok(sigma)
            } else {
                Err(VolumeError::DegeneratePeak)
            };
        }
    }
    Err(VolumeError::DegeneratePeak)
}

/// First location above the valley where the density exceeds `f * pd_min`.
pub fn estimate_threshold(hist: &HistogramModel, f: f64) -> Result<f64> {
    if !(f > 1.0) {
        return Err(VolumeError::InvalidParameter(format!(
            "threshold factor must exceed 1, got {f}"
        )));
    }
    let s = &hist.pd_smooth;
    let target = f * hist.pd_min;
    for j in hist.min_bin + 1..=hist.up_bin {
        if s[j] > target {
            if hist.pd_min == 0.0 {
                // lower edge of the first occupied bin
                return Ok(hist.center(j) - 0.5 * hist.bin_width);
            }
            let t = (target - s[j - 1]) / (s[j] - s[j - 1]);
            return Ok(hist.center(j - 1) + t.clamp(0.0, 1.0) * hist.bin_width);
        }
    }
    Err(VolumeError::ThresholdNotFound)
}

/// `20 log10((mu_up - mu_low) / sigma)`.
pub fn estimate_snr(hist: &HistogramModel) -> Result<f64> {
    if hist.sigma == 0.0 {
        return Err(VolumeError::ZeroSigma);
    }
    Ok(snr_db(hist.mu_up - hist.mu_low, hist.sigma))
}

pub(crate) fn snr_db(separation: f64, sigma: f64) -> f64 {
    20.0 * (separation / sigma).log10()
}
