//! Sign field, active edges/cells, ambiguous facets and crossing offsets.
//!
//! Keys: a grid point is its x-fastest linear index `p`; an edge or a facet is
//! `3 * p + axis` where `p` is its lowest point and `axis` the edge direction
//! (facet normal). Sorting keys gives the canonical (z, y, x, axis) order. A
//! cell is keyed by its lowest corner point.

use rayon::prelude::*;

use super::CodecError;
use crate::par::gather_by_slabs;
use crate::volume::Volume3D;

pub const MAX_PRECISION: u8 = 16;

/// Bit-packed sign of every grid point: `value >= tau`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignField {
    dims: [usize; 3],
    words: Vec<u64>,
}

impl SignField {
    pub fn zeros(dims: [usize; 3]) -> Self {
        let n = dims[0] * dims[1] * dims[2];
        Self {
            dims,
            words: vec![0; n.div_ceil(64)],
        }
    }

    pub fn from_fn<F: Fn(usize) -> bool + Sync>(dims: [usize; 3], f: F) -> Self {
        let n = dims[0] * dims[1] * dims[2];
        let words = (0..n.div_ceil(64))
            .into_par_iter()
            .map(|w| {
                let mut word = 0u64;
                for b in 0..64 {
                    let p = w * 64 + b;
                    if p < n && f(p) {
                        word |= 1 << b;
                    }
                }
                word
            })
            .collect();
        Self { dims, words }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, p: usize) -> bool {
        (self.words[p >> 6] >> (p & 63)) & 1 == 1
    }

    #[inline]
    pub fn get_xyz(&self, x: usize, y: usize, z: usize) -> bool {
        self.get(x + self.dims[0] * (y + self.dims[1] * z))
    }

    #[inline]
    pub fn set(&mut self, p: usize, v: bool) {
        if v {
            self.words[p >> 6] |= 1 << (p & 63);
        } else {
            self.words[p >> 6] &= !(1 << (p & 63));
        }
    }

    /// Sets bits `p0..p1` (exclusive) to one.
    pub fn set_run(&mut self, p0: usize, p1: usize) {
        let mut p = p0;
        while p < p1 {
            let w = p >> 6;
            let lo = p & 63;
            let hi = ((w + 1) << 6).min(p1) - (w << 6);
            let mask = if hi - lo == 64 {
                u64::MAX
            } else {
                ((1u64 << (hi - lo)) - 1) << lo
            };
            self.words[w] |= mask;
            p = (w << 6) + hi;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActiveCell {
    /// Linear index of the cell's lowest corner.
    pub cell: u64,
    /// Corner signs, bit `x + 2y + 4z` for corner offset (x, y, z).
    pub pattern: u8,
}

/// Iso-contour structure of a volume: everything the mesher needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourData {
    pub dims: [usize; 3],
    pub tau: f32,
    /// Bits per crossing offset; 0 until offsets are quantized.
    pub precision: u8,
    pub signs: SignField,
    /// Sorted edge keys of all edges whose endpoint signs differ.
    pub edges: Vec<u64>,
    /// Quantized crossing offset per active edge, measured from the lower point.
    pub offsets: Vec<u16>,
    /// Cells with a non-uniform corner pattern, sorted by cell index.
    pub cells: Vec<ActiveCell>,
    /// Sorted facet keys of facets with a checkerboard sign pattern.
    pub facets: Vec<u64>,
    /// Asymptotic decider bit per ambiguous facet (1 = positive corners connected).
    pub ambiguity: Vec<bool>,
}

#[inline]
pub(crate) fn strides(dims: [usize; 3]) -> [usize; 3] {
    [1, dims[0], dims[0] * dims[1]]
}

#[inline]
pub(crate) fn unravel(dims: [usize; 3], p: usize) -> [usize; 3] {
    [p % dims[0], (p / dims[0]) % dims[1], p / (dims[0] * dims[1])]
}

/// Bilinear saddle test on a facet whose 4 cyclic corner values `v` are
/// checkerboard-signed. Returns 1 iff the saddle value reaches `tau`, i.e. the
/// positive corners are connected across the facet. A vanishing denominator
/// (saddle at infinity) counts as separated.
pub fn asymptotic_decider(v: [f64; 4], tau: f64) -> bool {
    let den = v[0] + v[2] - v[1] - v[3];
    let scale = v.iter().map(|x| x.abs()).sum::<f64>();
    if den.abs() <= 4.0 * f64::EPSILON * scale || den == 0.0 {
        return false;
    }
    (v[0] * v[2] - v[1] * v[3]) / den >= tau
}

/// Point offsets (in linear index units) of the 4 cyclic corners of a facet
/// with normal `axis`.
#[inline]
pub(crate) fn facet_corners(dims: [usize; 3], axis: usize) -> [usize; 4] {
    let s = strides(dims);
    let (u, v) = other_axes(axis);
    [0, s[u], s[u] + s[v], s[v]]
}

/// The two axes orthogonal to `axis`, ascending.
#[inline]
pub(crate) fn other_axes(axis: usize) -> (usize, usize) {
    match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

#[inline]
fn checkerboard(s: [bool; 4]) -> bool {
    s[0] == s[2] && s[1] == s[3] && s[0] != s[1]
}

/// Sign field, active edges and cells, ambiguous facets with decider bits.
/// Offsets stay empty (`precision == 0`) until [`quantize_offsets`].
pub fn build_sign_field(vol: &Volume3D, tau: f64) -> ContourData {
    let tau32 = tau as f32;
    let values = vol.values();
    let dims = vol.dims();
    let (lo, hi) = vol.min_max();
    if !(tau32 > lo && tau32 <= hi) {
        log::warn!("tau {tau} outside the value range ({lo}, {hi}]; contour is empty");
    }
    let signs = SignField::from_fn(dims, |p| values[p] >= tau32);
    let (edges, cells, facets) = active_sets(&signs);
    let ambiguity = facets
        .par_iter()
        .map(|&key| {
            let (p, axis) = ((key / 3) as usize, (key % 3) as usize);
            let c = facet_corners(dims, axis);
            let v = c.map(|o| values[p + o] as f64);
            asymptotic_decider(v, tau32 as f64)
        })
        .collect();
    ContourData {
        dims,
        tau: tau32,
        precision: 0,
        signs,
        edges,
        offsets: Vec::new(),
        cells,
        facets,
        ambiguity,
    }
}

/// Enumerates active edges, active cells and ambiguous facets from signs
/// alone (shared by the encoder and the decoder).
pub(crate) fn active_sets(signs: &SignField) -> (Vec<u64>, Vec<ActiveCell>, Vec<u64>) {
    let dims = signs.dims();
    let [nx, ny, nz] = dims;
    let s = strides(dims);
    let edge_slab = |z: usize, out: Option<&mut [u64]>| -> usize {
        let mut k = 0;
        let mut out = out;
        for y in 0..ny {
            for x in 0..nx {
                let p = x + nx * (y + ny * z);
                let sp = signs.get(p);
                let q = [x, y, z];
                for a in 0..3 {
                    if q[a] + 1 < dims[a] && signs.get(p + s[a]) != sp {
                        if let Some(o) = out.as_deref_mut() {
                            o[k] = 3 * p as u64 + a as u64;
                        }
                        k += 1;
                    }
                }
            }
        }
        k
    };
    let edges = gather_by_slabs(nz, |z| edge_slab(z, None), |z, w| {
        edge_slab(z, Some(w));
    });

    let cell_slabs = nz.saturating_sub(1);
    let corner_offsets: [usize; 8] =
        std::array::from_fn(|c| (c & 1) * s[0] + ((c >> 1) & 1) * s[1] + ((c >> 2) & 1) * s[2]);
    let cell_slab = |z: usize, out: Option<&mut [ActiveCell]>| -> usize {
        let mut k = 0;
        let mut out = out;
        for y in 0..ny.saturating_sub(1) {
            for x in 0..nx.saturating_sub(1) {
                let p = x + nx * (y + ny * z);
                let mut pattern = 0u8;
                for (c, &o) in corner_offsets.iter().enumerate() {
                    pattern |= (signs.get(p + o) as u8) << c;
                }
                if pattern != 0 && pattern != 0xFF {
                    if let Some(o) = out.as_deref_mut() {
                        o[k] = ActiveCell {
                            cell: p as u64,
                            pattern,
                        };
                    }
                    k += 1;
                }
            }
        }
        k
    };
    let cells = gather_by_slabs(cell_slabs, |z| cell_slab(z, None), |z, w| {
        cell_slab(z, Some(w));
    });

    let facet_slab = |z: usize, out: Option<&mut [u64]>| -> usize {
        let mut k = 0;
        let mut out = out;
        for y in 0..ny {
            for x in 0..nx {
                let p = x + nx * (y + ny * z);
                let q = [x, y, z];
                for a in 0..3 {
                    let (u, v) = other_axes(a);
                    if q[u] + 1 >= dims[u] || q[v] + 1 >= dims[v] {
                        continue;
                    }
                    let c = facet_corners(dims, a).map(|o| signs.get(p + o));
                    if checkerboard(c) {
                        if let Some(o) = out.as_deref_mut() {
                            o[k] = 3 * p as u64 + a as u64;
                        }
                        k += 1;
                    }
                }
            }
        }
        k
    };
    let facets = gather_by_slabs(nz, |z| facet_slab(z, None), |z, w| {
        facet_slab(z, Some(w));
    });
    (edges, cells, facets)
}

/// `q = floor(t * 2^N)` clamped to `2^N - 1`, `t = (tau - v0) / (v1 - v0)`.
#[inline]
pub fn quantize_offset(v0: f64, v1: f64, tau: f64, precision: u8) -> u16 {
    let t = (tau - v0) / (v1 - v0);
    let levels = (1u32 << precision) as f64;
    (t * levels).floor().clamp(0.0, levels - 1.0) as u16
}

/// Cell-center reconstruction `(q + 0.5) / 2^N`.
#[inline]
pub fn dequantize_offset(q: u16, precision: u8) -> f64 {
    (q as f64 + 0.5) / (1u32 << precision) as f64
}

/// Fills `contour.offsets` from the volume it was built from.
pub fn quantize_offsets(
    contour: &mut ContourData,
    vol: &Volume3D,
    precision: u8,
) -> Result<(), CodecError> {
    if !(1..=MAX_PRECISION).contains(&precision) {
        return Err(CodecError::Precision(precision));
    }
    if vol.dims() != contour.dims {
        return Err(CodecError::Corrupt("volume dims differ from contour".into()));
    }
    let s = strides(contour.dims);
    let values = vol.values();
    let tau = contour.tau as f64;
    contour.offsets = contour
        .edges
        .par_iter()
        .map(|&key| {
            let (p, a) = ((key / 3) as usize, (key % 3) as usize);
            quantize_offset(values[p] as f64, values[p + s[a]] as f64, tau, precision)
        })
        .collect();
    contour.precision = precision;
    Ok(())
}

impl ContourData {
    /// Position of the index of `key` in the sorted edge list.
    #[inline]
    pub fn edge_index(&self, key: u64) -> Option<usize> {
        self.edges.binary_search(&key).ok()
    }

    #[inline]
    pub fn cell_index(&self, cell: u64) -> Option<usize> {
        self.cells.binary_search_by_key(&cell, |c| c.cell).ok()
    }

    #[inline]
    pub fn facet_bit(&self, key: u64) -> Option<bool> {
        self.facets
            .binary_search(&key)
            .ok()
            .map(|i| self.ambiguity[i])
    }

    /// Crossing point of an active edge in grid coordinates.
    pub fn crossing(&self, edge: usize) -> [f64; 3] {
        let key = self.edges[edge];
        let (p, a) = ((key / 3) as usize, (key % 3) as usize);
        let mut x = unravel(self.dims, p).map(|v| v as f64);
        x[a] += dequantize_offset(self.offsets[edge], self.precision);
        x
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}
