//! Octree coding of the sign field.
//!
//! The grid is embedded in a virtual cube of `P + 1` points per axis, `P` the
//! smallest power of two `>= max(dims)`; points outside the grid are padding,
//! read as negative and never make a node mixed. Nodes of size `s` are visited
//! coarse to fine in Morton order. A node with non-uniform corners is refined
//! implicitly; nodes with uniform corners are candidates, and the mixed ones
//! among them are listed per level as exceptions. A refined node codes the
//! signs of its lower child cube (points `i*s + (a, b, c)*s/2`, bit
//! `a + 2b + 4c`) with the rank code under the context of its 8 corner signs.
//! Every other point is either a coded point of a neighbour or lies in the
//! half-open region of a uniform node and takes that node's sign.

use rayon::prelude::*;

use super::bits::{BitReader, BitWriter};
use super::contour::SignField;
use super::table::CodeTable;
use super::CodecError;

const EMPTY: u8 = 0;
const HAS_NEG: u8 = 1;
const HAS_POS: u8 = 2;
const MIXED: u8 = HAS_NEG | HAS_POS;

/// Chunk size for parallel symbol coding.
const CHUNK: usize = 4096;

pub(crate) fn virtual_size(dims: [usize; 3]) -> usize {
    dims.iter().copied().max().unwrap_or(1).next_power_of_two()
}

#[inline]
fn sign_or_pad(signs: &SignField, p: [usize; 3]) -> bool {
    let d = signs.dims();
    p[0] < d[0] && p[1] < d[1] && p[2] < d[2] && signs.get_xyz(p[0], p[1], p[2])
}

#[inline]
fn is_real(dims: [usize; 3], p: [usize; 3]) -> bool {
    p[0] < dims[0] && p[1] < dims[1] && p[2] < dims[2]
}

#[inline]
fn corner_offset(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

/// Sign pattern of the 8 points `base + corner * step`.
#[inline]
fn pattern_at(signs: &SignField, base: [usize; 3], step: usize) -> u8 {
    let mut pat = 0u8;
    for c in 0..8 {
        let o = corner_offset(c);
        let p = [base[0] + o[0] * step, base[1] + o[1] * step, base[2] + o[2] * step];
        pat |= (sign_or_pad(signs, p) as u8) << c;
    }
    pat
}

/// Per-level node states (`EMPTY`, `HAS_NEG`, `HAS_POS`, `MIXED`) over the
/// closed node regions, for node sizes `P, P/2, ..., 2`.
struct Pyramid {
    /// `(node size, node counts per axis, states)` from coarse to fine.
    levels: Vec<(usize, [usize; 3], Vec<u8>)>,
}

impl Pyramid {
    fn build(signs: &SignField, big_p: usize) -> Self {
        let dims = signs.dims();
        let counts_for = |s: usize| dims.map(|n| (n - 1) / s + 1);
        let mut levels = Vec::new();
        if big_p < 2 {
            return Self { levels };
        }
        // finest level (s = 2) straight from the points
        let c2 = counts_for(2);
        let mut states = vec![0u8; c2[0] * c2[1] * c2[2]];
        states
            .par_chunks_mut(c2[0] * c2[1])
            .enumerate()
            .for_each(|(k, slab)| {
                for j in 0..c2[1] {
                    for i in 0..c2[0] {
                        let mut st = EMPTY;
                        for dz in 0..3 {
                            for dy in 0..3 {
                                for dx in 0..3 {
                                    let p = [2 * i + dx, 2 * j + dy, 2 * k + dz];
                                    if is_real(dims, p) {
                                        st |= if signs.get_xyz(p[0], p[1], p[2]) {
                                            HAS_POS
                                        } else {
                                            HAS_NEG
                                        };
                                    }
                                }
                            }
                        }
                        slab[i + c2[0] * j] = st;
                    }
                }
            });
        levels.push((2, c2, states));
        let mut s = 4;
        while s <= big_p {
            let (_, fc, fine) = levels.last().unwrap();
            let (fc, fine) = (*fc, fine);
            let c = counts_for(s);
            let mut states = vec![0u8; c[0] * c[1] * c[2]];
            states
                .par_chunks_mut(c[0] * c[1])
                .enumerate()
                .for_each(|(k, slab)| {
                    for j in 0..c[1] {
                        for i in 0..c[0] {
                            let mut st = EMPTY;
                            for ch in 0..8 {
                                let o = corner_offset(ch);
                                let q = [2 * i + o[0], 2 * j + o[1], 2 * k + o[2]];
                                if q[0] < fc[0] && q[1] < fc[1] && q[2] < fc[2] {
                                    st |= fine[q[0] + fc[0] * (q[1] + fc[1] * q[2])];
                                }
                            }
                            slab[i + c[0] * j] = st;
                        }
                    }
                });
            levels.push((s, c, states));
            s *= 2;
        }
        levels.reverse();
        Self { levels }
    }

    fn state(&self, level: usize, node: [u32; 3]) -> u8 {
        let (_, c, st) = &self.levels[level];
        let n = node.map(|v| v as usize);
        if n[0] < c[0] && n[1] < c[1] && n[2] < c[2] {
            st[n[0] + c[0] * (n[1] + c[1] * n[2])]
        } else {
            EMPTY
        }
    }
}

/// Everything the coder emits, before entropy coding.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct OctreePlan {
    pub root: u8,
    pub levels: Vec<LevelPlan>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct LevelPlan {
    pub candidates: u32,
    /// Indices into the candidate list, ascending.
    pub exceptions: Vec<u32>,
    /// `(context, octet, known mask)` per refined node in Morton order.
    pub symbols: Vec<(u8, u8, u8)>,
}

/// Children of `node` whose lowest point is inside the grid, Morton order.
#[inline]
fn children(dims: [usize; 3], node: [u32; 3], child_size: usize) -> impl Iterator<Item = [u32; 3]> {
    (0..8).filter_map(move |c| {
        let o = corner_offset(c);
        let ch = [
            2 * node[0] + o[0] as u32,
            2 * node[1] + o[1] as u32,
            2 * node[2] + o[2] as u32,
        ];
        let low = ch.map(|v| v as usize * child_size);
        is_real(dims, low).then_some(ch)
    })
}

/// Octet bits the decoder can infer: the inherited lowest point, padding
/// points, and points inside closed regions of uniform nodes.
#[inline]
fn known_mask(known: &SignField, base: [usize; 3], step: usize) -> u8 {
    let dims = known.dims();
    let mut mask = 1u8;
    for c in 1..8 {
        let o = corner_offset(c);
        let p = [base[0] + o[0] * step, base[1] + o[1] * step, base[2] + o[2] * step];
        if !is_real(dims, p) || known.get_xyz(p[0], p[1], p[2]) {
            mask |= 1 << c;
        }
    }
    mask
}

/// Marks the closed region `[lo, lo + size]` (clipped) as known.
fn mark_closed(known: &mut SignField, lo: [usize; 3], size: usize) {
    let dims = known.dims();
    let hi = [0, 1, 2].map(|a| (lo[a] + size + 1).min(dims[a]));
    for z in lo[2]..hi[2] {
        for y in lo[1]..hi[1] {
            let row = dims[0] * (y + dims[1] * z);
            known.set_run(row + lo[0], row + hi[0]);
        }
    }
}

pub(crate) fn plan(signs: &SignField) -> OctreePlan {
    let dims = signs.dims();
    let big_p = virtual_size(dims);
    let root = pattern_at(signs, [0, 0, 0], big_p);
    let mut out = OctreePlan {
        root,
        levels: Vec::new(),
    };
    if big_p < 2 {
        return out;
    }
    let pyramid = Pyramid::build(signs, big_p);
    let mut known = SignField::zeros(dims);
    let mut active: Vec<[u32; 3]> = vec![[0, 0, 0]];
    for (level, &(s, _, _)) in pyramid.levels.iter().enumerate() {
        // (corner pattern, refined?, exception?)
        let info: Vec<(u8, bool, bool)> = active
            .par_iter()
            .map(|&n| {
                let base = n.map(|v| v as usize * s);
                let pat = pattern_at(signs, base, s);
                if pat != 0 && pat != 0xFF {
                    (pat, true, false)
                } else {
                    let mixed = pyramid.state(level, n) == MIXED;
                    (pat, mixed, mixed)
                }
            })
            .collect();
        let mut lp = LevelPlan::default();
        let mut cand = 0u32;
        for (n, &(pat, refined, exc)) in active.iter().zip(&info) {
            if pat == 0 || pat == 0xFF {
                if exc {
                    lp.exceptions.push(cand);
                }
                cand += 1;
            }
            if !refined {
                mark_closed(&mut known, n.map(|v| v as usize * s), s);
            }
        }
        lp.candidates = cand;
        let refined: Vec<([u32; 3], u8)> = active
            .iter()
            .zip(&info)
            .filter(|(_, i)| i.1)
            .map(|(n, i)| (*n, i.0))
            .collect();
        lp.symbols = refined
            .par_iter()
            .map(|&(n, ctx)| {
                let base = n.map(|v| v as usize * s);
                let oct = pattern_at(signs, base, s / 2);
                (ctx, oct, known_mask(&known, base, s / 2))
            })
            .collect();
        out.levels.push(lp);
        if s > 2 {
            active = refined
                .par_iter()
                .flat_map_iter(|&(n, _)| children(dims, n, s / 2))
                .collect();
        }
    }
    out
}

/// Rank of `octet` among the octets agreeing with it on `mask`, and the size
/// of that set.
#[inline]
fn filtered_rank(table: &CodeTable, ctx: u8, octet: u8, mask: u8) -> (u32, u32) {
    let target = octet & mask;
    let r = table.rank(ctx, octet);
    let mut below = 0;
    let mut total = 0;
    for k in 0..=255u8 {
        let sym = table.symbol(ctx, k);
        if sym & mask == target {
            total += 1;
            if k < r {
                below += 1;
            }
        }
    }
    (below, total)
}

/// Entropy-codes a plan: root symbol, then per level the exception block (only
/// when there are candidates) followed by the octet ranks. An octet's rank is
/// taken among the octets consistent with the known bits; fully known octets
/// are skipped. Ranks are coded in chunks of `CHUNK` refined nodes as
/// `gamma(zeros + 1)` for each run of zero ranks, then `gamma(rank)` for the
/// non-zero rank ending it (absent when the run reaches the chunk end).
pub(crate) fn write_plan(plan: &OctreePlan, table: &CodeTable) -> BitWriter {
    let mut w = BitWriter::new();
    w.write_gamma(table.rank(0, plan.root) as u64 + 1);
    for lp in &plan.levels {
        if lp.candidates > 0 {
            w.write_gamma(lp.exceptions.len() as u64 + 1);
            let mut prev: i64 = -1;
            for &e in &lp.exceptions {
                w.write_gamma((e as i64 - prev) as u64);
                prev = e as i64;
            }
        }
        let parts: Vec<BitWriter> = lp
            .symbols
            .par_chunks(CHUNK)
            .map(|chunk| {
                let ranks: Vec<u32> = chunk
                    .iter()
                    .filter(|s| s.2 != 0xFF)
                    .map(|&(ctx, oct, mask)| filtered_rank(table, ctx, oct, mask).0)
                    .collect();
                let mut cw = BitWriter::new();
                let mut i = 0;
                while i < ranks.len() {
                    let j = ranks[i..].iter().position(|&r| r != 0).map_or(ranks.len(), |k| i + k);
                    cw.write_gamma((j - i) as u64 + 1);
                    if j < ranks.len() {
                        cw.write_gamma(ranks[j] as u64);
                    }
                    i = j + 1;
                }
                cw
            })
            .collect();
        for part in &parts {
            w.append(part);
        }
    }
    w
}

pub(crate) fn encode_topology(signs: &SignField, table: &CodeTable) -> Vec<u8> {
    write_plan(&plan(signs), table).into_bytes()
}

fn read_root(r: &mut BitReader, table: &CodeTable) -> Result<u8, CodecError> {
    let v = r.read_gamma()?;
    if v > 256 {
        return Err(CodecError::Corrupt(format!("rank {} out of range", v - 1)));
    }
    Ok(table.symbol(0, (v - 1) as u8))
}

/// Decoder side of the zero-run rank code within one chunk.
#[derive(Default)]
struct RunState {
    /// Zero ranks left in the current run; `None` before a run header.
    zeros: Option<u64>,
}

impl RunState {
    fn next_rank(&mut self, r: &mut BitReader) -> Result<u64, CodecError> {
        let z = match self.zeros {
            Some(z) => z,
            None => r.read_gamma()? - 1,
        };
        if z > 0 {
            self.zeros = Some(z - 1);
            Ok(0)
        } else {
            self.zeros = None;
            r.read_gamma()
        }
    }
}

/// Reads an octet whose bits under `mask` equal those of `known_bits`.
fn read_octet(
    r: &mut BitReader,
    run: &mut RunState,
    table: &CodeTable,
    ctx: u8,
    mask: u8,
    known_bits: u8,
) -> Result<u8, CodecError> {
    if mask == 0xFF {
        return Ok(known_bits);
    }
    let v = run.next_rank(r)?;
    let mut seen = 0u64;
    for k in 0..=255u8 {
        let sym = table.symbol(ctx, k);
        if sym & mask == known_bits & mask {
            if seen == v {
                return Ok(sym);
            }
            seen += 1;
        }
    }
    Err(CodecError::Corrupt(format!("rank {v} out of range")))
}

/// Writes the 8 points `base + corner * step` from `pat`, rejecting set bits on
/// padding points.
fn store_pattern(
    signs: &mut SignField,
    base: [usize; 3],
    step: usize,
    pat: u8,
) -> Result<(), CodecError> {
    let dims = signs.dims();
    for c in 0..8 {
        let o = corner_offset(c);
        let p = [base[0] + o[0] * step, base[1] + o[1] * step, base[2] + o[2] * step];
        let bit = (pat >> c) & 1 == 1;
        if is_real(dims, p) {
            if bit {
                signs.set(p[0] + dims[0] * (p[1] + dims[1] * p[2]), true);
            }
        } else if bit {
            return Err(CodecError::Corrupt("positive sign on a padding point".into()));
        }
    }
    Ok(())
}

fn fill_region(signs: &mut SignField, lo: [usize; 3], size: usize) {
    let dims = signs.dims();
    let hi = [0, 1, 2].map(|a| (lo[a] + size).min(dims[a]));
    for z in lo[2]..hi[2] {
        for y in lo[1]..hi[1] {
            let row = dims[0] * (y + dims[1] * z);
            signs.set_run(row + lo[0], row + hi[0]);
        }
    }
}

pub(crate) fn decode_topology(
    bytes: &[u8],
    dims: [usize; 3],
    table: &CodeTable,
) -> Result<SignField, CodecError> {
    let mut signs = SignField::zeros(dims);
    let mut known = SignField::zeros(dims);
    let mut r = BitReader::new(bytes);
    let big_p = virtual_size(dims);
    let root = read_root(&mut r, table)?;
    store_pattern(&mut signs, [0, 0, 0], big_p, root)?;
    if big_p < 2 {
        return Ok(signs);
    }
    let mut active: Vec<[u32; 3]> = vec![[0, 0, 0]];
    let mut s = big_p;
    while s >= 2 {
        let pats: Vec<u8> = active
            .iter()
            .map(|n| pattern_at(&signs, n.map(|v| v as usize * s), s))
            .collect();
        let candidates: Vec<usize> = (0..active.len())
            .filter(|&i| pats[i] == 0 || pats[i] == 0xFF)
            .collect();
        let mut refined_flag: Vec<bool> = pats.iter().map(|&p| p != 0 && p != 0xFF).collect();
        if !candidates.is_empty() {
            let count = r.read_gamma()? - 1;
            if count > candidates.len() as u64 {
                return Err(CodecError::Corrupt("exception count exceeds candidates".into()));
            }
            let mut idx: i64 = -1;
            for _ in 0..count {
                idx += r.read_gamma()? as i64;
                let c = *candidates
                    .get(idx as usize)
                    .ok_or_else(|| CodecError::Corrupt("exception index out of range".into()))?;
                refined_flag[c] = true;
            }
        }
        // uniform nodes take their sign over the closed region
        for &c in &candidates {
            if !refined_flag[c] {
                let lo = active[c].map(|v| v as usize * s);
                if pats[c] == 0xFF {
                    fill_region(&mut signs, lo, s + 1);
                }
                mark_closed(&mut known, lo, s);
            }
        }
        let mut next = Vec::new();
        let mut run = RunState::default();
        let mut k = 0usize;
        for (i, n) in active.iter().enumerate() {
            if !refined_flag[i] {
                continue;
            }
            if k % CHUNK == 0 {
                run = RunState::default();
            }
            k += 1;
            let base = n.map(|v| v as usize * s);
            let mask = known_mask(&known, base, s / 2);
            let have = pattern_at(&signs, base, s / 2);
            let oct = read_octet(&mut r, &mut run, table, pats[i], mask, have)?;
            store_pattern(&mut signs, base, s / 2, oct)?;
            if s > 2 {
                next.extend(children(dims, *n, s / 2));
            }
        }
        active = next;
        s /= 2;
    }
    Ok(signs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(dims: [usize; 3], f: impl Fn(usize, usize, usize) -> bool + Sync) -> SignField {
        SignField::from_fn(dims, |p| {
            let [x, y, z] = super::super::contour::unravel(dims, p);
            f(x, y, z)
        })
    }

    fn round_trip(s: &SignField) -> usize {
        let t = CodeTable::identity();
        let bytes = encode_topology(s, &t);
        let back = decode_topology(&bytes, s.dims(), &t).unwrap();
        assert_eq!(&back, s);
        bytes.len()
    }

    #[test]
    fn empty_field_is_one_byte() {
        let s = SignField::zeros([16, 16, 16]);
        assert_eq!(round_trip(&s), 1);
    }

    #[test]
    fn full_and_single_points() {
        round_trip(&field([7, 5, 9], |_, _, _| true));
        round_trip(&field([1, 1, 1], |_, _, _| true));
        round_trip(&field([2, 2, 2], |x, _, _| x == 1));
        for (x, y, z) in [(0, 0, 0), (3, 3, 3), (4, 2, 1), (8, 8, 8)] {
            round_trip(&field([9, 9, 9], |a, b, c| (a, b, c) == (x, y, z)));
            round_trip(&field([9, 9, 9], |a, b, c| (a, b, c) != (x, y, z)));
        }
    }

    #[test]
    fn odd_shapes() {
        round_trip(&field([17, 3, 5], |x, y, z| (x * 7 + y * 3 + z) % 5 == 0));
        round_trip(&field([33, 1, 2], |x, _, z| x > 16 || z == 1));
    }

    #[test]
    fn corrupt_stream_is_rejected() {
        let s = field([8, 8, 8], |x, y, z| x + y + z < 9);
        let t = CodeTable::identity();
        let bytes = encode_topology(&s, &t);
        let cut = &bytes[..bytes.len() / 2];
        assert!(decode_topology(cut, s.dims(), &t).is_err());
    }
}
