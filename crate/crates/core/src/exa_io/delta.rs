//! DPOS / DNRM sections: quantized per-vertex deltas in selector words.
//!
//! ```text
//! word bits u8 | components u8 | vertex count u32 | block u32 | step f64
//! word count u32 | words
//! ```
//! Values are vertex-major (`x y z` per vertex). Vertices are packed in blocks
//! of `block`; words never span blocks, so blocks pack independently.

use rayon::prelude::*;

use super::simple8b::{pack, unpack, unzigzag, zigzag, Word128, Word64, WordKind};
use super::ExaIoError;
use crate::mesh::{TriMesh, Vec3, XQuadMesh};

/// Default position step in grid units.
pub const Q_POS: f64 = 1.0 / 128.0;
/// Default normal step per component.
pub const Q_NRM: f64 = 1.0 / 512.0;

/// Vertices per independently packed block.
pub const DELTA_BLOCK: u32 = 4096;

const HEADER_LEN: usize = 1 + 1 + 4 + 4 + 8 + 4;

/// Per-vertex positions and normals, indexed by vertex id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VertexGeometry {
    pub positions: Vec<Vec3>,
    pub normals: Vec<Vec3>,
}

impl From<&XQuadMesh> for VertexGeometry {
    fn from(m: &XQuadMesh) -> Self {
        Self {
            positions: m.positions.clone(),
            normals: m.vertex_normals.clone(),
        }
    }
}

impl From<&TriMesh> for VertexGeometry {
    fn from(m: &TriMesh) -> Self {
        Self {
            positions: m.positions.clone(),
            normals: m.normals.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSection {
    /// 64 (positions) or 128 (normals).
    pub word_bits: u8,
    pub vertex_count: u32,
    pub block: u32,
    pub step: f64,
    pub word_count: u32,
    pub words: Vec<u8>,
}

impl DeltaSection {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.words.len());
        out.push(self.word_bits);
        out.push(3);
        out.extend_from_slice(&self.vertex_count.to_le_bytes());
        out.extend_from_slice(&self.block.to_le_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&self.word_count.to_le_bytes());
        out.extend_from_slice(&self.words);
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, ExaIoError> {
        if b.len() < HEADER_LEN {
            return Err(ExaIoError::Truncated);
        }
        let word_bits = b[0];
        if word_bits != 64 && word_bits != 128 {
            return Err(ExaIoError::Corrupt(format!("word size {word_bits}")));
        }
        if b[1] != 3 {
            return Err(ExaIoError::Corrupt(format!("{} components", b[1])));
        }
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let vertex_count = u32_at(2);
        let block = u32_at(6);
        let step = f64::from_le_bytes(b[10..18].try_into().unwrap());
        let word_count = u32_at(18);
        if block == 0 || !(step > 0.0 && step.is_finite()) {
            return Err(ExaIoError::Corrupt("bad block size or step".into()));
        }
        let len = word_count as usize * (word_bits as usize / 8);
        let words = b
            .get(HEADER_LEN..HEADER_LEN + len)
            .ok_or(ExaIoError::Truncated)?
            .to_vec();
        if b.len() != HEADER_LEN + len {
            return Err(ExaIoError::Corrupt("trailing bytes".into()));
        }
        Ok(Self {
            word_bits,
            vertex_count,
            block,
            step,
            word_count,
            words,
        })
    }

    /// Section size in bits per vertex, header included.
    pub fn bits_per_vertex(&self) -> f64 {
        if self.vertex_count == 0 {
            return 0.0;
        }
        ((HEADER_LEN + self.words.len()) * 8) as f64 / self.vertex_count as f64
    }
}

fn quantize(d: f64, step: f64, limit_bits: u32) -> Result<u64, ExaIoError> {
    let q = (d / step).round();
    let limit = (1u64 << (limit_bits - 1)) as f64;
    if !q.is_finite() || q.abs() >= limit {
        return Err(ExaIoError::Overflow(format!("delta {d} at step {step}")));
    }
    Ok(zigzag(q as i64))
}

fn encode<K: WordKind + Sync>(
    initial: &[Vec3],
    target: &[Vec3],
    step: f64,
    word_bits: u8,
    code_bits: u32,
) -> Result<DeltaSection, ExaIoError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(ExaIoError::Parameter(format!("quantization step {step}")));
    }
    let n = initial.len();
    if n > u32::MAX as usize {
        return Err(ExaIoError::Parameter("too many vertices".into()));
    }
    let blocks: Vec<(Vec<u8>, usize)> = (0..n.div_ceil(DELTA_BLOCK as usize))
        .into_par_iter()
        .map(|b| {
            let lo = b * DELTA_BLOCK as usize;
            let hi = (lo + DELTA_BLOCK as usize).min(n);
            let mut codes = Vec::with_capacity(3 * (hi - lo));
            for v in lo..hi {
                let d = target[v] - initial[v];
                for c in 0..3 {
                    codes.push(quantize(d[c], step, code_bits)?);
                }
            }
            let mut out = Vec::new();
            let words = pack::<K>(&codes, &mut out)?;
            Ok((out, words))
        })
        .collect::<Result<_, ExaIoError>>()?;
    let word_count: usize = blocks.iter().map(|b| b.1).sum();
    let mut words = Vec::with_capacity(blocks.iter().map(|b| b.0.len()).sum());
    for (bytes, _) in blocks {
        words.extend_from_slice(&bytes);
    }
    Ok(DeltaSection {
        word_bits,
        vertex_count: n as u32,
        block: DELTA_BLOCK,
        step,
        word_count: u32::try_from(word_count)
            .map_err(|_| ExaIoError::Overflow("word count".into()))?,
        words,
    })
}

fn decode<K: WordKind>(initial: &[Vec3], s: &DeltaSection) -> Result<Vec<Vec3>, ExaIoError> {
    if s.vertex_count as usize != initial.len() {
        return Err(ExaIoError::CountMismatch {
            expected: initial.len(),
            found: s.vertex_count as usize,
        });
    }
    if s.word_bits as usize != 8 * K::BYTES {
        return Err(ExaIoError::Corrupt(format!("expected {}-bit words", 8 * K::BYTES)));
    }
    let n = initial.len();
    let mut out = Vec::with_capacity(n);
    let mut pos = 0;
    let block = s.block as usize;
    for lo in (0..n).step_by(block.max(1)) {
        let hi = (lo + block).min(n);
        let (codes, used) = unpack::<K>(&s.words[pos..], 3 * (hi - lo))?;
        pos += used;
        for (v, c) in (lo..hi).zip(codes.chunks_exact(3)) {
            let d = Vec3::new(
                unzigzag(c[0]) as f64,
                unzigzag(c[1]) as f64,
                unzigzag(c[2]) as f64,
            );
            out.push(initial[v] + d * s.step);
        }
    }
    if pos != s.words.len() {
        return Err(ExaIoError::Corrupt("unused words".into()));
    }
    Ok(out)
}

/// Quantized position (64-bit words) and normal (128-bit words) deltas from
/// `initial` to `target`.
pub fn encode_vertex_deltas(
    initial: &VertexGeometry,
    target: &VertexGeometry,
    q_pos: f64,
    q_nrm: f64,
) -> Result<(DeltaSection, DeltaSection), ExaIoError> {
    let n = initial.positions.len();
    for len in [
        initial.normals.len(),
        target.positions.len(),
        target.normals.len(),
    ] {
        if len != n {
            return Err(ExaIoError::CountMismatch {
                expected: n,
                found: len,
            });
        }
    }
    let pos = encode::<Word64>(&initial.positions, &target.positions, q_pos, 64, 60)?;
    let nrm = encode::<Word128>(&initial.normals, &target.normals, q_nrm, 128, 40)?;
    Ok((pos, nrm))
}

/// Applies decoded deltas to `initial`; normals are renormalized.
pub fn decode_vertex_deltas(
    initial: &VertexGeometry,
    pos: &DeltaSection,
    nrm: &DeltaSection,
) -> Result<VertexGeometry, ExaIoError> {
    let positions = decode::<Word64>(&initial.positions, pos)?;
    let normals = decode::<Word128>(&initial.normals, nrm)?
        .into_iter()
        .map(|n| n.try_normalize(0.0).unwrap_or(n))
        .collect();
    Ok(VertexGeometry { positions, normals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_geometry(n: usize, seed: u64) -> VertexGeometry {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = || Vec3::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
        let positions = (0..n).map(|_| v()).collect();
        let normals = (0..n).map(|_| v().normalize()).collect();
        VertexGeometry { positions, normals }
    }

    #[test]
    fn unchanged_geometry_packs_to_zero_runs() {
        let g = random_geometry(1000, 1);
        let (p, n) = encode_vertex_deltas(&g, &g, Q_POS, Q_NRM).unwrap();
        // 3000 zero codes: ceil(3000 / 240) words per section
        assert_eq!(p.word_count, 13);
        assert_eq!(n.word_count, 13);
        let back = decode_vertex_deltas(&g, &p, &n).unwrap();
        assert_eq!(back.positions, g.positions);
    }

    #[test]
    fn mismatched_counts_fail() {
        let a = random_geometry(10, 1);
        let b = random_geometry(11, 2);
        assert!(encode_vertex_deltas(&a, &b, Q_POS, Q_NRM).is_err());
        let (p, n) = encode_vertex_deltas(&a, &a, Q_POS, Q_NRM).unwrap();
        assert!(matches!(decode_vertex_deltas(&b, &p, &n), Err(ExaIoError::CountMismatch { .. })));
    }

    #[test]
    fn corrupted_selector_is_an_error() {
        let a = random_geometry(300, 3);
        let mut b = a.clone();
        for p in &mut b.positions {
            p.x += 0.3;
        }
        let (p, n) = encode_vertex_deltas(&a, &b, Q_POS, Q_NRM).unwrap();
        let mut bytes = p.to_bytes();
        // top nibble of the first word's last byte is its selector
        bytes[HEADER_LEN + 7] |= 0xF0;
        let bad = DeltaSection::from_bytes(&bytes).unwrap();
        assert!(decode_vertex_deltas(&a, &bad, &n).is_err());
        let bytes = n.to_bytes();
        assert!(DeltaSection::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn section_bytes_round_trip() {
        let a = random_geometry(5000, 4);
        let b = random_geometry(5000, 5);
        let (p, n) = encode_vertex_deltas(&a, &b, Q_POS, Q_NRM).unwrap();
        assert_eq!(DeltaSection::from_bytes(&p.to_bytes()).unwrap(), p);
        assert_eq!(DeltaSection::from_bytes(&n.to_bytes()).unwrap(), n);
    }

    proptest! {
        #[test]
        fn deltas_round_trip_on_the_grid(
            seed in any::<u64>(),
            n in 1usize..9000,
            k in prop::collection::vec(-128i64..=128, 6),
        ) {
            let a = random_geometry(n, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let mut b = a.clone();
            for v in 0..n {
                let step = |r: &mut ChaCha8Rng, i: usize| (r.gen_range(-128i64..=128) + k[i]) as f64;
                let dp = Vec3::new(step(&mut rng, 0), step(&mut rng, 1), step(&mut rng, 2)) * Q_POS;
                let dn = Vec3::new(step(&mut rng, 3), step(&mut rng, 4), step(&mut rng, 5)) * Q_NRM;
                b.positions[v] = a.positions[v] + dp;
                b.normals[v] = a.normals[v] + dn;
            }
            let (p, q) = encode_vertex_deltas(&a, &b, Q_POS, Q_NRM).unwrap();
            let back = decode_vertex_deltas(&a, &p, &q).unwrap();
            for v in 0..n {
                prop_assert!((back.positions[v] - b.positions[v]).abs().max() <= 1e-9);
                let expect = b.normals[v].normalize();
                prop_assert!((back.normals[v] - expect).abs().max() <= 1e-9);
            }
        }
    }
}
