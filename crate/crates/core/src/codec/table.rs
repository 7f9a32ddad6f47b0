//! Static context code table: for each of the 256 parent contexts, a ranking
//! of the 256 child octets. Ranks are coded with Elias gamma over `rank + 1`.

use std::sync::OnceLock;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::contour::SignField;
use super::octree::plan;

pub const TABLE_LEN: usize = 65_536;

static SHIPPED: &[u8; TABLE_LEN] = include_bytes!("../../data/code_table.bin");

#[derive(Clone, PartialEq, Eq)]
pub struct CodeTable {
    /// `ranks[ctx * 256 + octet]`
    ranks: Vec<u8>,
    /// `symbols[ctx * 256 + rank]`
    symbols: Vec<u8>,
    hash: [u8; 16],
}

impl std::fmt::Debug for CodeTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CodeTable")
            .field("hash", &hex16(&self.hash))
            .finish()
    }
}

pub(crate) fn hex16(h: &[u8; 16]) -> String {
    h.iter().map(|b| format!("{b:02x}")).collect()
}

impl CodeTable {
    /// Builds a table from its 65,536 rank bytes. Returns `None` unless every
    /// context row is a permutation of 0..=255.
    pub fn from_ranks(ranks: &[u8]) -> Option<Self> {
        if ranks.len() != TABLE_LEN {
            return None;
        }
        let mut symbols = vec![0u8; TABLE_LEN];
        for ctx in 0..256 {
            let mut seen = [false; 256];
            for oct in 0..256 {
                let r = ranks[ctx * 256 + oct] as usize;
                if seen[r] {
                    return None;
                }
                seen[r] = true;
                symbols[ctx * 256 + r] = oct as u8;
            }
        }
        let digest = Sha256::digest(ranks);
        let mut hash = [0u8; 16];
        hash.copy_from_slice(&digest[..16]);
        Some(Self {
            ranks: ranks.to_vec(),
            symbols,
            hash,
        })
    }

    /// Rank = octet in every context.
    pub fn identity() -> Self {
        let ranks: Vec<u8> = (0..TABLE_LEN).map(|i| (i & 0xFF) as u8).collect();
        Self::from_ranks(&ranks).unwrap()
    }

    /// The table generated from [`default_corpus`] and shipped with the crate.
    pub fn shipped() -> &'static CodeTable {
        static TABLE: OnceLock<CodeTable> = OnceLock::new();
        TABLE.get_or_init(|| CodeTable::from_ranks(SHIPPED).expect("shipped table is valid"))
    }

    #[inline]
    pub fn rank(&self, ctx: u8, octet: u8) -> u8 {
        self.ranks[ctx as usize * 256 + octet as usize]
    }

    #[inline]
    pub fn symbol(&self, ctx: u8, rank: u8) -> u8 {
        self.symbols[ctx as usize * 256 + rank as usize]
    }

    /// First 16 bytes of the SHA-256 of the rank bytes.
    pub fn hash(&self) -> [u8; 16] {
        self.hash
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.ranks
    }
}

/// Counts `(context, octet)` occurrences over the octree codings of `corpus`.
pub fn symbol_counts(corpus: &[SignField]) -> Vec<u64> {
    corpus
        .par_iter()
        .map(|signs| {
            let p = plan(signs);
            let mut counts = vec![0u64; TABLE_LEN];
            counts[p.root as usize] += 1;
            for lp in &p.levels {
                for &(ctx, oct, _) in &lp.symbols {
                    counts[ctx as usize * 256 + oct as usize] += 1;
                }
            }
            counts
        })
        .reduce(
            || vec![0u64; TABLE_LEN],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        )
}

/// Per context, octets ranked by descending corpus frequency, ties by
/// ascending octet value.
pub fn build_code_table(corpus: &[SignField]) -> CodeTable {
    let counts = symbol_counts(corpus);
    let mut ranks = vec![0u8; TABLE_LEN];
    for ctx in 0..256 {
        let row = &counts[ctx * 256..(ctx + 1) * 256];
        let mut order: Vec<usize> = (0..256).collect();
        order.sort_by(|&a, &b| row[b].cmp(&row[a]).then(a.cmp(&b)));
        for (rank, &oct) in order.iter().enumerate() {
            ranks[ctx * 256 + oct] = rank as u8;
        }
    }
    CodeTable::from_ranks(&ranks).unwrap()
}

fn signs_from_fn(dims: [usize; 3], f: impl Fn([f64; 3]) -> bool + Sync) -> SignField {
    SignField::from_fn(dims, |p| {
        let [x, y, z] = super::contour::unravel(dims, p);
        f([x as f64, y as f64, z as f64])
    })
}

/// Training corpus of the shipped table: balls and their complements,
/// ellipsoids, and thresholded low-passed noise, each at 32^3, 64^3 and 128^3.
pub fn default_corpus() -> Vec<SignField> {
    use crate::volume::{generate_phantom, PhantomKind, PhantomSpec};
    let mut out = Vec::new();
    for &n in &[32usize, 64, 128] {
        let dims = [n; 3];
        let c = (n as f64 - 1.0) / 2.0;
        for &frac in &[0.5, 0.9] {
            let r = frac * c;
            let ball = move |p: [f64; 3]| {
                ((p[0] - c).powi(2) + (p[1] - c).powi(2) + (p[2] - c).powi(2)).sqrt() <= r
            };
            out.push(signs_from_fn(dims, ball));
            out.push(signs_from_fn(dims, move |p| !ball(p)));
        }
        let axes = [0.85 * c, 0.6 * c, 0.4 * c];
        let off = [0.31, 0.17, 0.05];
        out.push(signs_from_fn(dims, move |p| {
            (0..3)
                .map(|a| ((p[a] - c - off[a]) / axes[a]).powi(2))
                .sum::<f64>()
                <= 1.0
        }));
        let axes = [0.5 * c, 0.9 * c, 0.7 * c];
        out.push(signs_from_fn(dims, move |p| {
            (0..3)
                .map(|a| ((p[a] - c + off[a]) / axes[a]).powi(2))
                .sum::<f64>()
                > 1.0
        }));
        let spec = PhantomSpec {
            dims,
            kind: PhantomKind::SmoothedNoise {
                passes: n / 8,
                border: 1,
            },
            mu_low: 0.0,
            mu_up: 1.0,
            noise: 0.0,
            seed: n as u64,
        };
        let vol = generate_phantom(&spec).expect("corpus phantom");
        let v = vol.values();
        out.push(SignField::from_fn(dims, |p| v[p] >= 0.5));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    #[ignore = "writes data/code_table.bin"]
    fn regenerate_shipped_table() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/code_table.bin");
        std::fs::write(path, build_code_table(&default_corpus()).as_bytes()).unwrap();
    }

    #[test]
    fn shipped_table_matches_regeneration() {
        let regen = build_code_table(&default_corpus());
        assert!(regen == *CodeTable::shipped(), "data/code_table.bin is stale");
    }

    #[test]
    fn identity_ranks() {
        let t = CodeTable::identity();
        for ctx in [0u8, 17, 255] {
            for oct in [0u8, 1, 200] {
                assert_eq!(t.rank(ctx, oct), oct);
                assert_eq!(t.symbol(ctx, oct), oct);
            }
        }
    }

    #[test]
    fn uniform_corpus_gives_identity() {
        // no observations: all counts tie and the tie-break orders by octet
        assert_eq!(build_code_table(&[]), CodeTable::identity());
    }

    #[test]
    fn rejects_non_permutation() {
        let mut r = CodeTable::identity().as_bytes().to_vec();
        r[5] = 4;
        assert!(CodeTable::from_ranks(&r).is_none());
    }

    #[test]
    fn ranks_follow_frequencies() {
        let n = 32;
        let c = 15.5;
        let ball = signs_from_fn([n; 3], |p| {
            ((p[0] - c).powi(2) + (p[1] - c).powi(2) + (p[2] - c).powi(2)).sqrt() <= 12.0
        });
        let corpus = [ball];
        let counts = symbol_counts(&corpus);
        let t = build_code_table(&corpus);
        for ctx in 0..256usize {
            for r in 1..256usize {
                let a = t.symbol(ctx as u8, (r - 1) as u8) as usize;
                let b = t.symbol(ctx as u8, r as u8) as usize;
                let (ca, cb) = (counts[ctx * 256 + a], counts[ctx * 256 + b]);
                assert!(ca > cb || (ca == cb && a < b));
            }
        }
    }
}
