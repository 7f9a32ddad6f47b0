//! Selector-prefixed word packing of zig-zagged integers.
//!
//! A 64-bit word is a 4-bit selector (top bits) and 60 payload bits holding
//! equal-width codes from the classic ladder. A 128-bit word is an 8-bit
//! selector and 120 payload bits with any width from 0 to 40. Width 0 words
//! carry a run of zeros. Codes are stored from the most significant payload
//! bit down.

use super::ExaIoError;

/// Code widths of 64-bit words, indexed by selector.
pub const LADDER_64: [u32; 15] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 12, 15, 20, 30, 60];

/// Largest code width of 128-bit words.
pub const MAX_WIDTH_128: u32 = 40;

/// Values carried by a width-0 word.
const ZERO_RUN: usize = 240;

#[inline]
pub fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

#[inline]
pub fn unzigzag(u: u64) -> i64 {
    ((u >> 1) as i64) ^ -((u & 1) as i64)
}

/// Word geometry: selector bits, payload bits, selector to width.
pub trait WordKind {
    const SELECTOR_BITS: u32;
    const PAYLOAD_BITS: u32;
    const BYTES: usize;
    fn width(selector: u32) -> Option<u32>;
    fn selectors() -> &'static [u32];
}

pub struct Word64;
pub struct Word128;

const SEL_64: [u32; 15] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14];
const SEL_128: [u32; 41] = {
    let mut s = [0u32; 41];
    let mut i = 0;
    while i < 41 {
        s[i] = i as u32;
        i += 1;
    }
    s
};

impl WordKind for Word64 {
    const SELECTOR_BITS: u32 = 4;
    const PAYLOAD_BITS: u32 = 60;
    const BYTES: usize = 8;
    fn width(selector: u32) -> Option<u32> {
        LADDER_64.get(selector as usize).copied()
    }
    fn selectors() -> &'static [u32] {
        &SEL_64
    }
}

impl WordKind for Word128 {
    const SELECTOR_BITS: u32 = 8;
    const PAYLOAD_BITS: u32 = 120;
    const BYTES: usize = 16;
    fn width(selector: u32) -> Option<u32> {
        (selector <= MAX_WIDTH_128).then_some(selector)
    }
    fn selectors() -> &'static [u32] {
        &SEL_128
    }
}

#[inline]
fn capacity<K: WordKind>(width: u32) -> usize {
    if width == 0 {
        ZERO_RUN
    } else {
        (K::PAYLOAD_BITS / width) as usize
    }
}

#[inline]
fn bit_width(v: u64) -> u32 {
    64 - v.leading_zeros()
}

/// Largest code width representable by this word kind.
pub fn max_width<K: WordKind>() -> u32 {
    K::selectors()
        .iter()
        .filter_map(|&s| K::width(s))
        .max()
        .unwrap_or(0)
}

/// Packs `values` into little-endian words appended to `out`; returns the
/// number of words. The last word is zero padded.
pub fn pack<K: WordKind>(values: &[u64], out: &mut Vec<u8>) -> Result<usize, ExaIoError> {
    let mut i = 0;
    let mut words = 0;
    while i < values.len() {
        let rest = &values[i..];
        let mut chosen = None;
        for &sel in K::selectors() {
            let w = K::width(sel).unwrap();
            let n = capacity::<K>(w).min(rest.len());
            if rest[..n].iter().all(|&v| bit_width(v) <= w) {
                chosen = Some((sel, w, n));
                break;
            }
        }
        let (sel, w, n) = chosen.ok_or_else(|| {
            let v = rest.iter().copied().max().unwrap_or(0);
            ExaIoError::Overflow(format!("code {v} needs more than {} bits", max_width::<K>()))
        })?;
        let mut word: u128 = (sel as u128) << K::PAYLOAD_BITS;
        if w > 0 {
            for (k, &v) in rest[..n].iter().enumerate() {
                word |= (v as u128) << (K::PAYLOAD_BITS - (k as u32 + 1) * w);
            }
        }
        out.extend_from_slice(&word.to_le_bytes()[..K::BYTES]);
        i += n;
        words += 1;
    }
    Ok(words)
}

/// Unpacks exactly `count` values from the front of `bytes`; returns them and
/// the number of bytes consumed. Padding codes must be zero.
pub fn unpack<K: WordKind>(bytes: &[u8], count: usize) -> Result<(Vec<u64>, usize), ExaIoError> {
    let mut out = Vec::with_capacity(count);
    let mut pos = 0;
    while out.len() < count {
        let chunk = bytes.get(pos..pos + K::BYTES).ok_or(ExaIoError::Truncated)?;
        let mut buf = [0u8; 16];
        buf[..K::BYTES].copy_from_slice(chunk);
        let word = u128::from_le_bytes(buf);
        let sel = (word >> K::PAYLOAD_BITS) as u32;
        let w = K::width(sel).ok_or(ExaIoError::Selector(sel))?;
        let cap = capacity::<K>(w);
        let take = cap.min(count - out.len());
        if w > 0 {
            let mask = (1u128 << w) - 1;
            for k in 0..cap {
                let v = (word >> (K::PAYLOAD_BITS - (k as u32 + 1) * w)) & mask;
                if k < take {
                    out.push(v as u64);
                } else if v != 0 {
                    return Err(ExaIoError::Corrupt("non-zero padding".into()));
                }
            }
        } else {
            if word & ((1u128 << K::PAYLOAD_BITS) - 1) != 0 {
                return Err(ExaIoError::Corrupt("payload in a zero-run word".into()));
            }
            out.resize(out.len() + take, 0);
        }
        pos += K::BYTES;
    }
    Ok((out, pos))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zigzag_small_values() {
        let got: Vec<u64> = [0i64, -1, 1, -2, 2].iter().map(|&v| zigzag(v)).collect();
        assert_eq!(got, [0, 1, 2, 3, 4]);
        for v in [i64::MIN, i64::MAX, -12345, 999] {
            assert_eq!(unzigzag(zigzag(v)), v);
        }
    }

    #[test]
    fn zeros_pack_into_runs() {
        let mut out = Vec::new();
        assert_eq!(pack::<Word64>(&[0; 480], &mut out).unwrap(), 2);
        assert_eq!(pack::<Word128>(&[0; 241], &mut out).unwrap(), 2);
        assert_eq!(out.len(), 2 * 8 + 2 * 16);
    }

    #[test]
    fn widths_follow_the_ladder() {
        let mut out = Vec::new();
        // 9 needs 4 bits: 15 codes per word
        pack::<Word64>(&[9; 15], &mut out).unwrap();
        assert_eq!(out.len(), 8);
        assert_eq!(out[7] >> 4, 4);
        let mut out = Vec::new();
        pack::<Word128>(&[(1 << 40) - 1; 3], &mut out).unwrap();
        assert_eq!(out.len(), 16);
        assert_eq!(out[15], 40);
    }

    #[test]
    fn oversized_codes_are_rejected() {
        let mut out = Vec::new();
        assert!(pack::<Word64>(&[1 << 60], &mut out).is_err());
        assert!(pack::<Word128>(&[1 << 40], &mut out).is_err());
    }

    #[test]
    fn bad_selector_and_truncation() {
        let mut word = [0u8; 8];
        word[7] = 0xF0;
        assert!(matches!(unpack::<Word64>(&word, 1), Err(ExaIoError::Selector(15))));
        let mut word = [0u8; 16];
        word[15] = 41;
        assert!(matches!(unpack::<Word128>(&word, 1), Err(ExaIoError::Selector(41))));
        let mut out = Vec::new();
        pack::<Word64>(&[7; 100], &mut out).unwrap();
        assert!(matches!(unpack::<Word64>(&out[..out.len() - 1], 100), Err(ExaIoError::Truncated)));
    }

    proptest! {
        #[test]
        fn round_trip_64(v in prop::collection::vec(any::<i32>().prop_map(|x| zigzag(x as i64 >> (x & 31))), 0..600)) {
            let mut out = Vec::new();
            let words = pack::<Word64>(&v, &mut out).unwrap();
            let (back, used) = unpack::<Word64>(&out, v.len()).unwrap();
            prop_assert_eq!(used, words * 8);
            prop_assert_eq!(back, v);
        }

        #[test]
        fn round_trip_128(v in prop::collection::vec(any::<u64>().prop_map(|x| x >> (24 + x % 40)), 0..600)) {
            let mut out = Vec::new();
            let words = pack::<Word128>(&v, &mut out).unwrap();
            let (back, used) = unpack::<Word128>(&out, v.len()).unwrap();
            prop_assert_eq!(used, words * 16);
            prop_assert_eq!(back, v);
        }
    }
}
