//! MSB-first bit streams and the Elias-gamma code.

use super::CodecError;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BitWriter {
    bytes: Vec<u8>,
    /// Total number of bits written.
    len: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bit_len(&self) -> u64 {
        self.len
    }

    #[inline]
    pub fn write_bit(&mut self, bit: bool) {
        let used = (self.len % 8) as u32;
        if used == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 0x80 >> used;
        }
        self.len += 1;
    }

    /// Writes the low `n` bits of `value`, most significant first.
    pub fn write_bits(&mut self, value: u64, n: u32) {
        debug_assert!(n <= 64);
        for i in (0..n).rev() {
            self.write_bit((value >> i) & 1 == 1);
        }
    }

    /// Elias gamma for `v >= 1`: `floor(log2 v)` zeros, then `v` in binary.
    pub fn write_gamma(&mut self, v: u64) {
        debug_assert!(v >= 1);
        let n = 63 - v.leading_zeros();
        self.write_bits(0, n);
        self.write_bits(v, n + 1);
    }

    /// Appends another stream bit by bit (byte-wise when aligned).
    pub fn append(&mut self, other: &BitWriter) {
        if self.len % 8 == 0 {
            self.bytes.extend_from_slice(&other.bytes);
            self.len += other.len;
            return;
        }
        let full = (other.len / 8) as usize;
        for &b in &other.bytes[..full] {
            self.write_bits(b as u64, 8);
        }
        let rest = (other.len % 8) as u32;
        if rest > 0 {
            self.write_bits((other.bytes[full] >> (8 - rest)) as u64, rest);
        }
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

/// Number of bits `write_gamma(v)` emits.
#[inline]
pub fn gamma_len(v: u64) -> u32 {
    2 * (63 - v.leading_zeros()) + 1
}

#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    #[inline]
    pub fn read_bit(&mut self) -> Result<bool, CodecError> {
        let byte = (self.pos / 8) as usize;
        let b = *self.bytes.get(byte).ok_or(CodecError::Truncated)?;
        let bit = (b >> (7 - (self.pos % 8))) & 1 == 1;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, n: u32) -> Result<u64, CodecError> {
        let mut v = 0u64;
        for _ in 0..n {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v)
    }

    pub fn read_gamma(&mut self) -> Result<u64, CodecError> {
        let mut zeros = 0u32;
        while !self.read_bit()? {
            zeros += 1;
            if zeros > 63 {
                return Err(CodecError::Corrupt("gamma code longer than 64 bits".into()));
            }
        }
        let rest = self.read_bits(zeros)?;
        Ok((1u64 << zeros) | rest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn msb_first() {
        let mut w = BitWriter::new();
        w.write_bits(0b101, 3);
        w.write_bits(0b11111, 5);
        w.write_bit(true);
        assert_eq!(w.bit_len(), 9);
        assert_eq!(w.into_bytes(), vec![0b1011_1111, 0b1000_0000]);
    }

    #[test]
    fn gamma_lengths() {
        assert_eq!(gamma_len(1), 1);
        assert_eq!(gamma_len(2), 3);
        assert_eq!(gamma_len(3), 3);
        assert_eq!(gamma_len(4), 5);
        assert_eq!(gamma_len(256), 17);
    }

    #[test]
    fn rank_code_is_prefix_free() {
        // all 256 rank codewords: none is a prefix of another
        let words: Vec<(u64, u32)> = (1..=256u64)
            .map(|v| {
                let mut w = BitWriter::new();
                w.write_gamma(v);
                let n = w.bit_len() as u32;
                let bytes = w.into_bytes();
                let mut bits = 0u64;
                for (i, b) in bytes.iter().enumerate() {
                    bits |= (*b as u64) << (56 - 8 * i);
                }
                (bits >> (64 - n), n)
            })
            .collect();
        for (i, &(a, la)) in words.iter().enumerate() {
            for (j, &(b, lb)) in words.iter().enumerate() {
                if i != j && la <= lb {
                    assert_ne!(b >> (lb - la), a, "rank {i} prefixes rank {j}");
                }
            }
        }
    }

    #[test]
    fn truncated_gamma() {
        let mut r = BitReader::new(&[0x00]);
        assert!(matches!(r.read_gamma(), Err(CodecError::Truncated)));
    }

    proptest! {
        #[test]
        fn gamma_round_trip(vals in proptest::collection::vec(1u64..1_000_000, 0..200)) {
            let mut w = BitWriter::new();
            for &v in &vals { w.write_gamma(v); }
            let expect: u64 = vals.iter().map(|&v| gamma_len(v) as u64).sum();
            prop_assert_eq!(w.bit_len(), expect);
            let bytes = w.into_bytes();
            let mut r = BitReader::new(&bytes);
            for &v in &vals { prop_assert_eq!(r.read_gamma().unwrap(), v); }
        }

        #[test]
        fn append_matches_sequential(a in proptest::collection::vec(any::<bool>(), 0..100),
                                     b in proptest::collection::vec(any::<bool>(), 0..100)) {
            let mut seq = BitWriter::new();
            let mut left = BitWriter::new();
            let mut right = BitWriter::new();
            for &x in &a { seq.write_bit(x); left.write_bit(x); }
            for &x in &b { seq.write_bit(x); right.write_bit(x); }
            left.append(&right);
            prop_assert_eq!(left, seq);
        }
    }
}
