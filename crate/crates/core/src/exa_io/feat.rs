//! FEAT and AOCC sections.
//!
//! ```text
//! FEAT: vertex count u32 | count x u16 feature word
//! AOCC: vertex count u32 | rays u32 | radius f32 | count x u8 openness (x / 255)
//! ```

use super::ExaIoError;
use crate::features::VertexAttributes;

pub const FEAT_HEADER_LEN: usize = 4;
pub const AOCC_HEADER_LEN: usize = 12;

fn count_of(b: &[u8]) -> Result<usize, ExaIoError> {
    Ok(u32::from_le_bytes(b.get(..4).ok_or(ExaIoError::Truncated)?.try_into().unwrap()) as usize)
}

pub fn pack_features(attrs: &[VertexAttributes]) -> Result<Vec<u8>, ExaIoError> {
    let n = u32::try_from(attrs.len()).map_err(|_| ExaIoError::Overflow("vertex count".into()))?;
    let mut out = Vec::with_capacity(FEAT_HEADER_LEN + 2 * attrs.len());
    out.extend_from_slice(&n.to_le_bytes());
    for a in attrs {
        let w = a.pack().map_err(|e| ExaIoError::Overflow(e.to_string()))?;
        out.extend_from_slice(&w.to_le_bytes());
    }
    Ok(out)
}

pub fn unpack_features(section: &[u8]) -> Result<Vec<VertexAttributes>, ExaIoError> {
    let n = count_of(section)?;
    let body = &section[FEAT_HEADER_LEN..];
    if body.len() < 2 * n {
        return Err(ExaIoError::Truncated);
    }
    if body.len() > 2 * n {
        return Err(ExaIoError::Corrupt("trailing bytes".into()));
    }
    Ok(body
        .chunks_exact(2)
        .map(|w| VertexAttributes::unpack(u16::from_le_bytes([w[0], w[1]])))
        .collect())
}

/// Per-vertex openness at 8 bits with the ray parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct AoSection {
    pub rays: u32,
    pub radius: f32,
    pub values: Vec<u8>,
}

impl AoSection {
    pub fn from_openness(ao: &[f64], rays: u32, radius: f32) -> Self {
        Self {
            rays,
            radius,
            values: ao.iter().map(|a| (a.clamp(0.0, 1.0) * 255.0).round() as u8).collect(),
        }
    }

    pub fn openness(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64 / 255.0).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(AOCC_HEADER_LEN + self.values.len());
        out.extend_from_slice(&(self.values.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.rays.to_le_bytes());
        out.extend_from_slice(&self.radius.to_le_bytes());
        out.extend_from_slice(&self.values);
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, ExaIoError> {
        let n = count_of(b)?;
        if b.len() < AOCC_HEADER_LEN + n {
            return Err(ExaIoError::Truncated);
        }
        if b.len() > AOCC_HEADER_LEN + n {
            return Err(ExaIoError::Corrupt("trailing bytes".into()));
        }
        Ok(Self {
            rays: u32::from_le_bytes(b[4..8].try_into().unwrap()),
            radius: f32::from_le_bytes(b[8..12].try_into().unwrap()),
            values: b[AOCC_HEADER_LEN..].to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhaustive_word_round_trip() {
        let attrs: Vec<_> = (0..=u16::MAX).map(VertexAttributes::unpack).collect();
        let bytes = pack_features(&attrs).unwrap();
        assert_eq!(bytes.len(), FEAT_HEADER_LEN + 2 * 65536);
        for (w, chunk) in bytes[FEAT_HEADER_LEN..].chunks_exact(2).enumerate() {
            assert_eq!(u16::from_le_bytes([chunk[0], chunk[1]]) as usize, w);
        }
        assert_eq!(unpack_features(&bytes).unwrap(), attrs);
    }

    #[test]
    fn known_word() {
        let a = VertexAttributes { shape_code: 0, partition: 0, ao: 63 };
        assert_eq!(&pack_features(&[a]).unwrap()[4..], &[0x3F, 0x00]);
    }

    #[test]
    fn overflow_and_truncation() {
        let a = VertexAttributes { shape_code: 0, partition: 8, ao: 0 };
        assert!(matches!(pack_features(&[a]), Err(ExaIoError::Overflow(_))));
        let bytes = pack_features(&[VertexAttributes::default(); 3]).unwrap();
        assert!(matches!(unpack_features(&bytes[..7]), Err(ExaIoError::Truncated)));
        assert!(unpack_features(&[]).is_err());
    }

    #[test]
    fn ao_section_round_trip() {
        let s = AoSection::from_openness(&[0.0, 0.5, 1.0, 1.5], 160, 64.0);
        assert_eq!(s.values, [0, 128, 255, 255]);
        assert_eq!(AoSection::from_bytes(&s.to_bytes()).unwrap(), s);
        assert!(AoSection::from_bytes(&s.to_bytes()[..13]).is_err());
    }
}
