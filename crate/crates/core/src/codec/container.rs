//! The EXA container: fixed header, section table, section payloads.
//!
//! ```text
//! "EXA4" | version u32 | dims 3 x u32 | tau f32 | N u8 | table hash [16]
//! section count u32 | count x { tag [4], offset u64, length u64 } | payloads
//! ```
//! All integers little-endian; offsets are absolute file positions.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::bits::{BitReader, BitWriter};
use super::contour::{
    active_sets, build_sign_field, quantize_offsets, ContourData, MAX_PRECISION,
};
use super::octree::{decode_topology, encode_topology};
use super::table::{hex16, CodeTable};
use super::CodecError;
use crate::volume::Volume3D;

pub const MAGIC: &[u8; 4] = b"EXA4";
pub const VERSION: u32 = 1;

pub const TAG_TOPO: [u8; 4] = *b"TOPO";
pub const TAG_AMBG: [u8; 4] = *b"AMBG";
pub const TAG_PREC: [u8; 4] = *b"PREC";
pub const TAG_DPOS: [u8; 4] = *b"DPOS";
pub const TAG_DNRM: [u8; 4] = *b"DNRM";
pub const TAG_FEAT: [u8; 4] = *b"FEAT";
pub const TAG_AOCC: [u8; 4] = *b"AOCC";

const HEADER_LEN: usize = 4 + 4 + 12 + 4 + 1 + 16 + 4;
const ENTRY_LEN: usize = 4 + 8 + 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub tag: [u8; 4],
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExaContainer {
    pub dims: [u32; 3],
    pub tau: f32,
    pub precision: u8,
    pub table_hash: [u8; 16],
    pub sections: Vec<Section>,
}

impl ExaContainer {
    pub fn section(&self, tag: [u8; 4]) -> Option<&[u8]> {
        self.sections
            .iter()
            .find(|s| s.tag == tag)
            .map(|s| s.data.as_slice())
    }

    /// Replaces the section with this tag, or appends it.
    pub fn set_section(&mut self, tag: [u8; 4], data: Vec<u8>) {
        match self.sections.iter_mut().find(|s| s.tag == tag) {
            Some(s) => s.data = data,
            None => self.sections.push(Section { tag, data }),
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims.map(|d| d as usize)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload: usize = self.sections.iter().map(|s| s.data.len()).sum();
        let mut out =
            Vec::with_capacity(HEADER_LEN + ENTRY_LEN * self.sections.len() + payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for d in self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.extend_from_slice(&self.tau.to_le_bytes());
        out.push(self.precision);
        out.extend_from_slice(&self.table_hash);
        out.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());
        let mut offset = (HEADER_LEN + ENTRY_LEN * self.sections.len()) as u64;
        for s in &self.sections {
            out.extend_from_slice(&s.tag);
            out.extend_from_slice(&offset.to_le_bytes());
            out.extend_from_slice(&(s.data.len() as u64).to_le_bytes());
            offset += s.data.len() as u64;
        }
        for s in &self.sections {
            out.extend_from_slice(&s.data);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(CodecError::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(CodecError::Truncated);
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(CodecError::Version(version));
        }
        let dims = [u32_at(8), u32_at(12), u32_at(16)];
        let tau = f32::from_le_bytes(bytes[20..24].try_into().unwrap());
        let precision = bytes[24];
        let mut table_hash = [0u8; 16];
        table_hash.copy_from_slice(&bytes[25..41]);
        let count = u32_at(41) as usize;
        let table_end = HEADER_LEN
            .checked_add(count.checked_mul(ENTRY_LEN).ok_or(CodecError::Truncated)?)
            .ok_or(CodecError::Truncated)?;
        if bytes.len() < table_end {
            return Err(CodecError::Truncated);
        }
        let mut sections = Vec::with_capacity(count);
        for i in 0..count {
            let e = HEADER_LEN + i * ENTRY_LEN;
            let mut tag = [0u8; 4];
            tag.copy_from_slice(&bytes[e..e + 4]);
            let off = u64_at(e + 4);
            let len = u64_at(e + 12);
            let end = off.checked_add(len).ok_or(CodecError::Truncated)?;
            if off < table_end as u64 || end > bytes.len() as u64 {
                return Err(CodecError::Corrupt(format!(
                    "section {} spans {off}..{end} outside the file",
                    String::from_utf8_lossy(&tag)
                )));
            }
            sections.push(Section {
                tag,
                data: bytes[off as usize..end as usize].to_vec(),
            });
        }
        Ok(Self {
            dims,
            tau,
            precision,
            table_hash,
            sections,
        })
    }
}

pub fn exa_write(path: impl AsRef<Path>, container: &ExaContainer) -> Result<(), CodecError> {
    let path = path.as_ref();
    fs::write(path, container.to_bytes()).map_err(|source| CodecError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn exa_read(path: impl AsRef<Path>) -> Result<ExaContainer, CodecError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| CodecError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ExaContainer::from_bytes(&bytes)
}

/// Sign extraction, quantization and coding with the shipped table.
pub fn exa_encode(vol: &Volume3D, tau: f64, precision: u8) -> Result<ExaContainer, CodecError> {
    if !(1..=MAX_PRECISION).contains(&precision) {
        return Err(CodecError::Precision(precision));
    }
    let mut contour = build_sign_field(vol, tau);
    quantize_offsets(&mut contour, vol, precision)?;
    encode_contour(&contour, CodeTable::shipped())
}

/// Codes an already quantized contour into TOPO, AMBG and PREC sections.
pub fn encode_contour(
    contour: &ContourData,
    table: &CodeTable,
) -> Result<ExaContainer, CodecError> {
    let n = contour.precision;
    if !(1..=MAX_PRECISION).contains(&n) || contour.offsets.len() != contour.edges.len() {
        return Err(CodecError::Precision(n));
    }
    if contour.dims.iter().any(|&d| d > u32::MAX as usize) {
        return Err(CodecError::Corrupt("dims exceed u32".into()));
    }
    let topo = encode_topology(&contour.signs, table);
    let mut ambg = BitWriter::new();
    for &b in &contour.ambiguity {
        ambg.write_bit(b);
    }
    // 8 offsets per chunk step keep every chunk byte-aligned
    let parts: Vec<BitWriter> = contour
        .offsets
        .par_chunks(8 * 1024)
        .map(|chunk| {
            let mut w = BitWriter::new();
            for &q in chunk {
                w.write_bits(q as u64, n as u32);
            }
            w
        })
        .collect();
    let mut prec = BitWriter::new();
    for p in &parts {
        prec.append(p);
    }
    Ok(ExaContainer {
        dims: contour.dims.map(|d| d as u32),
        tau: contour.tau,
        precision: n,
        table_hash: table.hash(),
        sections: vec![
            Section {
                tag: TAG_TOPO,
                data: topo,
            },
            Section {
                tag: TAG_AMBG,
                data: ambg.into_bytes(),
            },
            Section {
                tag: TAG_PREC,
                data: prec.into_bytes(),
            },
        ],
    })
}

pub fn exa_decode(container: &ExaContainer) -> Result<ContourData, CodecError> {
    decode_with_table(container, CodeTable::shipped())
}

pub fn decode_with_table(
    container: &ExaContainer,
    table: &CodeTable,
) -> Result<ContourData, CodecError> {
    if container.table_hash != table.hash() {
        return Err(CodecError::HashMismatch {
            expected: hex16(&table.hash()),
            found: hex16(&container.table_hash),
        });
    }
    let n = container.precision;
    if !(1..=MAX_PRECISION).contains(&n) {
        return Err(CodecError::Precision(n));
    }
    let dims = container.dims();
    if dims.iter().any(|&d| d == 0) {
        return Err(CodecError::Corrupt(format!("invalid dims {dims:?}")));
    }
    let section = |tag: [u8; 4]| {
        container
            .section(tag)
            .ok_or_else(|| CodecError::MissingSection(String::from_utf8_lossy(&tag).into()))
    };
    let signs = decode_topology(section(TAG_TOPO)?, dims, table)?;
    let (edges, cells, facets) = active_sets(&signs);

    let ambg = section(TAG_AMBG)?;
    if ambg.len() != facets.len().div_ceil(8) {
        return Err(CodecError::Truncated);
    }
    let mut r = BitReader::new(ambg);
    let ambiguity = (0..facets.len())
        .map(|_| r.read_bit())
        .collect::<Result<Vec<_>, _>>()?;

    let prec = section(TAG_PREC)?;
    if prec.len() != (edges.len() * n as usize).div_ceil(8) {
        return Err(CodecError::Truncated);
    }
    let mut r = BitReader::new(prec);
    let offsets = (0..edges.len())
        .map(|_| r.read_bits(n as u32).map(|q| q as u16))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(ContourData {
        dims,
        tau: container.tau,
        precision: n,
        signs,
        edges,
        offsets,
        cells,
        facets,
        ambiguity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{generate_phantom, PhantomSpec};

    #[test]
    fn empty_container_round_trip() {
        let vol = Volume3D::filled([8, 8, 8], 0.0).unwrap();
        let c = exa_encode(&vol, 0.5, 8).unwrap();
        assert_eq!(c.section(TAG_TOPO).unwrap().len(), 1);
        assert!(c.section(TAG_PREC).unwrap().is_empty());
        let d = exa_decode(&c).unwrap();
        assert!(d.edges.is_empty() && d.cells.is_empty());
    }

    #[test]
    fn bytes_round_trip_and_appended_sections() {
        let vol = generate_phantom(&PhantomSpec::ball(20, 6.3)).unwrap();
        let mut c = exa_encode(&vol, 0.5, 4).unwrap();
        let bytes = c.to_bytes();
        assert_eq!(ExaContainer::from_bytes(&bytes).unwrap(), c);
        let before = exa_decode(&c).unwrap();
        c.set_section(TAG_FEAT, vec![1, 2, 3]);
        assert_eq!(exa_decode(&ExaContainer::from_bytes(&c.to_bytes()).unwrap()).unwrap(), before);
    }

    #[test]
    fn bad_magic_and_hash() {
        assert!(matches!(
            ExaContainer::from_bytes(b"NOPE...."),
            Err(CodecError::BadMagic)
        ));
        let vol = generate_phantom(&PhantomSpec::ball(12, 3.0)).unwrap();
        let mut c = exa_encode(&vol, 0.5, 8).unwrap();
        c.table_hash[0] ^= 1;
        assert!(matches!(exa_decode(&c), Err(CodecError::HashMismatch { .. })));
    }

    #[test]
    fn truncated_file() {
        let vol = generate_phantom(&PhantomSpec::ball(12, 3.0)).unwrap();
        let bytes = exa_encode(&vol, 0.5, 8).unwrap().to_bytes();
        assert!(ExaContainer::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn precision_out_of_range() {
        let vol = Volume3D::filled([4, 4, 4], 0.0).unwrap();
        assert!(matches!(exa_encode(&vol, 0.5, 0), Err(CodecError::Precision(0))));
        assert!(matches!(exa_encode(&vol, 0.5, 17), Err(CodecError::Precision(17))));
    }
}
