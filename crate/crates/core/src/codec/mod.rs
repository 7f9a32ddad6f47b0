//! Contour extraction and the octree-coded EXA representation.

mod bits;
mod container;
mod contour;
mod octree;
mod table;

use thiserror::Error;

pub use bits::{gamma_len, BitReader, BitWriter};
pub use container::{
    decode_with_table, encode_contour, exa_decode, exa_encode, exa_read, exa_write, ExaContainer,
    Section, MAGIC, TAG_AMBG, TAG_AOCC, TAG_DNRM, TAG_DPOS, TAG_FEAT, TAG_PREC, TAG_TOPO,
    VERSION,
};
pub use contour::{
    asymptotic_decider, build_sign_field, dequantize_offset, quantize_offset, quantize_offsets,
    ActiveCell, ContourData, SignField, MAX_PRECISION,
};
pub use table::{build_code_table, default_corpus, symbol_counts, CodeTable, TABLE_LEN};

pub(crate) use contour::{strides, unravel};

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not an EXA file (bad magic)")]
    BadMagic,
    #[error("unsupported EXA version {0}")]
    Version(u32),
    #[error("code table mismatch: decoder has {expected}, file was coded with {found}")]
    HashMismatch { expected: String, found: String },
    #[error("stream truncated")]
    Truncated,
    #[error("corrupt stream: {0}")]
    Corrupt(String),
    #[error("precision {0} outside 1..=16")]
    Precision(u8),
    #[error("missing section {0}")]
    MissingSection(String),
}
