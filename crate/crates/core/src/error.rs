use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("axis {axis} is invalid for a tensor of rank {ndim}")]
    Axis { axis: usize, ndim: usize },

    #[error("slice {start}..{end} out of range for axis of length {len}")]
    SliceRange {
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("class index {index} out of range for {classes} classes")]
    InvalidClass { index: usize, classes: usize },

    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("sequence is empty")]
    EmptySequence,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unknown modality `{0}`")]
    UnknownModality(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("task mismatch: {0}")]
    TaskMismatch(String),

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Failures reading the binary dataset and checkpoint containers.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { expected: u32, found: u32 },

    #[error("corrupt header: {0}")]
    CorruptHeader(String),

    #[error("file truncated: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },

    #[error("corrupt payload: {0}")]
    CorruptPayload(String),
}
