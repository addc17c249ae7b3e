// SPDX-License-Identifier: MIT OR Apache-2.0

//! Crate-wide error type.

use alloc::string::String;
use alloc::vec::Vec;

/// Errors surfaced by the core engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("{op}: last dimension is empty")]
    EmptyLastDim { op: &'static str },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("rotary width {width} is odd")]
    OddRotaryWidth { width: usize },
    #[error("tape has no recorded loss")]
    TapeIncomplete,
    #[error("loss node is not a scalar (shape {shape:?})")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("missing tensor `{0}`")]
    MissingTensor(String),
    #[error("tensor `{name}` has shape {got:?}, expected {expected:?}")]
    TensorShape {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("token id {id} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { id: u32, vocab: usize },
    #[error("sequence length {len} outside 1..={max}")]
    SequenceLength { len: usize, max: usize },
    #[error("tokenizer: {0}")]
    Tokenizer(String),
    #[error("invalid hook point `{0}`")]
    InvalidHook(String),
    #[error("position {spec} cannot be resolved: {reason}")]
    UnresolvablePosition { spec: String, reason: String },
    #[error("two interventions address the same site {0}")]
    DuplicateSite(String),
    #[error("direction is not unit norm (norm {norm})")]
    NonUnitDirection { norm: f64 },
    #[error("probability for {what} is zero or invalid")]
    ZeroProbability { what: &'static str },
    #[error("heatmap: {0}")]
    Heatmap(String),
    #[error("region span {start}..{end} out of bounds for {len} tokens")]
    RegionOutOfBounds { start: usize, end: usize, len: usize },
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("vocabulary too small: {0}")]
    VocabularyTooSmall(String),
    #[error("ID and OOD vocabularies overlap in category `{category}` on `{word}`")]
    VocabularyOverlap { category: String, word: String },
    #[error("training diverged at step {step}")]
    Diverged { step: usize },
    #[error("{0}")]
    Precondition(String),
}

pub type Result<T> = core::result::Result<T, Error>;
