//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by table construction, model evaluation, search, and
/// graph operations.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// Rows of differing length, or a name list that does not match B.
    #[error("input shape: {0}")]
    InputShape(String),
    /// A cell that is not 0/1, a negative count, or a duplicate label.
    #[error("input value: {0}")]
    InputValue(String),
    /// An empty, duplicated, or out-of-range variable subset.
    #[error("variable subset: {0}")]
    Subset(String),
    /// Cliques that overlap, leave variables uncovered, or index out of range.
    #[error("partition: {0}")]
    Partition(String),
    /// An operation that requires maximum-likelihood estimates was called on
    /// a model whose generator marginals contain zero counts.
    #[error("model invalid: {0}")]
    ModelInvalid(String),
    /// A size guard was exceeded (e.g. exhaustive enumeration above B = 12).
    #[error("guard: {0}")]
    Guard(String),
    /// Random initialization could not produce a model with valid MLEs.
    #[error("no valid model: {0}")]
    NoValidModel(String),
    /// Occam's window applied to an empty bag.
    #[error("empty bag")]
    EmptyBag,
    /// Two graphs or edge sets whose vertex labels do not match.
    #[error("label mismatch: {0}")]
    LabelMismatch(String),
    /// An invalid synthetic-matrix specification.
    #[error("synth spec: {0}")]
    Spec(String),
    /// A table fails the preconditions of graph preprocessing.
    #[error("preprocess: {0}")]
    Preprocess(String),
    /// Every vertex of the connectivity graph is isolated; only the
    /// all-singleton model remains, so pruning would delete the table.
    #[error("empty model space: every variable is isolated")]
    EmptyModelSpace,
    /// Malformed text input (matrix, cell file, partition string, JSON).
    #[error("parse: {0}")]
    Parse(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
