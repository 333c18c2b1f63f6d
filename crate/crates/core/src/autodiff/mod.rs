//! Dense `f64` tensors with tape-based reverse-mode differentiation.
//!
//! The backward pass records its own work on the tape as ordinary primitive
//! applications. A gradient is therefore just another [`Var`], and anything
//! built from it (a gradient norm, a penalty on that norm) can be
//! differentiated again. That is what the Wasserstein gradient penalty needs.

mod tape;
mod tensor;

pub use tape::{IndexMap, Primitive, Tape, Var, GRAD_NORM_EPS};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AutodiffError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{op}: expected {expected} inputs, got {found}")]
    Arity {
        op: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("data length {found} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, found: usize },
    #[error("output of shape {0:?} is not a scalar")]
    NotScalar(Vec<usize>),
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("variable {0} is not on this tape")]
    UnknownVar(usize),
    #[error("variable {0} is not a leaf")]
    NotLeaf(usize),
}

pub type Result<T> = std::result::Result<T, AutodiffError>;
