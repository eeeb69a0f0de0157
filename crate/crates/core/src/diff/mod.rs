//! Minimal reverse-mode differentiation core: dense matrices, a recording
//! graph, parameter storage, Adam, and finite-difference checking.

mod adam;
pub mod check;
mod graph;
mod params;
mod tensor;

pub use adam::{Adam, AdamConfig, AdamState};
pub use graph::{Fault, Graph, Var};
pub use params::{Param, ParamGroup, ParamId, ParamStore};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape { op: &'static str, left: (usize, usize), right: (usize, usize) },
    #[error("{op}: row {row} has no finite entry")]
    DegenerateRow { op: &'static str, row: usize },
    #[error("backward requires a scalar root, got shape {0:?}")]
    NonScalarRoot((usize, usize)),
    #[error("{0}: empty input")]
    Empty(&'static str),
    #[error("{op}: index {index} out of range for length {len}")]
    Index { op: &'static str, index: usize, len: usize },
    #[error("parameter {0} has no gradient (frozen)")]
    MissingGrad(String),
    #[error("parameter layout mismatch: {0}")]
    Layout(String),
}
