//! Dense tensors, a recording graph with reverse-mode differentiation, and
//! an adaptive-moment optimizer.

mod conv;
mod element;
pub mod gradcheck;
mod graph;
mod optim;
mod tensor;

use thiserror::Error;

pub use conv::{conv_out_len, conv_transpose_out_len, ConvGeom};
pub use element::Element;
pub use graph::{softplus, Gradients, Graph, Var};
pub use optim::{Adam, Parameter};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },
    #[error("tensor of shape {shape:?} cannot hold {len} values")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("{op}: {reason}")]
    InvalidArgument { op: &'static str, reason: String },
    #[error("backward needs a scalar root, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),
    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),
}
