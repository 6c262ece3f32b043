//! Dense-tensor algebra, reverse-mode differentiation, Adam, and the
//! finite-difference harness that keeps the other three honest.

pub mod adam;
pub mod gradcheck;
pub mod graph;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{grad_check, sample_coords};
pub use graph::{Gradients, Graph, GraphError, NodeId};
pub use tensor::{
    gelu, gelu_scalar, layer_norm, masked_softmax, Precision, Tensor, TensorError, NEG_MASK,
};
