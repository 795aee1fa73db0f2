//! Reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Graph`] is a tape: every operation appends a node holding its forward
//! value, and [`Graph::backward`] walks the tape in reverse to produce
//! [`Gradients`] for every parameter that contributed to a scalar loss.
//! Parameters live in a [`ParamStore`] that the graph borrows immutably, so a
//! frozen store can back any number of concurrent forward passes.

mod graph;
mod optim;
mod params;

pub use graph::{Graph, Var};
pub use optim::{Adam, AdamConfig};
pub use params::{Gradients, ParamId, ParamStore};

/// Dense row-major matrix used for every value on the tape.
pub type Matrix = ndarray::Array2<f64>;

pub use ndarray;

#[derive(Debug, thiserror::Error)]
pub enum AutogradError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("backward requires a 1x1 loss, got {0:?}")]
    NonScalarLoss((usize, usize)),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
}
