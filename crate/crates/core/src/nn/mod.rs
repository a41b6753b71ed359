//! Dense tensors, reverse-mode differentiation and the optimizer.

pub mod gradcheck;
pub mod graph;
pub mod optim;
pub mod params;
pub mod tensor;

pub use graph::{kernels, BinaryOp, Graph, UnaryOp, Var};
pub use optim::{AdamConfig, OptimizerState};
pub use params::{Bound, ParamId, ParamStore};
pub use tensor::{count_parameters, Parameter, Tensor};
