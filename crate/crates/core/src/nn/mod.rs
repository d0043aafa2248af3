//! Minimal differentiable compute stack: tensors, dense/conv1d/rectifier
//! layers, losses, optimizers and a finite-difference gradient checker.

pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod optim;
pub mod tensor;

pub use gradcheck::{central_difference, check_gradient, grad_check, GradCheckReport};
pub use layers::{Conv1d, Dense, Layer, Sequential, Tape};
pub use loss::{kl_divergence, softmax, softmax_cross_entropy};
pub use optim::{Optimizer, OptimizerKind};
pub use tensor::Tensor;
