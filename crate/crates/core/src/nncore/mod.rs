//! Minimal differentiable MLP, soft-target cross-entropy, and momentum SGD.
//!
//! Matrices are `ndarray::Array2<f64>` in row-major `batch × features` layout.

mod loss;
mod model;
mod optim;

pub use loss::{log_softmax, soft_ce, TargetVector};
pub use model::{argmax, Activation, Dense, DenseGrad, Gradients, Model, ModelSnapshot};
pub use optim::{OptimHyper, Sgd};
