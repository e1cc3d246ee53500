//! Small neural-network engine: layer kernels with hand-written backward
//! passes, losses, optimizers and a finite-difference gradient checker.

pub mod activation;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod network;
pub mod optim;
pub mod params;
pub mod scalar;
pub mod tensor;

pub use activation::{sigmoid, softmax, Activation};
pub use gradcheck::{grad_check, GradCheckReport};
pub use layers::{LayerSpec, Mode};
pub use loss::{LossKind, PairIndex};
pub use network::{Network, Tape};
pub use optim::{l2_penalty, Optimizer, OptimizerKind};
pub use params::{ParamId, ParamStore};
pub use scalar::Scalar;
pub use tensor::Tensor;
