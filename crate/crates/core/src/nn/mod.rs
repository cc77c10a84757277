//! Dense numerical kernel: matrices, MLPs with manual backprop, losses,
//! Adam, gradient checking and the checkpoint container.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod init;
pub mod loss;
pub mod matrix;
pub mod mlp;

pub use adam::{AdamState, RowAdam, SparseRowGrad};
pub use checkpoint::{Checkpoint, Tensor, TensorData};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use init::Init;
pub use loss::{loss_and_grad, LossKind};
pub use matrix::DenseMatrix;
pub use mlp::{Activation, Mlp, MlpGrads, MlpScratch, MlpSpec, OutputActivation, Tape};
