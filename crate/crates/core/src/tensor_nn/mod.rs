//! Dense matrices and small ReLU networks with analytic gradients, Adam and
//! early stopping.

mod adam;
mod loss;
mod matrix;
mod mlp;
mod snapshot;
mod train;

pub use adam::Adam;
pub use loss::{loss_and_grad, loss_value, LossKind};
pub(crate) use loss::{sigmoid, softplus};
pub use matrix::Matrix;
pub use mlp::{Activation, Dense, Gradients, Mlp, MlpConfig};
pub use snapshot::{read_snapshot, write_snapshot};
pub use train::{train, TrainConfig, TrainReport};
