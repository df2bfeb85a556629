//! Differentiable layer kernels with hand-derived gradients.

mod activation;
mod conv;
mod dense;
mod gradcheck;
mod init;
mod loss;
mod lstm;
mod sgd;
#[cfg(test)]
pub(crate) mod testutil;

pub use activation::{relu, relu_backward};
pub use conv::{conv1d_backward, conv1d_forward, Conv1dGrads};
pub use dense::{dense_backward, dense_forward, DenseGrads};
pub use gradcheck::{gradient_check, MAX_COORDS_PER_TENSOR};
pub use init::uniform_init;
pub use loss::{softmax, softmax_cross_entropy};
pub use lstm::{
    lstm_backward, lstm_forward, lstm_forward_cached, sigmoid, LstmCache, LstmGrads, LstmParams,
};
pub use sgd::{sgd_step, sgd_step_in_place};
