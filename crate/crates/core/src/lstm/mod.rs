//! Single-layer LSTM sequence regressor with a direct multi-output head,
//! trained by backpropagation through time.

mod backprop;
mod cell;
mod matrix;
mod params;
mod train;

pub use backprop::{backward, finite_diff_grad, finite_diff_mse, loss, mse};
pub use cell::{cell_forward, predict, sequence_forward, sigmoid, LstmState, SequenceCache, StepCache};
pub use matrix::Matrix;
pub use params::{init_parameters, Gradients, LstmParameters, RegressorHead};
pub use train::{
    evaluate_mse, train, train_from, EpochLoss, Example, LossCurve, OptimizerKind, TrainConfig,
    TrainOutcome, UpdateInfo,
};
