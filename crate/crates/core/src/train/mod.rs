//! Losses, optimizers and the two-phase training protocol, plus device-only
//! baselines and the extension tasks.

mod baselines;
mod config;
mod eval;
mod loss;
mod optim;
mod report;
mod robust;
mod tasks;

pub use baselines::{nelder_mead_optimize, nelder_mead_with_callback, parameter_shift_gradient, NelderMeadConfig, NelderMeadResult};
pub use config::{TomographyConfig, TomographyMode, TrainConfig};
pub use eval::{evaluate_exact, evaluate_on_device, evaluate_state, DeviceEvaluation};
pub use loss::{pure_state_loss, state_loss, state_loss_with, LossKind, StateLoss, LOSS_FLOOR};
pub use optim::{Optimizer, OptimizerKind};
pub use report::{Phase, StepRecord, TrainReport, TrainSummary};
pub use robust::{finetune_noise_aware, init_params, robust_state, ste_gradient, train_noise_free, RobustStateTrainer};
pub use tasks::{
    circuit_unitary, encoded_circuit, product_inputs, regression_ansatz, regression_dataset, regression_loss_exact,
    regression_loss_sim, state_regression, synth_input_fidelity_exact, synthesize_unitary, unitary_ansatz,
    unitary_loss, zero_predictor_loss, RegressionSample, RegressionTask, TaskRecord, TaskReport,
};
