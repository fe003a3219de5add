//! Local losses, shallow per-unit backpropagation, optimizers, the training
//! loop, and the two gradient oracles used to verify it.

mod adam;
mod bp;
mod config;
mod early_stop;
mod gradients;
mod loss;
mod metrics;
pub mod reference;
mod step;
pub mod stopgrad;
mod trainer;

pub use adam::{adam_update, AdamConfig, AdamState, OptimizerState};
pub use bp::{bp_forward, bp_gradients, bp_predict, softmax_cross_entropy, train_bp_step, BpTrace};
pub use config::{Algorithm, EarlyStopping, TrainConfig, UpdateSchedule};
pub use early_stop::{EarlyStopController, EarlyStopDecision};
pub use gradients::{
    group_loss_gradient, unit_backward, unit_batch_loss, LayerGradients, ModelGradients,
    UnitGradients,
};
pub use loss::{sigmoid, softplus, unit_loss, unit_loss_partials};
pub use metrics::{MetricsLog, MetricsRow, METRICS_HEADER};
pub use stopgrad::stopgrad_oracle_grads;
pub use step::{intff_gradients, train_step_intff};
pub use trainer::{build_model, train, train_with_progress, EpochSummary, TrainOutcome};
