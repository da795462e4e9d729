//! Training with self-generated pseudo-labels.

pub mod adam;
pub mod config;
pub mod slim;

pub use adam::{Adam, AdamConfig};
pub use config::{Shape, TrainConfig};
pub use slim::{
    holdout_set, pseudo_label_index, select_pseudo_label, slim_loss, train_loop, train_step,
    validate, validation_seed, StepStats, TrainReport, Validation,
};
