//! Losses, metrics, stage-wise training loops, and the evaluation harness.

pub mod config;
pub mod eval;
pub mod loss;
pub mod metrics;
pub mod stages;

pub use config::TrainConfig;
pub use eval::{evaluate, ContactSource, EvalReport};
pub use metrics::{mpjpe_path, mpjpe_pose, HorizonErrors, STANDARD_HORIZONS};
pub use stages::{
    train_contact_stage, train_motion_stage, train_motion_stage_with, ContactConditioning,
    Dataset, Sample, TrainLog,
};
