//! Deterministic single-process simulator of federated multi-task transfer
//! learning for wearable accelerometer classification.
//!
//! A shared convolutional trunk feeds one LSTM stack and classifier head per
//! task (activity, device position). Parameters are partitioned into four
//! layer groups (pre-trained, common, task-specific, personalized) that are
//! trained in successive stages and frozen afterwards, with FedAvg aggregation
//! across simulated clients.

pub mod data;
pub mod error;
pub mod experiment;
pub mod federation;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod params;
pub mod pipeline;
pub mod seed;
pub mod tensor;

pub use error::{Error, Result};
