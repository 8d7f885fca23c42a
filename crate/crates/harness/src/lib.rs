//! Experiment runner for the consensus/diversity simulator: configuration,
//! the round loop, per-round logging, aggregation and analysis.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod experiment;
pub mod metrics;
pub mod record;
pub mod runner;

pub use config::{Baseline, ExperimentConfig};
pub use experiment::{run_experiment, write_artifacts, ExperimentResult};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] cdsim_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("artifact: {0}")]
    Artifact(String),
    #[error("analysis: {0}")]
    Analysis(String),
}
