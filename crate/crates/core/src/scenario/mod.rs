//! Scenario loading, the simulation loop, statistics and CSV export.

mod config;
pub mod export;
mod runner;
pub mod stats;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub use config::{Scenario, UeAction, UeEvent};
pub use export::{export_csv, ExportError, ExportedFiles};
pub use runner::{
    run, run_experiment, Experiment, LabeledRun, RunResult, XappCounters, CMF_LABEL,
    CONTROLLER_ENDPOINT, GNB_ENDPOINT, NO_CM_LABEL,
};

use crate::domain::DomainError;
use crate::fabric::FabricError;
use crate::mitigation::MitigationError;
use crate::ran::RanError;
use crate::xapp::XappError;

/// Anything that stops a scenario from loading or running to completion.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Xapp(#[from] XappError),
    #[error(transparent)]
    Ran(#[from] RanError),
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error(transparent)]
    Mitigation(#[from] MitigationError),
    #[error(transparent)]
    Stats(#[from] stats::StatsError),
}
