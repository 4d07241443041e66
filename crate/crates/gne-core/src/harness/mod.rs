//! Experiment harness: JSON configuration, named presets, run metrics,
//! CSV/JSON export, and parameter sweeps.
//!
//! A run directory is self-describing: `config.resolved.json` holds the fully
//! explicit configuration (defaults applied, presets expanded, random
//! initializers drawn), and re-running it reproduces every output byte for
//! byte.

mod config;
mod export;
mod metrics;
mod presets;
mod runner;

pub use config::{
    default_output_dir, load_config, load_config_str, validate, ConfigError, ExperimentConfig,
    GameConfig, GraphConfig, InitialConfig, OutputsConfig, ParamsConfig, Prepared,
};
pub use export::export;
pub use metrics::{compute_metrics, MetricsRow};
pub use presets::{preset, preset_names};
pub use runner::{
    condition_report, run, run_and_export, solve_oracle, sweep, ConditionReport, OracleSummary,
    RunOutput, Summary, SweepParam, SweepRow,
};

use crate::game::GameError;
use crate::graph::GraphError;
use crate::integrate::IntegrateError;
use crate::oracle::OracleError;
use crate::seeker::SeekerError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Seeker(#[from] SeekerError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("i/o failure at {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}
