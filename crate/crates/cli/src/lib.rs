//! Canned experiments on top of `quench-core`: configuration, scenario
//! drivers and output files.

pub mod config;
pub mod output;
pub mod plot;
pub mod scenarios;

use std::path::PathBuf;

use quench_core::QuenchError;

pub use config::{ConfigError, ExperimentConfig};
pub use output::{RunManifest, RunOutput};
pub use scenarios::{run_scenario, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: QuenchError,
    },
    #[error(transparent)]
    Output(#[from] output::OutputError),
}

impl LabError {
    /// 2 for bad input, 3 for numerical failures, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            LabError::Numerical {
                source: QuenchError::InvalidGrid(_) | QuenchError::InvalidParameter { .. },
                ..
            } => 2,
            LabError::Numerical { .. } => 3,
            LabError::Output(_) => 1,
        }
    }
}

/// Attaches a description of the failing step to core errors.
pub trait Context<T> {
    fn context(self, what: impl Into<String>) -> Result<T, LabError>;
}

impl<T> Context<T> for Result<T, QuenchError> {
    fn context(self, what: impl Into<String>) -> Result<T, LabError> {
        self.map_err(|source| LabError::Numerical {
            context: what.into(),
            source,
        })
    }
}

/// Caps the worker pool at `QUENCH_LAB_THREADS` when set.
pub fn init_threads() -> Result<(), ConfigError> {
    let Ok(raw) = std::env::var("QUENCH_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| ConfigError {
        message: format!("expected a positive integer, got `{raw}`"),
        line: None,
        origin: Some("QUENCH_LAB_THREADS".into()),
    })?;
    // a pool that already exists (tests) is left alone
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Output directory: the command line wins over the config file.
pub fn output_dir(cfg: &ExperimentConfig, cli: Option<PathBuf>) -> PathBuf {
    cli.unwrap_or_else(|| PathBuf::from(&cfg.scenario.out_dir))
}
