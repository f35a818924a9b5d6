//! Experiment runner behind the `qwalk-action` binary.

pub mod config;
mod experiments;
mod output;

use std::fmt;
use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

pub use config::{parse_config, ConfigError, Experiment, RawConfig, RunSpec};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Walk { context: &'static str, source: qwalk_core::WalkError },
    #[error("{0}")]
    Unsupported(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
}

pub(crate) trait Context<T> {
    fn context(self, context: &'static str) -> Result<T, RunError>;
}

impl<T> Context<T> for qwalk_core::Result<T> {
    fn context(self, context: &'static str) -> Result<T, RunError> {
        self.map_err(|source| RunError::Walk { context, source })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub note: Option<String>,
}

impl Check {
    /// Passes when `value ≤ tol`; NaN fails.
    pub fn at_most(name: &str, value: f64, tol: f64) -> Self {
        let status = if value <= tol { Status::Pass } else { Status::Fail };
        Check { name: name.into(), status, value: Some(value), tolerance: Some(tol), note: None }
    }

    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        let status = if value >= bound { Status::Pass } else { Status::Fail };
        Check { name: name.into(), status, value: Some(value), tolerance: Some(bound), note: None }
    }

    pub fn flag(name: &str, ok: bool, note: impl Into<String>) -> Self {
        let status = if ok { Status::Pass } else { Status::Fail };
        Check { name: name.into(), status, value: None, tolerance: None, note: Some(note.into()) }
    }

    pub fn skip(name: &str, why: impl Into<String>) -> Self {
        Check { name: name.into(), status: Status::Skip, value: None, tolerance: None, note: Some(why.into()) }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        write!(f, "{tag} {}", self.name)?;
        if let Some(v) = self.value {
            write!(f, " value={v:.3e}")?;
        }
        if let Some(t) = self.tolerance {
            write!(f, " bound={t:.1e}")?;
        }
        if let Some(n) = &self.note {
            write!(f, " ({n})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment: &'static str,
    pub checks: Vec<Check>,
    pub artifacts: Vec<PathBuf>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn count(&self, status: Status) -> usize {
        self.checks.iter().filter(|c| c.status == status).count()
    }
}

/// Runs one experiment and writes its artifacts under `spec.output_path`.
pub fn run(spec: &RunSpec) -> Result<Report, RunError> {
    experiments::run(spec)
}
