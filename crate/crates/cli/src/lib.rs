//! Experiment runner for the `gdalab` command-line tool.
//!
//! A run reads one JSON configuration, executes the selected experiment and
//! writes CSV tables, gnuplot scripts and a `manifest.json` that is enough
//! to replay it.

pub mod config;
pub mod output;
pub mod run;

use std::path::PathBuf;

use serde_json::{json, Value};

pub use config::{load_config, parse_config, validate_config, ConfigError, ExperimentConfig, ExperimentKind};
pub use run::{execute, run_to_dir, RunOptions, RunOutput};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {message}")]
    Read { path: PathBuf, message: String },

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("numerical failure: {0}")]
    Numeric(#[from] gdalab::Error),

    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Read { .. } | CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io { .. } => 1,
        }
    }

    /// Machine-readable error record printed on failure.
    pub fn record(&self) -> Value {
        let mut v = json!({
            "status": "error",
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        let class = match self {
            CliError::Read { .. } => "config",
            CliError::Config(e) => {
                v["path"] = json!(e.path());
                match e {
                    ConfigError::Parse { line, column, .. } => {
                        v["line"] = json!(line);
                        v["column"] = json!(column);
                    }
                    ConfigError::Precondition(issues) => v["issues"] = json!(issues),
                    ConfigError::Schema { .. } => {}
                }
                "config"
            }
            CliError::Numeric(_) => "numeric",
            CliError::Io { .. } => "io",
        };
        v["class"] = json!(class);
        v
    }
}

/// Read and validate a configuration file.
pub fn read_config(path: &std::path::Path, fallback: Option<ExperimentKind>) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Read {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(load_config(&text, fallback)?)
}
