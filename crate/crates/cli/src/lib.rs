//! Front end for the `hgvm` binary: configuration parsing and the CSV,
//! JSON and SVG writers. The binary itself only wires these to the core
//! library.

pub mod config;
pub mod output;
pub mod plot;

pub use config::{parse_config, DesignTarget, RunConfig};

use hgvm_core::{Error as CoreError, ErrorCategory};

/// Exit statuses.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SIMULATION: i32 = 3;
pub const EXIT_DESIGN: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}{message}", line.map_or(String::new(), |l| format!("line {l}: ")))]
    Config {
        line: Option<usize>,
        message: String,
    },

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(line: Option<usize>, message: String) -> Self {
        CliError::Config { line, message }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Machine-readable category name, paired with [`CliError::exit_code`].
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config { .. } | CliError::Io { .. } => "config",
            CliError::Core(e) => match e.category() {
                ErrorCategory::Config => "config",
                ErrorCategory::Simulation => "simulation",
                ErrorCategory::Design => "design",
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "simulation" => EXIT_SIMULATION,
            "design" => EXIT_DESIGN,
            _ => EXIT_CONFIG,
        }
    }
}
