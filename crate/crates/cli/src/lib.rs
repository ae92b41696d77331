//! Command implementations behind the `pairlink` binary.
//!
//! Every command renders to a `String`; the binary decides where it goes.

pub mod commands;
pub mod config;
pub mod figures;
pub mod verify;

use std::path::PathBuf;

pub use config::{ConfigError, ScenarioConfig, SourceSpec};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Domain(#[from] pairlink::Error),
    #[error("{0}")]
    Runtime(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("verification failed")]
    VerificationFailed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Domain(_) | CliError::Runtime(_) | CliError::Write { .. } => 1,
            CliError::VerificationFailed => 3,
        }
    }
}

/// Fixed-width scientific notation with 16 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.15e}")
}

/// Joins already formatted fields into one LF-terminated CSV line.
pub fn csv_line<S: AsRef<str>>(fields: &[S]) -> String {
    let mut line = fields
        .iter()
        .map(AsRef::as_ref)
        .collect::<Vec<_>>()
        .join(",");
    line.push('\n');
    line
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_is_locale_free_and_precise() {
        assert_eq!(fmt_num(3e-7), "3.000000000000000e-7");
        assert_eq!(fmt_num(1.0), "1.000000000000000e0");
        let x = std::f64::consts::LN_2;
        assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::VerificationFailed.exit_code(), 3);
        assert_eq!(CliError::Domain(pairlink::Error::EmptyDistribution).exit_code(), 1);
    }
}
