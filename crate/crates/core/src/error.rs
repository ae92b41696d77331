use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("empirical distribution has no entries")]
    EmptyDistribution,

    #[error("empirical distribution has {0} entries, at most {max} are supported", max = crate::photon_stats::MAX_EMPIRICAL_TERMS)]
    TooManyTerms(usize),

    #[error("probability p[{index}] = {value} is not in [0, 1]")]
    InvalidProbability { index: usize, value: f64 },

    #[error("probabilities sum to {0}, expected 1 within 1e-9")]
    NotNormalized(f64),

    #[error("{path}:{line}: {message}")]
    ProbabilityFile {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("joint click probabilities sum to {0}, expected 1 within 1e-12")]
    JointNotNormalized(f64),

    #[error("invalid log10 range [{low}, {high}]: low must be below high and both finite")]
    InvalidRange { low: f64, high: f64 },

    #[error("objective is not finite at lambda = {lambda:e}")]
    NonFiniteObjective { lambda: f64 },

    #[error("a sweep needs at least 2 points, got {0}")]
    TooFewPoints(usize),

    #[error("efficiency grid must be non-empty, strictly increasing and inside (0, 1]")]
    InvalidEfficiencyGrid,

    #[error("{0}")]
    Simulation(String),
}
