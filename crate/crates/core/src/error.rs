use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = DfaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DfaError {
    #[error("climate member `{member}` has no series for `{variable}` and no fallback member supplies it")]
    MissingVariable { member: String, variable: String },

    #[error("hazard `{hazard}` needs covariate `{covariate}`, which is missing or not finite")]
    MissingCovariate { hazard: String, covariate: String },

    #[error("{what} must be positive (got {value})")]
    NonPositive { what: &'static str, value: f64 },

    #[error("{what}: need at least {needed} values, got {got}")]
    TooShort {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("{what}: length mismatch ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("IRLS did not converge after {iterations} iterations (log-likelihood trace: {trace:?})")]
    NonConvergence { iterations: usize, trace: Vec<f64> },

    #[error("{0}: series has zero variance")]
    ZeroVariance(&'static str),

    #[error("{0}: empty input")]
    Empty(&'static str),

    #[error("duplicate knot year {0}")]
    DuplicateKnot(i32),

    #[error("knot years must be strictly increasing ({prev} then {next})")]
    UnorderedKnots { prev: i32, next: i32 },

    #[error("solvency ratio undefined: total reinsurance premium is {0}")]
    UndefinedSolvency(f64),

    #[error("{0} is not finite")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("scenario `{scenario}`, path {path}, year {year}: {source}")]
    PathFailure {
        scenario: String,
        path: usize,
        year: i32,
        #[source]
        source: Box<DfaError>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: malformed record: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Toml {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
}

impl DfaError {
    /// Errors caused by bad user input (configuration, data files) rather than
    /// by a failure during simulation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            DfaError::Config(_)
                | DfaError::DuplicateKnot(_)
                | DfaError::UnorderedKnots { .. }
                | DfaError::Toml { .. }
                | DfaError::Parse { .. }
                | DfaError::Csv { .. }
                | DfaError::MissingVariable { .. }
                | DfaError::MissingCovariate { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DfaError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        DfaError::Csv {
            path: path.into(),
            source,
        }
    }
}
