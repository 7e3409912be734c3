use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Csv {
        context: String,
        #[source]
        source: csv::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{file}: column `{column}` is not present in the header")]
    UnknownColumn { file: String, column: String },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("duplicate variable `{0}` in schema")]
    DuplicateVariable(String),

    #[error("duplicate respondent id `{0}`")]
    DuplicateId(String),

    #[error("unknown respondent id `{0}`")]
    UnknownRespondent(String),

    #[error("{file}: line {line}, column `{column}`: `{value}` is not an integer")]
    InvalidInteger {
        file: String,
        line: u64,
        column: String,
        value: String,
    },

    #[error("{file}: line {line}, column `{column}`: `{value}` is not a month-of-birth estimate")]
    InvalidBirthMonth {
        file: String,
        line: u64,
        column: String,
        value: String,
    },

    #[error("value for `{variable}` does not match its kind ({kind})")]
    KindMismatch {
        variable: String,
        kind: &'static str,
    },

    #[error("quasi-identifier must name at least one variable")]
    EmptyQuasiIdentifier,

    #[error("respondent `{respondent}` is missing on quasi-identifier variable `{variable}`")]
    MissingOnQuasiIdentifier {
        respondent: String,
        variable: String,
    },

    #[error("variable `{0}` holds estimated months of birth and cannot form exact anonymity sets")]
    BirthMonthInAnonymitySet(String),

    #[error("no waves supplied")]
    NoWaves,

    #[error("wave {0} does not follow the previous wave")]
    WavesOutOfOrder(String),

    #[error("wave {0} does not share the schema of the first wave")]
    SchemaMismatch(String),

    #[error("invalid year-month `{0}` (expected YYYY-MM)")]
    InvalidYearMonth(String),

    #[error("inconsistent ages: {0}")]
    InconsistentAges(String),

    #[error("sampling fraction {0} is outside (0, 1]")]
    InvalidSamplingFraction(f64),

    #[error("invalid weights for `{variable}`: {reason}")]
    InvalidWeights { variable: String, reason: String },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("indexed and reference n_match counts disagree")]
    OracleMismatch,

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(context: impl Into<String>, source: csv::Error) -> Self {
        Error::Csv {
            context: context.into(),
            source,
        }
    }

    /// True for errors caused by the invocation or its configuration rather
    /// than by a runtime failure.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::UnknownVariable(_)
                | Error::DuplicateVariable(_)
                | Error::EmptyQuasiIdentifier
                | Error::BirthMonthInAnonymitySet(_)
                | Error::InvalidSamplingFraction(_)
                | Error::InvalidWeights { .. }
                | Error::InvalidArgument(_)
                | Error::Config(_)
        )
    }
}
