use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error("duplicate reading for {0}")]
    DuplicateReading(String),

    #[error("no composition for transformer {transformer_id} on {date}")]
    MissingComposition {
        transformer_id: String,
        date: NaiveDate,
    },

    #[error("invalid load composition: {0}")]
    InvalidComposition(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("day-of-year {0} is absent from every history year")]
    MissingDayOfYear(usize),

    #[error("cannot fit {k} components to {points} points")]
    TooFewPoints { k: usize, points: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("covariance is singular after regularization (det = {0:e})")]
    SingularCovariance(f64),

    #[error("top-oil loop did not converge after {passes} passes (residual {residual:.4} °C)")]
    NonConvergence { passes: usize, residual: f64 },

    #[error("equivalent aging stays at or below 1 ({f_eqa:.4}) even at {scale} times the shape")]
    RatingUnbounded { scale: f64, f_eqa: f64 },

    #[error("{failed} of {total} days failed, above the {limit_pct}% limit")]
    TooManyFailures {
        failed: usize,
        total: usize,
        limit_pct: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(source_name: &str, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }
}
