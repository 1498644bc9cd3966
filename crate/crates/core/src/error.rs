use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-positive price {price} on {date}")]
    NonPositivePrice { date: NaiveDate, price: f64 },

    #[error("dates must be strictly increasing: {date} follows {previous}")]
    UnorderedDates {
        previous: NaiveDate,
        date: NaiveDate,
    },

    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("series has zero variance; skewness and kurtosis are undefined")]
    ZeroVariance,

    #[error("non-finite value at position {index}")]
    NonFinite { index: usize },

    #[error("{name} = {value} is outside {expected}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("out-of-sample count {requested} exceeds series length {length}")]
    SplitOutOfRange { requested: usize, length: usize },

    #[error("row {row}: {message}")]
    Parse { row: u64, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("length mismatch: {left} returns vs {right} forecasts")]
    LengthMismatch { left: usize, right: usize },

    #[error("dates misaligned at position {index}: return dated {return_date}, forecast dated {forecast_date}")]
    MisalignedDates {
        index: usize,
        return_date: NaiveDate,
        forecast_date: NaiveDate,
    },

    #[error("objective is not finite at the initial point")]
    NonFiniteStart,

    #[error(
        "{model} estimation did not converge after {iterations} iterations \
         (gradient norm {gradient_norm:.3e}, log-likelihood {value:.6}, best point {best_point:?})"
    )]
    NonConvergence {
        model: &'static str,
        best_point: Vec<f64>,
        value: f64,
        gradient_norm: f64,
        iterations: usize,
    },

    #[error("empty VaR history")]
    EmptyHistory,

    #[error("model {model} cannot be forecast from this state")]
    StateMismatch { model: String },
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            expected,
        }
    }
}
