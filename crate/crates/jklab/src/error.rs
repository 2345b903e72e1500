use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid scale function: {0}")]
    InvalidScale(String),

    #[error("{what} is not strictly increasing between r={r} and R={big_r}")]
    NotMonotone { what: String, r: f64, big_r: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("size cap exceeded: {what} needs {requested}, cap is {cap}")]
    SizeCap {
        what: String,
        requested: usize,
        cap: usize,
    },

    #[error("radius {radius} exceeds the guard radius {guard} (diameter/4)")]
    Guard { radius: f64, guard: f64 },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("calibration error: lower {lower} > upper {upper} at t={t}, d={d}")]
    Calibration {
        t: f64,
        d: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
