use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of the operation (negative time, eps outside (0,1), ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Vector or segment lengths that do not line up.
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("ellipticity violated: a(x) = {value} at x = {x}")]
    Ellipticity { x: f64, value: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("modulus N vanishes at s = {0} inside the integration range")]
    SingularModulus(f64),

    #[error("fixed-point iteration did not converge after {iters} iterations (last residual {residual:e})")]
    NonConvergence { iters: usize, residual: f64 },

    #[error("blowup at t = {t}: state norm {norm:e}")]
    Blowup { t: f64, norm: f64 },

    #[error("no admissible T1: {0}")]
    NoAdmissibleT1(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::Blowup { .. } | Error::SingularModulus(_)
        )
    }

    pub(crate) fn shape(expected: usize, got: usize) -> Self {
        Error::Shape { expected, got }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
