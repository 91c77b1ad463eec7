//! Error type shared by all modules.

/// Crate-wide error enum. Validation failures carry enough context to point
/// at the offending input (index, parameter name, step).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("eigenvalue at position {index} must be positive and finite, got {value}")]
    NonPositiveEigenvalue { index: usize, value: f64 },

    #[error(
        "eigenvalue at position {index} ({value}) exceeds its predecessor ({previous}); \
         spectra must be non-increasing"
    )]
    NonMonotoneEigenvalue {
        index: usize,
        previous: f64,
        value: f64,
    },

    #[error("invalid {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("step {t} outside the schedule horizon 1..={horizon}")]
    StepOutOfRange { t: usize, horizon: usize },

    #[error("operation requires a {expected} schedule, got {found}")]
    ScheduleVariantMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error(
        "exact oracle requires the Gaussian feature model (alpha = 3, beta = 1); \
         got alpha = {alpha}, beta = {beta}. Use Monte Carlo for other models"
    )]
    UnsupportedModel { alpha: f64, beta: f64 },

    #[error("run {run} diverged at step {t} (gamma_t = {gamma:e}): |w| exceeded 1e300")]
    Diverged { run: usize, t: usize, gamma: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }
}
