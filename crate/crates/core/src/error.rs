use thiserror::Error;

/// Errors raised by the samplers, the continuum integrator and the runners.
#[derive(Debug, Error)]
pub enum Error {
    #[error("importance weight numerator for walker {index} is not finite")]
    NonFiniteWeight { index: usize },

    #[error("every importance weight numerator is zero")]
    DegenerateWeights,

    #[error("acceptance ratio is not finite (log Z forward = {log_z_forward}, log Z reverse = {log_z_reverse})")]
    NonFiniteRatio {
        log_z_forward: f64,
        log_z_reverse: f64,
    },

    #[error("ensembles differ at {count} positions; the oracle needs exactly one")]
    DiffersOnMultipleIndices { count: usize },

    #[error("matrix is not positive definite even with relative jitter {max_jitter:e}")]
    NotFactorizable { max_jitter: f64 },

    #[error("mean-field right-hand side is not finite (Z_rho = {z})")]
    NonFiniteRhs { z: f64 },

    #[error("density became negative (min {min:e}) at t = {t}; reduce dt")]
    NegativityBreach { t: f64, min: f64 },

    #[error("decay fit window holds {found} points, at least {required} are needed")]
    InsufficientWindow { found: usize, required: usize },

    #[error("no autocorrelation window below {limit} satisfies W >= c * tau(W)")]
    WindowNotConverged { limit: usize },

    #[error("enumeration would need {states} ensemble states (limit {limit})")]
    TooLarge { states: usize, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config field `{field}`: {message}")]
    ConfigInvalid { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::ConfigInvalid {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad input configuration rather than numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::ConfigInvalid { .. } | Error::Json(_) | Error::InvalidArgument(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
