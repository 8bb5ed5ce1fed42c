use thiserror::Error;

/// Rejected physical parameters or configuration values.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("rate ordering violated: need gamma_t < gamma0 < gamma_opt, got {gamma_t} / {gamma0} / {gamma_opt}")]
    RateOrdering {
        gamma_t: f64,
        gamma0: f64,
        gamma_opt: f64,
    },
    #[error("{name} must be {requirement}, got {value}")]
    OutOfRange {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("{0}")]
    Invalid(String),
}

impl ParamError {
    pub(crate) fn range(name: &'static str, requirement: &'static str, value: f64) -> Self {
        ParamError::OutOfRange {
            name,
            requirement,
            value,
        }
    }
}

/// Failures of the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("integration did not converge to {tol:e} within t = {t_max} (last derivative norm {residual:e})")]
    NonConvergence { t_max: f64, tol: f64, residual: f64 },
    #[error("atomic state became unstable at z index {z_index}, t index {t_index} (norm {norm:e})")]
    Stability {
        z_index: usize,
        t_index: usize,
        norm: f64,
    },
    #[error("time step {dt} violates the stability bound {bound} for {mode} mode")]
    StepTooLarge {
        dt: f64,
        bound: f64,
        mode: &'static str,
    },
    #[error("input spectrum has {fraction:e} of its power near the Nyquist frequency")]
    Aliasing { fraction: f64 },
    #[error("retrieved trace still at {ratio:e} of its peak power at the end of the window")]
    Window { ratio: f64 },
    #[error("saturation {s} outside the populariton validity window [0.1, 10]")]
    Validity { s: f64 },
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// A run configuration that cannot be parsed or fails validation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("malformed configuration: {0}")]
    Parse(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid configuration: {0}")]
    Param(#[from] ParamError),
}
