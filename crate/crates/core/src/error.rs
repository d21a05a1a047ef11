use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParam { key: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("root finder did not converge after {iterations} iterations (bracket width {width:e})")]
    RootNotConverged { iterations: usize, width: f64 },

    #[error("equilibrium residual {residual:e} exceeds {limit:e}")]
    ResidualTooLarge { residual: f64, limit: f64 },

    #[error("integration failed at t={t}: non-finite {field} at node {node}")]
    IntegrationFailure { t: f64, node: usize, field: &'static str },

    #[error("time step {dt:e} exceeds the stability bound {bound:e}")]
    UnstableTimeStep { dt: f64, bound: f64 },

    #[error("monitor `{monitor}` violated at t={t}: {detail}")]
    MonitorViolation { monitor: String, t: f64, detail: String },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("config error (line {line}): {msg}")]
    Config { line: usize, msg: String },

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("missing key `{0}`")]
    MissingKey(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(key: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    /// Coarse failure category, used by the CLI to pick an exit code.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidParam { .. }
            | Error::Config { .. }
            | Error::UnknownKey(_)
            | Error::MissingKey(_)
            | Error::UnknownScenario(_) => ErrorCategory::Config,
            Error::IntegrationFailure { .. }
            | Error::UnstableTimeStep { .. }
            | Error::RootNotConverged { .. }
            | Error::ResidualTooLarge { .. } => ErrorCategory::Solver,
            Error::MonitorViolation { .. } => ErrorCategory::Monitor,
            Error::Domain(_) | Error::NotApplicable(_) | Error::Grid(_) | Error::Io(_) => ErrorCategory::Other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Solver,
    Monitor,
    Other,
}
