use thiserror::Error;

use crate::model::ModuleId;

/// Errors surfaced by the simulator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid body model: {0}")]
    InvalidModel(String),

    #[error("config error at line {line}: {msg}")]
    ConfigSyntax { line: usize, msg: String },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("invalid value for `{key}`: {msg}")]
    InvalidValue { key: String, msg: String },

    #[error("simulation diverged at t = {t:.4} s: joint {joint} at {angle:.4} rad")]
    Diverged { t: f64, joint: ModuleId, angle: f64 },

    #[error("module {0} expected a down-channel message from the module above")]
    MissingDownChannel(ModuleId),

    #[error("controller period {got} s does not match the configured {expected} s")]
    PeriodMismatch { expected: f64, got: f64 },

    #[error("topology: {0}")]
    Topology(String),

    #[error("no arc {dst} <- {src} in the topology")]
    NoSuchArc { src: String, dst: String },

    #[error("max-consensus did not converge within {0} iterations")]
    NoConvergence(usize),
}

impl SimError {
    /// Errors caused by the configuration rather than by the simulation.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            SimError::InvalidModel(_)
                | SimError::ConfigSyntax { .. }
                | SimError::UnknownKey(_)
                | SimError::InvalidValue { .. }
        )
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
