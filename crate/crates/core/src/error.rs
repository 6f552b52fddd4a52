use thiserror::Error;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad input values or configuration.
    Config,
    /// The time-domain run could not continue.
    Simulation,
    /// The requested design or reference cannot be met.
    Design,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("duty ratio {0} is outside the open interval (0, 1)")]
    DutyOutOfRange(f64),

    #[error("voltage gain {gain} is unreachable: this converter needs V_o/V_in > 2")]
    GainUnreachable { gain: f64 },

    #[error("voltage gain {gain} lies on the D = 0 boundary and has no interior duty ratio")]
    GainAtBoundary { gain: f64 },

    #[error("{component} = {chosen:e} is below its critical value {minimum:e}")]
    BelowCritical {
        component: &'static str,
        chosen: f64,
        minimum: f64,
    },

    #[error("reference {reference} V is outside the reachable range {floor:.3}..{ceiling:.3} V")]
    UnreachableReference {
        reference: f64,
        floor: f64,
        ceiling: f64,
    },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("discontinuous conduction at t = {t:.9e} s: {inductor} current reached zero")]
    Dcm { t: f64, inductor: &'static str },

    #[error("state became non-finite at t = {t:.9e} s")]
    NonFinite { t: f64 },

    #[error("no consistent conduction pattern at t = {t:.9e} s")]
    Inconsistent { t: f64 },

    #[error("device switching chatters at t = {t:.9e} s")]
    Chattering { t: f64 },
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidParameter { .. }
            | Error::DutyOutOfRange(_)
            | Error::InvalidScenario(_) => ErrorCategory::Config,
            Error::GainUnreachable { .. }
            | Error::GainAtBoundary { .. }
            | Error::BelowCritical { .. }
            | Error::UnreachableReference { .. } => ErrorCategory::Design,
            Error::Dcm { .. }
            | Error::NonFinite { .. }
            | Error::Inconsistent { .. }
            | Error::Chattering { .. } => ErrorCategory::Simulation,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
