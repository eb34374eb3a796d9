use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("action ({i1}, {i2}) lies outside the domain box of radius {radius}")]
    DomainViolation { i1: f64, i2: f64, radius: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid too coarse: {points} points per axis, derivatives of order {order} need at least {needed}")]
    GridTooCoarse { points: usize, order: usize, needed: usize },

    #[error("zero resonance vector")]
    ZeroVector,

    #[error("resonance vector ({0}, {1}) is not primitive")]
    NotPrimitive(i64, i64),

    #[error("channel assumption failed after reduction: {0}")]
    ChannelAssumption(String),

    #[error("small divisor: |k.omega| = {value:.3e} < {bound:.3e} for k = ({k1}, {k2}) at I = ({i1:.6}, {i2:.6})")]
    SmallDivisor { k1: i64, k2: i64, value: f64, bound: f64, i1: f64, i2: f64 },

    #[error("flow escaped the working window at t = {t:.6e}: I = ({i1:.6e}, {i2:.6e})")]
    FlowEscape { t: f64, i1: f64, i2: f64 },

    #[error("flow displacement {displacement:.6e} exceeds the bound {bound:.6e}")]
    DisplacementExceeded { displacement: f64, bound: f64 },

    #[error("step size underflow at t = {t:.6e} (h = {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("maximum number of steps ({0}) exceeded")]
    MaxSteps(usize),

    #[error("perturbation is outside the generic set: max |d f_bar / d theta1| = {0:.3e}")]
    NotGeneric(f64),

    #[error("coefficient fit residual {residual:.3e} exceeds {limit:.3e}")]
    FitResidual { residual: f64, limit: f64 },

    #[error("two-step normal form needs an action-independent perturbation")]
    ActionDependent,

    #[error("experiment flagged: {0}")]
    Flagged(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
