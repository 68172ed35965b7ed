use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid pulse: {0}")]
    InvalidPulse(String),

    #[error("n_samples must be a power of two >= 1024, got {0}")]
    BadSampleCount(usize),

    #[error("frequency span too small: {0}")]
    SpanTooSmall(String),

    #[error("time window too short: envelope edge magnitude {edge:.3e} x peak exceeds 1e-8")]
    WindowTooShort { edge: f64 },

    #[error("envelope is below the magnitude floor everywhere")]
    EnvelopeBelowFloor,

    #[error("invalid emitter parameters: {0}")]
    InvalidParams(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid tolerances: {0}")]
    InvalidTolerance(String),

    #[error("step size underflow at t = {t:.6e} s (h = {h:.3e} s)")]
    StepUnderflow { t: f64, h: f64 },

    #[error("invariant violated at t = {t:.6e} s: {what}")]
    InvariantViolation { t: f64, what: String },

    #[error("time {t:.6e} s outside the simulated window [{start:.6e}, {end:.6e}]")]
    OutsideWindow { t: f64, start: f64, end: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("tau_max {tau_max:.3e} s is below the required {required:.3e} s")]
    TauMaxTooSmall { tau_max: f64, required: f64 },

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("emission threshold never crossed")]
    NoOnset,

    #[error("invalid sweep plan: {0}")]
    InvalidPlan(String),
}
