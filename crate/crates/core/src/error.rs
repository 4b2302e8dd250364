use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },

    #[error("derivative order {0} not supported (expected 2, 3 or 4)")]
    UnsupportedOrder(usize),

    #[error("quadrature did not converge: estimate {estimate:e}, achieved error {achieved:e}, requested {requested:e}")]
    Quadrature {
        estimate: f64,
        achieved: f64,
        requested: f64,
    },

    #[error("noise fit residual {residual:e} exceeds tolerance {tolerance:e}")]
    FitTolerance { residual: f64, tolerance: f64 },

    #[error("integration blew up at t = {t}: X = {x:e}, P = {p:e}")]
    BlowUp { t: f64, x: f64, p: f64 },

    #[error("series too short: {len} samples, need at least {min}")]
    SeriesTooShort { len: usize, min: usize },

    #[error("grid must be non-empty and strictly increasing")]
    BadGrid,

    #[error("trajectory separation left the representable range (ln ratio {log_ratio}) even with renormalization interval {interval}")]
    SeparationRange { log_ratio: f64, interval: f64 },
}
