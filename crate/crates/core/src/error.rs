use thiserror::Error;

use crate::expr::ExprError;
use crate::model::ModelError;

/// Which end of `(0, 1)` a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Zero,
    One,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Zero => "u -> 0+",
            Side::One => "u -> 1-",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("no limit of the scaled reaction term as {side}: sampled tail spread {spread:.3e}")]
    NoLimit { side: Side, spread: f64 },
    #[error("the scaled reaction term diverges as {side}")]
    LimitInfinite { side: Side },
    #[error("mean-value integrand diverges at s = 0")]
    SingularDivergence,
    #[error("h(u)/u^alpha is unbounded at 0: no front exists for any speed")]
    ExistenceFails,
    #[error("computed lower bound {lower} exceeds upper bound {upper}")]
    InconsistentBounds { lower: f64, upper: f64 },
    #[error("computed inf of the mean of g is {g0}, expected a positive value")]
    NonPositiveMeanG { g0: f64 },

    #[error("cannot start the backward integration at u = 1: {reason}")]
    StartUndefined { reason: String },
    #[error(
        "start condition is not robust: halving the start offset moved z(1/2) by {deviation:.3e}"
    )]
    StartSensitive { deviation: f64 },
    #[error("step size underflow ({step:.3e}) at u = {u}")]
    StepUnderflow { u: f64, step: f64 },
    #[error("step budget exhausted at u = {u}")]
    TooManySteps { u: f64 },
    #[error("numerical solution reached z <= 0 at interior u = {u}")]
    ZeroCrossing { u: f64 },
    #[error("could not classify the trajectory at c = {c}: z(u_min) = {z_min:.3e}, decade ratio {ratio:.3}")]
    Ambiguous { c: f64, z_min: f64, ratio: f64 },

    #[error("could not bracket the critical speed in [{c_low}, {c_high}]: {detail}")]
    BracketFailure {
        c_low: f64,
        c_high: f64,
        detail: String,
    },

    #[error("trajectory at c = {c} does not connect to zero; nothing to reconstruct")]
    NotASolution { c: f64 },
    #[error("profile reconstruction for alpha = {alpha} needs an explicit reduction exponent")]
    ReductionUnsupported { alpha: f64 },

    #[error("simulation requires {what}")]
    UnsupportedSimulation { what: String },
    #[error("explicit scheme is unstable: dt = {dt} exceeds {limit}")]
    StabilityViolation { dt: f64, limit: f64 },
    #[error("front left the domain at t = {t}")]
    FrontLost { t: f64 },
    #[error("speed fit rejected: residual {residual:.3e} vs speed {speed:.3e}")]
    MeasurementRefused { speed: f64, residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
