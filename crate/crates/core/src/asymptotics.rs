//! Endpoint behaviour of the problem.
//!
//! * the limits `h(u)/u^alpha` as `u -> 0+` and `-h(u)/(1-u)^alpha` as
//!   `u -> 1-`, either supplied in closed form or extrapolated along a
//!   dyadic ladder;
//! * `M(t) = t^(alpha+1) - beta t^alpha + gamma` on `t >= 0`: its minimum in
//!   closed form and its roots. With `beta = c g(0) - f(0)` and
//!   `gamma = h0` the roots are the only admissible values of `z'(0)`.
//! * the start slope at `u = 1`, the positive root of
//!   `s^(alpha+1) + (c g(1) - f(1)) s^alpha + h1`.

use serde::Serialize;

use crate::error::{Error, Result, Side};
use crate::model::{LimitValue, ProblemSpec};

/// Dyadic ladder exponents: samples at `2^-k` from the endpoint.
pub const LADDER: std::ops::RangeInclusive<i32> = 10..=40;
/// A tail whose last five samples all exceed this and increase is divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e8;
/// Oscillating tails with relative spread above this have no limit.
pub const NO_LIMIT_SPREAD: f64 = 1e-2;
/// Relative disagreement between an override and the extrapolation that
/// triggers a warning.
pub const OVERRIDE_MISMATCH: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    AnalyticOverride,
    Extrapolated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularLimit {
    pub value: LimitValue,
    pub side: Side,
    pub provenance: Provenance,
    /// Sampled ratios along the ladder, nearest-to-endpoint last. Empty when
    /// an override was given and the extrapolation failed.
    pub diagnostics: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Decide the limit of a nonnegative sequence sampled at geometrically
/// shrinking distances from the endpoint.
///
/// Divergence is declared when the tail grows past [`DIVERGENCE_THRESHOLD`]
/// or when it grows like a stable power of the distance (`u^-p`, `p >= 0.05`,
/// constant growth factor per halving). Otherwise the value is the Aitken
/// extrapolation of the last three samples.
pub fn extrapolate(samples: &[f64], side: Side) -> Result<LimitValue> {
    let n = samples.len();
    assert!(n >= 6, "need at least six ladder samples");
    let tail = &samples[n - 5..];
    let increasing = tail.windows(2).all(|w| w[1] > w[0]);
    if increasing && tail.iter().all(|&r| r > DIVERGENCE_THRESHOLD) {
        return Ok(LimitValue::PosInfinite);
    }
    if increasing {
        let exps: Vec<f64> = samples[n - 6..]
            .windows(2)
            .map(|w| (w[1] / w[0]).log2())
            .collect();
        let lo = exps.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if lo >= 0.05 && hi <= 1.1 * lo {
            return Ok(LimitValue::PosInfinite);
        }
    }

    let scale = tail.iter().fold(0.0f64, |m, &r| m.max(r.abs()));
    let spread = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let monotone = increasing || tail.windows(2).all(|w| w[1] <= w[0]);
    if !monotone && spread > NO_LIMIT_SPREAD * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NoLimit {
            side,
            spread: spread / scale,
        });
    }

    let aitken = |a: f64, b: f64, c: f64| {
        let (d0, d1) = (b - a, c - b);
        let den = d1 - d0;
        (d1 * d0 > 0.0 && d1 / d0 < 1.0 && den.abs() > 1e-14 * scale).then(|| c - d1 * d1 / den)
    };
    let (r1, r2) = (samples[n - 2], samples[n - 1]);
    // Two overlapping Aitken estimates must agree; a tail that is not
    // contracting geometrically (e.g. logarithmic growth) has none.
    let mut value = match (
        aitken(samples[n - 4], samples[n - 3], r1),
        aitken(samples[n - 3], r1, r2),
    ) {
        (Some(a1), Some(a2)) if (a1 - a2).abs() <= 1e-6 * a2.abs().max(scale) => a2,
        _ if (r2 - r1).abs() <= 1e-10 * scale => r2,
        _ => {
            return Err(Error::NoLimit {
                side,
                spread: spread / scale.max(f64::MIN_POSITIVE),
            })
        }
    };
    let ladder_scale = samples.iter().fold(0.0f64, |m, &r| m.max(r.abs()));
    if value.abs() <= 1e-10 * ladder_scale || value < 0.0 {
        value = 0.0;
    }
    Ok(LimitValue::Finite(value))
}

fn ladder_samples(spec: &ProblemSpec, side: Side) -> Result<Vec<f64>> {
    LADDER
        .map(|k| {
            let d = (-(k as f64)).exp2();
            let u = match side {
                Side::Zero => d,
                Side::One => 1.0 - d,
            };
            Ok(spec.eval_h(u)? / d.powf(spec.alpha))
        })
        .collect()
}

fn singular_limit(spec: &ProblemSpec, side: Side) -> Result<SingularLimit> {
    let sign = match side {
        Side::Zero => 1.0,
        Side::One => -1.0,
    };
    let orient = |v: LimitValue| match v {
        LimitValue::Finite(x) => LimitValue::Finite(if x == 0.0 { 0.0 } else { sign * x }),
        LimitValue::PosInfinite | LimitValue::NegInfinite => {
            if sign > 0.0 {
                LimitValue::PosInfinite
            } else {
                LimitValue::NegInfinite
            }
        }
    };
    let samples = ladder_samples(spec, side)?;
    let extrapolated = extrapolate(&samples, side).map(orient);
    let overridden = match side {
        Side::Zero => spec.h0_override,
        Side::One => spec.h1_override,
    };
    let diagnostics: Vec<f64> = samples.iter().map(|r| sign * r).collect();
    match overridden {
        None => Ok(SingularLimit {
            value: extrapolated?,
            side,
            provenance: Provenance::Extrapolated,
            diagnostics,
            warning: None,
        }),
        Some(value) => {
            let warning = match extrapolated {
                Ok(est) if !limits_agree(value, est) => Some(format!(
                    "closed-form limit {value} disagrees with sampled estimate {est} ({side})"
                )),
                Ok(_) => None,
                Err(e) => Some(format!(
                    "closed-form limit {value} used; sampling failed: {e}"
                )),
            };
            Ok(SingularLimit {
                value,
                side,
                provenance: Provenance::AnalyticOverride,
                diagnostics,
                warning,
            })
        }
    }
}

fn limits_agree(a: LimitValue, b: LimitValue) -> bool {
    match (a, b) {
        (LimitValue::Finite(x), LimitValue::Finite(y)) => {
            (x - y).abs() <= OVERRIDE_MISMATCH * x.abs().max(y.abs()).max(1e-12)
        }
        _ => a == b,
    }
}

/// `lim h(u)/u^alpha` as `u -> 0+`, in `[0, +inf]`.
pub fn singular_limit_zero(spec: &ProblemSpec) -> Result<SingularLimit> {
    singular_limit(spec, Side::Zero)
}

/// `lim -h(u)/(1-u)^alpha` as `u -> 1-`, in `[-inf, 0]`.
pub fn singular_limit_one(spec: &ProblemSpec) -> Result<SingularLimit> {
    singular_limit(spec, Side::One)
}

/// `M(t) = t^(alpha+1) - beta t^alpha + gamma`.
pub fn m_value(alpha: f64, beta: f64, gamma: f64, t: f64) -> f64 {
    t.powf(alpha) * (t - beta) + gamma
}

fn m_derivative(alpha: f64, beta: f64, t: f64) -> f64 {
    (alpha + 1.0) * t.powf(alpha) - alpha * beta * t.powf(alpha - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MMin {
    pub argmin: f64,
    pub min_value: f64,
}

/// Global minimum of `M` over `t >= 0`. For `beta > 0` the minimiser is
/// `alpha beta / (alpha + 1)`; otherwise `M` is nondecreasing and the
/// minimum is `M(0) = gamma`.
pub fn m_min(alpha: f64, beta: f64, gamma: f64) -> MMin {
    if beta > 0.0 {
        let ratio = beta / (alpha + 1.0);
        MMin {
            argmin: alpha * ratio,
            min_value: gamma - alpha.powf(alpha) * ratio.powf(alpha + 1.0),
        }
    } else {
        MMin {
            argmin: 0.0,
            min_value: gamma,
        }
    }
}

/// `(alpha+1) (gamma / alpha^alpha)^(1/(alpha+1)) - beta`, which has the
/// sign of the minimum of `M`.
pub fn m_sign_indicator(alpha: f64, beta: f64, gamma: f64) -> f64 {
    (alpha + 1.0) * (gamma / alpha.powf(alpha)).powf(1.0 / (alpha + 1.0)) - beta
}

/// Band around zero within which the minimum of `M` counts as zero.
pub fn double_root_band(gamma: f64) -> f64 {
    1e-12 * gamma.max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaRoots {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Distinct nonnegative roots, ascending.
    pub roots: Vec<f64>,
    /// A single tangential root (minimum within the double-root band).
    pub double: bool,
    pub min_value: f64,
    pub argmin: f64,
}

impl EtaRoots {
    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    /// Is `slope` within `rel` (relative) of some root? Roots at zero are
    /// matched with absolute tolerance `rel * 1e-2`.
    pub fn matches(&self, slope: f64, rel: f64) -> bool {
        self.roots
            .iter()
            .any(|&r| (slope - r).abs() <= rel * r.max(1e-2))
    }
}

// Bisection on a sign change until the bracket is relatively tight or
// exhausted in floating point, then guarded Newton polish.
fn refine_root(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> f64 {
    let f_lo_positive = f(lo) > 0.0;
    for _ in 0..2200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-13 * hi.abs() {
            break;
        }
        if (f(mid) > 0.0) == f_lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (a, b) = (lo, hi);
    let mut t = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
    for _ in 0..3 {
        let d = df(t);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let next = t - f(t) / d;
        if next < a || next > b || !(f(next).abs() < f(t).abs()) {
            break;
        }
        t = next;
    }
    t
}

/// Nonnegative roots of `M(t) = t^(alpha+1) - beta t^alpha + gamma`.
pub fn eta_roots(alpha: f64, beta: f64, gamma: f64) -> EtaRoots {
    let MMin { argmin, min_value } = m_min(alpha, beta, gamma);
    let mut out = EtaRoots {
        alpha,
        beta,
        gamma,
        roots: Vec::new(),
        double: false,
        min_value,
        argmin,
    };
    let m = |t: f64| m_value(alpha, beta, gamma, t);
    let dm = |t: f64| m_derivative(alpha, beta, t);
    if gamma == 0.0 {
        out.roots.push(0.0);
        if beta > 0.0 {
            out.roots.push(beta);
        }
        return out;
    }
    if beta <= 0.0 || min_value > double_root_band(gamma) {
        return out;
    }
    if min_value.abs() <= double_root_band(gamma) {
        out.roots.push(argmin);
        out.double = true;
        return out;
    }
    out.roots.push(refine_root(0.0, argmin, m, dm));
    out.roots.push(refine_root(argmin, beta, m, dm));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StartSlope {
    /// `|z'(1)|`, so that `z(u) ~ slope * (1 - u)`.
    pub slope: f64,
    /// `h1 = 0`: the slope comes from the drift alone.
    pub degenerate: bool,
}

/// Positive root `s` of `s^(alpha+1) + drift s^alpha + h1 = 0`, where
/// `drift = c g(1) - f(1)` and `h1 <= 0`.
pub fn eta1_slope(alpha: f64, drift: f64, h1: LimitValue) -> Result<StartSlope> {
    let gamma = match h1 {
        LimitValue::NegInfinite => return Err(Error::LimitInfinite { side: Side::One }),
        LimitValue::PosInfinite => return Err(Error::InvalidArgument("h1 must be <= 0".into())),
        LimitValue::Finite(v) if v > 0.0 => {
            return Err(Error::InvalidArgument(format!("h1 must be <= 0, got {v}")))
        }
        LimitValue::Finite(v) => -v,
    };
    let floor = (-drift).max(0.0);
    if gamma == 0.0 {
        return Ok(StartSlope {
            slope: floor,
            degenerate: true,
        });
    }
    let p = |s: f64| s.powf(alpha) * (s + drift) - gamma;
    let dp = |s: f64| (alpha + 1.0) * s.powf(alpha) + alpha * drift * s.powf(alpha - 1.0);
    let hi = floor + gamma.powf(1.0 / (alpha + 1.0));
    Ok(StartSlope {
        slope: refine_root(floor, hi, p, dp),
        degenerate: false,
    })
}
