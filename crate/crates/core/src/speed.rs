//! The critical speed `c*`: the smallest speed whose trajectory reaches
//! `z = 0` at `u = 0`.
//!
//! Fronts exist exactly for `c >= c*`, so the classification of a shot is
//! monotone in `c` and bisection between the a priori bounds converges.

use serde::Serialize;

use crate::asymptotics::singular_limit_zero;
use crate::bounds::{self, ExistenceCertificate, SpeedBounds};
use crate::error::{Error, Result};
use crate::model::{LimitValue, ProblemSpec};
use crate::shooting::{solve_with, Shooter, SolveOutcome, Trajectory};

/// Whether fronts exist for some speed: exactly when `h0_alpha` is finite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    NoFrontsForAnyC,
    FrontsExistAboveCStar,
}

impl Verdict {
    pub fn from_limit(h0: LimitValue) -> Verdict {
        if h0.is_finite() {
            Verdict::FrontsExistAboveCStar
        } else {
            Verdict::NoFrontsForAnyC
        }
    }
}

pub fn verdict(spec: &ProblemSpec) -> Result<Verdict> {
    Ok(Verdict::from_limit(singular_limit_zero(spec)?.value))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedMethod {
    /// The bounds agree within the tolerance; no shooting needed.
    CoincidingBounds,
    /// The lower bound itself admits a front.
    LowerBoundConnects,
    Bisection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BracketStep {
    pub low: f64,
    pub high: f64,
}

/// Shots just above and below `c*` that confirm the threshold.
#[derive(Debug, Clone, Serialize)]
pub struct SpeedCertificate {
    pub above: Trajectory,
    /// Absent when `c* - tol` falls below the lower bound, where no front
    /// can exist anyway.
    pub below: Option<Trajectory>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpeedResult {
    pub c_star: f64,
    pub tolerance: f64,
    pub method: SpeedMethod,
    pub bounds: SpeedBounds,
    pub bracket_history: Vec<BracketStep>,
    /// Number of shots, including the certificate shots.
    pub iterations: usize,
    pub certificate: Option<SpeedCertificate>,
}

/// Bisect for `c*` to within `tol_c`.
pub fn critical_speed(spec: &ProblemSpec, tol_c: f64) -> Result<SpeedResult> {
    if !(tol_c > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "speed tolerance must be positive, got {tol_c}"
        )));
    }
    let bounds = bounds::estimate(spec)?;
    if bounds.width() <= tol_c {
        return Ok(SpeedResult {
            c_star: 0.5 * (bounds.lower + bounds.upper),
            tolerance: tol_c,
            method: SpeedMethod::CoincidingBounds,
            bounds,
            bracket_history: Vec::new(),
            iterations: 0,
            certificate: None,
        });
    }
    let shooter = Shooter::new(spec)?;
    let mut shots = 0usize;
    let mut shoot = |c: f64| {
        shots += 1;
        shooter.shoot(c)
    };

    let mut hi = bounds.upper;
    let mut above = shoot(hi)?;
    if !above.connects() {
        // Fronts exist above the upper bound; a miss here is numerical.
        hi = bounds.upper + 1.0;
        above = shoot(hi)?;
        if !above.connects() {
            return Err(Error::BracketFailure {
                c_low: bounds.lower,
                c_high: hi,
                detail: "no connection above the upper bound".into(),
            });
        }
    }
    let mut lo = bounds.lower;
    let at_lower = shoot(lo)?;
    if at_lower.connects() {
        return Ok(SpeedResult {
            c_star: lo,
            tolerance: tol_c,
            method: SpeedMethod::LowerBoundConnects,
            bounds,
            bracket_history: vec![BracketStep { low: lo, high: hi }],
            iterations: shots,
            certificate: Some(SpeedCertificate {
                above: at_lower,
                below: None,
            }),
        });
    }
    let mut history = vec![BracketStep { low: lo, high: hi }];
    while hi - lo >= tol_c {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if shoot(mid)?.connects() {
            hi = mid;
        } else {
            lo = mid;
        }
        history.push(BracketStep { low: lo, high: hi });
    }
    let c_star = 0.5 * (lo + hi);

    let above = shoot(c_star + tol_c)?;
    if !above.connects() {
        return Err(Error::BracketFailure {
            c_low: lo,
            c_high: hi,
            detail: format!("no connection at c* + tol = {}", c_star + tol_c),
        });
    }
    let below = if c_star - tol_c > bounds.lower {
        let t = shoot(c_star - tol_c)?;
        if t.connects() {
            return Err(Error::BracketFailure {
                c_low: lo,
                c_high: hi,
                detail: format!("connection at c* - tol = {}", c_star - tol_c),
            });
        }
        Some(t)
    } else {
        None
    };
    Ok(SpeedResult {
        c_star,
        tolerance: tol_c,
        method: SpeedMethod::Bisection,
        bounds,
        bracket_history: history,
        iterations: shots,
        certificate: Some(SpeedCertificate { above, below }),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Admissibility {
    pub c: f64,
    pub admissible: bool,
    pub outcome: SolveOutcome,
    /// Present when `c` exceeds the upper bound.
    pub certificate: Option<ExistenceCertificate>,
}

/// Does a front with speed `c` exist? Shooting decides; above the upper
/// bound the mean-value certificate is attached as independent evidence.
pub fn admissible(spec: &ProblemSpec, c: f64) -> Result<Admissibility> {
    let shooter = Shooter::new(spec)?;
    let outcome = solve_with(&shooter, c)?;
    let certificate = if shooter.h0.is_finite() {
        let b = bounds::estimate(spec)?;
        if c > b.upper {
            b.certify_existence(c)
        } else {
            None
        }
    } else {
        None
    };
    Ok(Admissibility {
        c,
        admissible: outcome.is_solved(),
        outcome,
        certificate,
    })
}
