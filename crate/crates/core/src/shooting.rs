//! Backward shooting from `u = 1` for a fixed speed `c`.
//!
//! The equation `dz/du = c g(u) - f(u) - h(u)/z^alpha` is integrated from
//! `u = 1 - delta` down to `u_min`. Integrating towards `u = 0` is the
//! stable direction: nearby trajectories are attracted to each other at a
//! rate `alpha h / z^(alpha+1)`. At the bottom the trajectory either tends
//! to zero like `lambda u`, with `lambda` a root of `M`, or to a positive
//! value, in which case `c` is below the critical speed.

use serde::Serialize;

use crate::asymptotics::{self, eta1_slope, eta_roots, EtaRoots, StartSlope};
use crate::error::{Error, Result};
use crate::interp::CubicHermite;
use crate::model::{LimitValue, Numerics, ProblemSpec};
use crate::ode::{Dopri5, OdeError, Stats, Switching, Tolerances};
use crate::quadrature;

/// Below this, `h/z^alpha` is evaluated as `(h/u^alpha) (u/z)^alpha` so that
/// neither factor under- or overflows.
const SMALL_U: f64 = 1e-2;
/// Allowed absolute change of `z(1/2)` when the start offset is halved.
const START_SENSITIVITY: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootOptions {
    pub delta_start: f64,
    pub u_min: f64,
    pub tol_zero: f64,
    pub tolerances: Tolerances,
    /// Re-run non-series starts with half the offset and compare.
    pub check_start: bool,
}

impl From<&Numerics> for ShootOptions {
    fn from(n: &Numerics) -> Self {
        ShootOptions {
            delta_start: n.delta_start,
            u_min: n.u_min,
            tol_zero: n.tol_zero,
            tolerances: Tolerances {
                rtol: n.rtol,
                atol: n.atol,
                ..Tolerances::default()
            },
            check_start: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    ConnectsToZero,
    PositiveLimit,
}

/// How `z(1 - delta)` was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StartKind {
    /// `z = s delta` with `s` the positive root at `u = 1`.
    Series { slope: f64 },
    /// `h1 = 0` and `s = max(0, -(c g(1) - f(1))) > 0`: `z = s delta`.
    Degenerate { slope: f64 },
    /// `h1 = 0` with zero slope: `z = (h / (c g - f))^(1/alpha)`, the
    /// quasi-steady balance the trajectory follows near `u = 1`.
    QuasiSteady,
    /// `h1 = -inf`: `z^(alpha+1)/(alpha+1) = integral_{1-delta}^1 h`.
    Balance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub u: f64,
    pub z: f64,
    pub dz: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub c: f64,
    pub alpha: f64,
    /// Accepted integration points, `u` decreasing from `1 - delta`.
    #[serde(skip)]
    pub samples: Vec<Sample>,
    pub classification: Classification,
    pub start: StartKind,
    pub delta: f64,
    pub u_end: f64,
    pub z_end: f64,
    /// `(z(u)/u) / (z(10u)/(10u))` at the last decade: about 1 when
    /// `z ~ lambda u`, about 10 when `z` levels off.
    pub decade_ratio: f64,
    /// `z(u_end)/u_end` for connecting trajectories.
    pub slope_at_zero: Option<f64>,
    /// `|z'(1)|`; `None` for a balance start, where it is infinite.
    pub slope_at_one: Option<f64>,
    pub eta0_roots: EtaRoots,
    /// Change in `z(1/2)` when the start offset was halved.
    pub start_deviation: Option<f64>,
    /// `max |z(u) - z(0.1) - integral_0.1^u F|` over `u` in `[0.1, 0.9]`.
    pub volterra_residual: Option<f64>,
    pub stats: Stats,
}

impl Trajectory {
    pub fn connects(&self) -> bool {
        self.classification == Classification::ConnectsToZero
    }

    /// Hermite interpolant through the samples with the stored slopes,
    /// knots ascending.
    pub fn interpolant(&self) -> CubicHermite {
        let n = self.samples.len();
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        let mut d = Vec::with_capacity(n);
        for s in self.samples.iter().rev() {
            x.push(s.u);
            y.push(s.z);
            d.push(s.dz);
        }
        CubicHermite::with_slopes(x, y, d)
    }

    /// Samples ordered by increasing `u`.
    pub fn ascending(&self) -> impl Iterator<Item = &Sample> {
        self.samples.iter().rev()
    }

    /// Smallest `z` on `[a, b]` over the samples inside and the
    /// interpolated endpoint values. `None` if `[a, b]` is not covered.
    pub fn min_on(&self, a: f64, b: f64) -> Option<f64> {
        let (lo, hi) = (self.samples.last()?.u, self.samples.first()?.u);
        if !(a <= b && a >= lo && b <= hi) || self.samples.len() < 2 {
            return None;
        }
        let p = self.interpolant();
        self.samples
            .iter()
            .filter(|s| s.u >= a && s.u <= b)
            .map(|s| s.z)
            .fold(p.eval(a).min(p.eval(b)), f64::min)
            .into()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,z,dz\n");
        for s in self.ascending() {
            out.push_str(&format!("{:e},{:e},{:e}\n", s.u, s.z, s.dz));
        }
        out
    }
}

/// Limits and endpoint data that do not depend on `c`, computed once.
#[derive(Debug, Clone)]
pub struct Shooter<'a> {
    spec: &'a ProblemSpec,
    pub h0: LimitValue,
    pub h1: LimitValue,
    f0: f64,
    g0: f64,
    f1: f64,
    g1: f64,
    pub options: ShootOptions,
}

fn ode_error(e: OdeError<Error>) -> Error {
    match e {
        OdeError::StepUnderflow { u, step } => Error::StepUnderflow { u, step },
        OdeError::TooManySteps { u } => Error::TooManySteps { u },
        OdeError::Rhs(e) => e,
    }
}

impl<'a> Shooter<'a> {
    pub fn new(spec: &'a ProblemSpec) -> Result<Self> {
        Self::with_options(spec, ShootOptions::from(&spec.numerics))
    }

    pub fn with_options(spec: &'a ProblemSpec, options: ShootOptions) -> Result<Self> {
        let h0 = asymptotics::singular_limit_zero(spec)?.value;
        let h1 = match asymptotics::singular_limit_one(spec) {
            Ok(l) => l.value,
            Err(e @ Error::NoLimit { .. }) => {
                return Err(Error::StartUndefined {
                    reason: e.to_string(),
                })
            }
            Err(e) => return Err(e),
        };
        Ok(Shooter {
            spec,
            h0,
            h1,
            f0: spec.eval_f(0.0)?,
            g0: spec.eval_g(0.0)?,
            f1: spec.eval_f(1.0)?,
            g1: spec.eval_g(1.0)?,
            options,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        self.spec
    }

    /// Admissible slopes at `u = 0` for speed `c`.
    pub fn eta0_roots(&self, c: f64) -> EtaRoots {
        let beta = c * self.g0 - self.f0;
        match self.h0 {
            LimitValue::Finite(h0) => eta_roots(self.spec.alpha, beta, h0),
            // No finite slope balances an infinite h0.
            _ => EtaRoots {
                alpha: self.spec.alpha,
                beta,
                gamma: f64::INFINITY,
                roots: Vec::new(),
                double: false,
                min_value: f64::INFINITY,
                argmin: 0.0,
            },
        }
    }

    /// `|z'(1)|` for speed `c`.
    pub fn start_slope(&self, c: f64) -> Result<StartSlope> {
        eta1_slope(self.spec.alpha, c * self.g1 - self.f1, self.h1)
    }

    fn reaction(&self, u: f64, z: f64) -> Result<f64> {
        let alpha = self.spec.alpha;
        let h = self.spec.eval_h(u)?;
        Ok(if u < SMALL_U {
            (h / u.powf(alpha)) * (u / z).powf(alpha)
        } else {
            h / z.powf(alpha)
        })
    }

    /// Right-hand side; `NaN` outside `z > 0` so the integrator retreats.
    pub fn rhs(&self, c: f64, u: f64, z: f64) -> Result<f64> {
        if !(z > 0.0) || !z.is_finite() {
            return Ok(f64::NAN);
        }
        let drift = c * self.spec.eval_g(u)? - self.spec.eval_f(u)?;
        Ok(drift - self.reaction(u, z)?)
    }

    /// `dw/du` for `w = ln z`.
    fn rhs_log(&self, c: f64, u: f64, w: f64) -> Result<f64> {
        let z = w.exp();
        Ok(self.rhs(c, u, z)? / z)
    }

    /// `(d/dw, d/du)` of [`Self::rhs_log`]. The first is exact. For the
    /// second, `c g - f` and `h` are differenced separately: differencing
    /// the full right-hand side would cancel catastrophically where
    /// `h/z^alpha` balances the drift.
    fn jacobian_log(&self, c: f64, u: f64, w: f64) -> Result<(f64, f64)> {
        let z = w.exp();
        if !(z > 0.0) || !z.is_finite() {
            return Ok((f64::NAN, f64::NAN));
        }
        let alpha = self.spec.alpha;
        let reaction = self.reaction(u, z)?;
        let drift = |u: f64| -> Result<f64> { Ok(c * self.spec.eval_g(u)? - self.spec.eval_f(u)?) };
        let dw = ((alpha + 1.0) * reaction - drift(u)?) / z;
        let eps = 1e-6 * u.min(1.0 - u);
        let du = if eps > 0.0 {
            let d_drift = (drift(u + eps)? - drift(u - eps)?) / (2.0 * eps);
            let d_h = (self.spec.eval_h(u + eps)? - self.spec.eval_h(u - eps)?) / (2.0 * eps);
            (d_drift - d_h / z.powf(alpha)) / z
        } else {
            0.0
        };
        Ok((dw, du))
    }

    fn start(&self, c: f64, scale: f64) -> Result<(f64, f64, StartKind)> {
        let alpha = self.spec.alpha;
        let delta = scale * self.options.delta_start;
        let (z, kind) = match self.h1 {
            LimitValue::NegInfinite => {
                let u0 = 1.0 - delta;
                let scale = (delta * self.spec.eval_h(1.0 - 0.5 * delta)?).abs();
                let q = quadrature::integrate(
                    |s| self.spec.eval_h(s),
                    u0,
                    1.0,
                    1e-10 * scale.max(f64::MIN_POSITIVE),
                )?;
                let z = ((alpha + 1.0) * q.value).powf(1.0 / (alpha + 1.0));
                if !(z > 0.0) {
                    return Err(Error::StartUndefined {
                        reason: format!("integral of h near 1 is {}", q.value),
                    });
                }
                (z, StartKind::Balance)
            }
            _ => {
                let s = self.start_slope(c)?;
                if !s.degenerate {
                    (s.slope * delta, StartKind::Series { slope: s.slope })
                } else if s.slope > 0.0 {
                    (s.slope * delta, StartKind::Degenerate { slope: s.slope })
                } else {
                    let u0 = 1.0 - delta;
                    let drift = c * self.spec.eval_g(u0)? - self.spec.eval_f(u0)?;
                    let h = self.spec.eval_h(u0)?;
                    let z = if drift > 0.0 {
                        (h / drift).powf(1.0 / alpha)
                    } else {
                        (1.0 - u0).powf((alpha + 2.0) / (alpha + 1.0))
                    };
                    return Ok((u0, z, StartKind::QuasiSteady));
                }
            }
        };
        Ok((1.0 - delta, z, kind))
    }

    /// Integrate and classify the trajectory for speed `c`.
    pub fn shoot(&self, c: f64) -> Result<Trajectory> {
        let mut traj = self.shoot_from(c, 1.0)?;
        let series = matches!(traj.start, StartKind::Series { .. });
        if self.options.check_start && !series {
            let half = self.shoot_from(c, 0.5)?;
            let (a, b) = (traj.interpolant().eval(0.5), half.interpolant().eval(0.5));
            let deviation = (a - b).abs();
            if deviation > START_SENSITIVITY * a.abs().max(1.0)
                || half.classification != traj.classification
            {
                return Err(Error::StartSensitive { deviation });
            }
            traj.start_deviation = Some(deviation);
        }
        traj.volterra_residual = self.volterra_residual(&traj).ok();
        Ok(traj)
    }

    fn shoot_from(&self, c: f64, scale: f64) -> Result<Trajectory> {
        let opts = &self.options;
        let (u_start, z_start, start) = self.start(c, scale)?;
        let delta = 1.0 - u_start;
        let mut samples = vec![Sample {
            u: u_start,
            z: z_start,
            dz: self.rhs(c, u_start, z_start)?,
        }];
        // The integration runs in w = ln z: positivity is automatic and the
        // error control stays relative however small z gets.
        let tol = Tolerances {
            rtol: 0.0,
            atol: opts.tolerances.rtol.max(opts.tolerances.atol),
            ..opts.tolerances
        };
        let mut ode = Switching::new(tol);
        let mut rhs = |u: f64, w: f64| self.rhs_log(c, u, w);
        let jac = |u: f64, w: f64| self.jacobian_log(c, u, w);
        let mut crossing = None;
        let mut observe = |u: f64, w: f64, dw: f64| {
            let z = w.exp();
            if z <= 0.0 && crossing.is_none() {
                crossing = Some(u);
            }
            samples.push(Sample { u, z, dz: z * dw });
        };

        let u_check = 10.0 * opts.u_min;
        let w_check = ode
            .advance(
                &mut rhs,
                &jac,
                u_start,
                z_start.ln(),
                u_check,
                0.05 * delta,
                &mut observe,
            )
            .map_err(ode_error)?;
        let w_end = ode
            .advance(
                &mut rhs,
                &jac,
                u_check,
                w_check,
                opts.u_min,
                0.0,
                &mut observe,
            )
            .map_err(ode_error)?;
        let z_check = w_check.exp();
        let mut z_end = w_end.exp();
        let mut u_end = opts.u_min;
        let mut ratio = 10.0 * z_end / z_check;

        // Near u = 0, phi = z/u obeys dphi/du ~ -M(phi) / (phi^alpha u). M is
        // positive above the largest root, so there phi grows without bound
        // as u decreases; at or below it, phi settles on a root. Comparing
        // phi with the largest root separates a subcritical shot long before
        // its plateau becomes visible, which matters near a pushed front
        // where the departure grows only like a power of 1/u.
        let roots = self.eta0_roots(c);
        let classify = |z: f64, u: f64| match roots.roots.last() {
            None => Some(Classification::PositiveLimit),
            Some(_) if z > 10.0 * opts.tol_zero => Some(Classification::PositiveLimit),
            Some(&top) if z / u > top => Some(Classification::PositiveLimit),
            Some(_) if z < opts.tol_zero => Some(Classification::ConnectsToZero),
            _ => None,
        };
        let classification = match classify(z_end, u_end) {
            Some(cl) => cl,
            None => {
                let z_prev = z_end;
                u_end = 0.1 * opts.u_min;
                z_end = ode
                    .advance(
                        &mut rhs,
                        &jac,
                        opts.u_min,
                        z_prev.ln(),
                        u_end,
                        0.0,
                        &mut observe,
                    )
                    .map_err(ode_error)?
                    .exp();
                ratio = 10.0 * z_end / z_prev;
                classify(z_end, u_end).ok_or(Error::Ambiguous {
                    c,
                    z_min: z_end,
                    ratio,
                })?
            }
        };
        if let Some(u) = crossing {
            return Err(Error::ZeroCrossing { u });
        }
        let slope_at_zero =
            (classification == Classification::ConnectsToZero).then_some(z_end / u_end);
        let slope_at_one = match start {
            StartKind::Series { slope } | StartKind::Degenerate { slope } => Some(slope),
            StartKind::QuasiSteady => Some(0.0),
            StartKind::Balance => None,
        };
        Ok(Trajectory {
            c,
            alpha: self.spec.alpha,
            samples,
            classification,
            start,
            delta,
            u_end,
            z_end,
            decade_ratio: ratio,
            slope_at_zero,
            slope_at_one,
            eta0_roots: roots,
            start_deviation: None,
            volterra_residual: None,
            stats: ode.stats(),
        })
    }

    /// Integral-form consistency on `[0.1, 0.9]`.
    pub fn volterra_residual(&self, traj: &Trajectory) -> Result<f64> {
        let p = traj.interpolant();
        let (lo, hi) = p.domain();
        if lo > 0.1 || hi < 0.9 {
            return Err(Error::InvalidArgument(
                "trajectory does not cover [0.1, 0.9]".into(),
            ));
        }
        let z_base = p.eval(0.1);
        let mut integral = 0.0;
        let mut worst = 0.0f64;
        for j in 1..=8 {
            let (a, b) = (0.1 * j as f64, 0.1 * (j + 1) as f64);
            integral +=
                quadrature::integrate(|s| self.rhs(traj.c, s, p.eval(s)), a, b, 1e-12)?.value;
            worst = worst.max((p.eval(b) - z_base - integral).abs());
        }
        Ok(worst)
    }
}

/// Shoot once with the numerics stored in `spec`.
pub fn shoot(spec: &ProblemSpec, c: f64) -> Result<Trajectory> {
    Shooter::new(spec)?.shoot(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NoSolutionReason {
    /// The trajectory stays positive at `u = 0`: `c` is below critical.
    Subcritical,
    /// `h/u^alpha` is unbounded at `0`: no speed admits a front.
    LimitInfinite,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SolveOutcome {
    Solved {
        trajectory: Trajectory,
    },
    NoSolution {
        reason: NoSolutionReason,
        trajectory: Option<Trajectory>,
    },
}

impl SolveOutcome {
    pub fn trajectory(&self) -> Option<&Trajectory> {
        match self {
            SolveOutcome::Solved { trajectory } => Some(trajectory),
            SolveOutcome::NoSolution { trajectory, .. } => trajectory.as_ref(),
        }
    }

    pub fn is_solved(&self) -> bool {
        matches!(self, SolveOutcome::Solved { .. })
    }
}

/// Decide whether a front with speed `c` exists and return it if so.
pub fn solve(spec: &ProblemSpec, c: f64) -> Result<SolveOutcome> {
    let shooter = Shooter::new(spec)?;
    solve_with(&shooter, c)
}

pub fn solve_with(shooter: &Shooter, c: f64) -> Result<SolveOutcome> {
    if !shooter.h0.is_finite() {
        return Ok(SolveOutcome::NoSolution {
            reason: NoSolutionReason::LimitInfinite,
            trajectory: None,
        });
    }
    let trajectory = shooter.shoot(c)?;
    Ok(if trajectory.connects() {
        SolveOutcome::Solved { trajectory }
    } else {
        SolveOutcome::NoSolution {
            reason: NoSolutionReason::Subcritical,
            trajectory: Some(trajectory),
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub u0: f64,
    pub margin: f64,
    /// Defaults to the top of the base trajectory.
    pub u_end: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonOutcome {
    /// `z <= y` held at every checked point.
    pub holds: bool,
    /// `max (z - y)` over the checked points.
    pub max_excess: f64,
    pub checked: usize,
}

/// Integrate `y' = F(u, y) + margin` forward from `y(u0) = z(u0)` and check
/// that the base trajectory `z` stays below `y`.
pub fn compare_upper(
    shooter: &Shooter,
    base: &Trajectory,
    cmp: Comparison,
) -> Result<ComparisonOutcome> {
    let p = base.interpolant();
    let (lo, hi) = p.domain();
    let u_end = cmp.u_end.unwrap_or(hi);
    if !(cmp.u0 >= lo && cmp.u0 < u_end && u_end <= hi) {
        return Err(Error::InvalidArgument(format!(
            "comparison window [{}, {u_end}] is outside the trajectory",
            cmp.u0
        )));
    }
    let mut ode = Dopri5::new(shooter.options.tolerances);
    let mut rhs = |u: f64, y: f64| Ok(shooter.rhs(base.c, u, y)? + cmp.margin);
    let mut max_excess = f64::NEG_INFINITY;
    let mut checked = 0;
    ode.advance(&mut rhs, cmp.u0, p.eval(cmp.u0), u_end, 1e-4, |u, y, _| {
        max_excess = max_excess.max(p.eval(u) - y);
        checked += 1;
        true
    })
    .map_err(ode_error)?;
    Ok(ComparisonOutcome {
        holds: max_excess <= 1e-8,
        max_excess,
        checked,
    })
}
