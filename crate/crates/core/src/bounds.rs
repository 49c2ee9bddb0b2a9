//! A priori bounds on the critical speed from mean values of the data.
//!
//! With `F0 = sup mean(f)`, `G0 = inf mean(g)`, `H0 = sup mean(h/s^alpha)`
//! over intervals `[0, u]`, and the limits `f0 = f(0)`, `g0 = g(0)`,
//! `h0 = lim h/u^alpha`:
//!
//! ```text
//! lower = f0/g0 + (alpha+1)/g0 * (h0/alpha^alpha)^(1/(alpha+1))
//! upper = F0/G0 + (alpha+1)/G0 * (H0/alpha^alpha)^(1/(alpha+1))
//! ```

use serde::Serialize;

use crate::asymptotics::{self, m_min, m_value};
use crate::error::{Error, Result, Side};
use crate::model::{LimitValue, ProblemSpec};
use crate::quadrature;

const GOLDEN_WIDTH: f64 = 1e-10;

/// `(1/u) * integral_0^u w(s) / s^p ds` for `u` in `(0, 1]`.
///
/// For `p > 0` the integrand is first checked for a finite limit at `0+`
/// and then integrated after the substitution `s = u sigma^2`, which turns
/// an `s^-p` endpoint singularity with `p < 1` into a bounded integrand.
pub fn mean_value_curve<W>(w: W, u: f64, p: f64, tol: f64) -> Result<f64>
where
    W: Fn(f64) -> Result<f64>,
{
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::InvalidArgument(format!("u = {u} is outside (0, 1]")));
    }
    if p < 0.0 {
        return Err(Error::InvalidArgument(format!("p = {p} must be >= 0")));
    }
    if p > 0.0 {
        let samples = asymptotics::LADDER
            .map(|k| {
                let s = (-(k as f64)).exp2();
                Ok(w(s)? / s.powf(p))
            })
            .collect::<Result<Vec<_>>>()?;
        if !asymptotics::extrapolate(&samples, Side::Zero)?.is_finite() {
            return Err(Error::SingularDivergence);
        }
    }
    mean_direct(&w, u, p, tol)
}

fn mean_direct<W>(w: &W, u: f64, p: f64, tol: f64) -> Result<f64>
where
    W: Fn(f64) -> Result<f64>,
{
    if p == 0.0 {
        return Ok(quadrature::integrate(w, 0.0, u, tol * u)?.value / u);
    }
    integral_from_zero(w, u, p, tol * u).map(|v| v / u)
}

// integral_0^u w(s) s^-p ds with s = u sigma^2.
fn integral_from_zero<W>(w: &W, u: f64, p: f64, tol: f64) -> Result<f64>
where
    W: Fn(f64) -> Result<f64>,
{
    let q = quadrature::integrate(
        |sigma| {
            let s = u * sigma * sigma;
            Ok::<_, Error>(2.0 * u * sigma * w(s)? / s.powf(p))
        },
        0.0,
        1.0,
        tol,
    )?;
    Ok(q.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremum {
    pub value: f64,
    /// Location of the extremum; `0` means the limit as `u -> 0+`.
    pub at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanConstants {
    pub f_mean_sup: Extremum,
    pub g_mean_inf: Extremum,
    pub h_mean_sup: Extremum,
    /// Accumulated quadrature error estimate over all cumulative integrals.
    pub quadrature_error: f64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Goal {
    Max,
    Min,
}

impl Goal {
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Goal::Max => a > b,
            Goal::Min => a < b,
        }
    }
}

struct CurveSearch<'a, W> {
    w: &'a W,
    p: f64,
    limit_at_zero: f64,
    goal: Goal,
}

impl<W: Fn(f64) -> Result<f64>> CurveSearch<'_, W> {
    /// Scan the cumulative means on the grid, then polish the best cell with
    /// a golden-section search.
    fn run(&self, grid: &[f64], tol: f64) -> Result<(Extremum, f64)> {
        let n = grid.len();
        let cell_tol = tol / n as f64;
        let mut integral = 0.0;
        let mut err = 0.0;
        let mut best = Extremum {
            value: self.limit_at_zero,
            at: 0.0,
        };
        let mut best_index = 0;
        for i in 1..n {
            let (a, b) = (grid[i - 1], grid[i]);
            if i == 1 && self.p > 0.0 {
                integral += integral_from_zero(self.w, b, self.p, cell_tol)?;
            } else {
                let p = self.p;
                let q = quadrature::integrate(
                    |s| Ok::<_, Error>((self.w)(s)? / s.powf(p)),
                    a,
                    b,
                    cell_tol,
                )?;
                integral += q.value;
                err += q.error;
            }
            let mean = integral / b;
            if self.goal.better(mean, best.value) {
                best = Extremum { value: mean, at: b };
                best_index = i;
            }
        }
        if best_index > 0 {
            let lo = if best_index == 1 {
                grid[1] * 1e-3
            } else {
                grid[best_index - 1]
            };
            let hi = grid[(best_index + 1).min(n - 1)];
            let polished = self.golden(lo, hi, tol)?;
            if self.goal.better(polished.value, best.value) {
                best = polished;
            }
        }
        Ok((best, err))
    }

    fn golden(&self, mut a: f64, mut b: f64, tol: f64) -> Result<Extremum> {
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mean = |u: f64| mean_direct(self.w, u, self.p, tol);
        let mut x1 = b - inv_phi * (b - a);
        let mut x2 = a + inv_phi * (b - a);
        let mut f1 = mean(x1)?;
        let mut f2 = mean(x2)?;
        while b - a > GOLDEN_WIDTH {
            if self.goal.better(f1, f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - inv_phi * (b - a);
                f1 = mean(x1)?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + inv_phi * (b - a);
                f2 = mean(x2)?;
            }
        }
        let (at, value) = if self.goal.better(f1, f2) {
            (x1, f1)
        } else {
            (x2, f2)
        };
        Ok(Extremum { value, at })
    }
}

/// `F0`, `G0` and `H0`. Requires a finite `h0 = lim h/u^alpha`.
pub fn constants(spec: &ProblemSpec, h0: f64) -> Result<MeanConstants> {
    let num = &spec.numerics;
    let n = num.extremum_grid.max(3);
    let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let tol = num.integral_tol;
    let f = |s: f64| Ok(spec.eval_f(s)?);
    let g = |s: f64| Ok(spec.eval_g(s)?);
    let h = |s: f64| Ok(spec.eval_h(s)?);

    let (f_mean_sup, ef) = CurveSearch {
        w: &f,
        p: 0.0,
        limit_at_zero: spec.eval_f(0.0)?,
        goal: Goal::Max,
    }
    .run(&grid, tol)?;
    let (g_mean_inf, eg) = CurveSearch {
        w: &g,
        p: 0.0,
        limit_at_zero: spec.eval_g(0.0)?,
        goal: Goal::Min,
    }
    .run(&grid, tol)?;
    let (h_mean_sup, eh) = CurveSearch {
        w: &h,
        p: spec.alpha,
        limit_at_zero: h0,
        goal: Goal::Max,
    }
    .run(&grid, tol)?;
    Ok(MeanConstants {
        f_mean_sup,
        g_mean_inf,
        h_mean_sup,
        quadrature_error: ef + eg + eh,
    })
}

/// `(alpha+1)/g * (h/alpha^alpha)^(1/(alpha+1)) + f/g`.
pub fn bound_formula(alpha: f64, f: f64, g: f64, h: f64) -> f64 {
    f / g + (alpha + 1.0) / g * (h / alpha.powf(alpha)).powf(1.0 / (alpha + 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedBounds {
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
    pub f_at_zero: f64,
    pub g_at_zero: f64,
    pub h0_alpha: f64,
    pub f_mean_sup: Extremum,
    pub g_mean_inf: Extremum,
    pub h_mean_sup: Extremum,
    /// All three mean-value extrema are attained in the limit `u -> 0+`,
    /// in which case the bounds coincide.
    pub extrema_at_zero: bool,
    pub quadrature_error: f64,
}

/// Compute both bounds. Fails with [`Error::ExistenceFails`] when `h0` is
/// infinite and [`Error::NonPositiveMeanG`] when `G0 <= 0`.
pub fn estimate(spec: &ProblemSpec) -> Result<SpeedBounds> {
    let h0 = match asymptotics::singular_limit_zero(spec)?.value {
        LimitValue::Finite(v) => v,
        _ => return Err(Error::ExistenceFails),
    };
    let consts = constants(spec, h0)?;
    estimate_from(spec, h0, consts)
}

pub(crate) fn estimate_from(spec: &ProblemSpec, h0: f64, c: MeanConstants) -> Result<SpeedBounds> {
    let alpha = spec.alpha;
    let f0 = spec.eval_f(0.0)?;
    let g0 = spec.eval_g(0.0)?;
    let big_g = c.g_mean_inf.value;
    if big_g <= 0.0 {
        return Err(Error::NonPositiveMeanG { g0: big_g });
    }
    let lower = bound_formula(alpha, f0, g0, h0);
    let upper = bound_formula(alpha, c.f_mean_sup.value, big_g, c.h_mean_sup.value);
    if lower > upper + 1e-9 * upper.abs().max(1.0) {
        return Err(Error::InconsistentBounds { lower, upper });
    }
    let extrema_at_zero =
        c.f_mean_sup.at == 0.0 && c.g_mean_inf.at == 0.0 && c.h_mean_sup.at == 0.0;
    Ok(SpeedBounds {
        alpha,
        lower,
        upper: upper.max(lower),
        f_at_zero: f0,
        g_at_zero: g0,
        h0_alpha: h0,
        f_mean_sup: c.f_mean_sup,
        g_mean_inf: c.g_mean_inf,
        h_mean_sup: c.h_mean_sup,
        extrema_at_zero,
        quadrature_error: c.quadrature_error,
    })
}

/// Witness that a front exists at speed `c`: a slope `L > 0` with
/// `M(L) = L^(alpha+1) - (c G0 - F0) L^alpha + H0 < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExistenceCertificate {
    pub c: f64,
    pub beta: f64,
    pub gamma: f64,
    pub slope: f64,
    pub m_value: f64,
}

impl SpeedBounds {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, c: f64) -> bool {
        c >= self.lower && c <= self.upper
    }

    /// A certificate exists for every `c > upper`; it may also exist for
    /// some smaller speeds.
    pub fn certify_existence(&self, c: f64) -> Option<ExistenceCertificate> {
        let beta = c * self.g_mean_inf.value - self.f_mean_sup.value;
        let gamma = self.h_mean_sup.value;
        if beta <= 0.0 {
            return None;
        }
        let slope = m_min(self.alpha, beta, gamma).argmin;
        let m = m_value(self.alpha, beta, gamma, slope);
        (m < 0.0).then_some(ExistenceCertificate {
            c,
            beta,
            gamma,
            slope,
            m_value: m,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(alpha: f64, f: &str, g: &str, h: &str) -> ProblemSpec {
        ProblemSpec::new(alpha, f, g, h).unwrap()
    }

    #[test]
    fn mean_value_curve_examples() {
        let h = |s: f64| Ok(s * (1.0 - s));
        assert!((mean_value_curve(h, 1.0, 1.0, 1e-12).unwrap() - 0.5).abs() < 1e-12);
        let g = |s: f64| Ok(s + 1.0);
        let m = mean_value_curve(g, 1e-6, 0.0, 1e-12).unwrap();
        assert!((m - (1.0 + 5e-7)).abs() < 1e-12);
        // s^0.1 / s^0.5 is integrable but unbounded, which is rejected.
        let w = |s: f64| Ok(s.powf(0.1));
        assert_eq!(
            mean_value_curve(w, 0.5, 0.5, 1e-10),
            Err(Error::SingularDivergence)
        );
        assert!(matches!(
            mean_value_curve(|s: f64| Ok(s), 0.0, 0.0, 1e-10),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn example_one_bounds_coincide() {
        let b = estimate(&spec(2.0, "0", "u+1", "u^2*(1-u)")).unwrap();
        let exact = 3.0 / 4f64.cbrt();
        assert!((b.lower - exact).abs() < 1e-12);
        assert!((b.upper - exact).abs() < 1e-9);
        assert!(b.extrema_at_zero);
        assert_eq!(b.f_mean_sup.value, 0.0);
        assert_eq!(b.g_mean_inf.value, 1.0);
        assert!((b.h_mean_sup.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn example_two_bounds() {
        let b = estimate(&spec(1.0, "u", "1-u", "u*(1-u)")).unwrap();
        assert!((b.lower - 2.0).abs() < 1e-12);
        assert!((b.upper - 5.0).abs() < 1e-9, "{}", b.upper);
        assert!((b.f_mean_sup.value - 0.5).abs() < 1e-10);
        assert_eq!(b.f_mean_sup.at, 1.0);
        assert!((b.g_mean_inf.value - 0.5).abs() < 1e-10);
        assert!(!b.extrema_at_zero);
    }

    #[test]
    fn interior_extremum_is_polished() {
        // mean of f = sin(pi u) over [0,u] peaks in the interior.
        let b = estimate(&spec(1.0, "sin(3.141592653589793*u)", "1", "u*(1-u)")).unwrap();
        let mean = |u: f64| (1.0 - (std::f64::consts::PI * u).cos()) / (std::f64::consts::PI * u);
        // Independent dense scan.
        let best = (1..200_000)
            .map(|i| mean(i as f64 / 200_000.0))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((b.f_mean_sup.value - best).abs() < 1e-9);
        assert!(b.f_mean_sup.at > 0.5 && b.f_mean_sup.at < 1.0);
    }

    #[test]
    fn infinite_h0_means_no_bounds() {
        assert_eq!(
            estimate(&spec(1.0, "0", "1", "sqrt(u)*(1-u)")),
            Err(Error::ExistenceFails)
        );
    }

    #[test]
    fn negative_mean_g_is_rejected() {
        // Only reachable without validation: the running integral of g
        // changes sign.
        let s = ProblemSpec::parse(1.0, "0", "1-2.5*u", "u*(1-u)").unwrap();
        assert!(matches!(estimate(&s), Err(Error::NonPositiveMeanG { .. })));
    }

    #[test]
    fn certificates() {
        let b = estimate(&spec(1.0, "u", "1-u", "u*(1-u)")).unwrap();
        let cert = b.certify_existence(6.0).unwrap();
        assert!((cert.slope - 1.25).abs() < 1e-10);
        assert!((cert.m_value + 0.5625).abs() < 1e-9);

        let b = estimate(&spec(1.0, "0", "1", "u*(1-u)")).unwrap();
        let cert = b.certify_existence(3.0).unwrap();
        assert!((cert.slope - 1.5).abs() < 1e-12);
        assert!((cert.m_value + 1.25).abs() < 1e-12);
        assert!(b.certify_existence(1.9).is_none());
    }
}
