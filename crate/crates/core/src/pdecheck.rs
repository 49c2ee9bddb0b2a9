//! Direct simulation of `v_t = v_xx + rho(v) - f(v) v_x` from step data,
//! used as an independent check on the critical speed.
//!
//! Explicit finite differences: central `v_xx`, upwind `f v_x`, mirrored
//! (Neumann) ends. The `lambda`-level crossing is tracked every
//! `record_every` time units and a straight line is fitted to the second
//! half of the record.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::model::{ProblemSpec, Reaction};

/// `dt <= SAFETY * dx^2 / 2`.
pub const SAFETY: f64 = 0.9;
/// Fits whose slope standard error exceeds this fraction of the slope are
/// refused.
pub const MAX_RELATIVE_RESIDUAL: f64 = 0.05;
/// Absolute floor for the refusal rule, so a front at rest is measurable.
const RESIDUAL_FLOOR: f64 = 1e-6;
/// Coefficients are tabulated on `[0, 1]` at this many intervals.
const TABLE_SIZE: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Domain `[0, length]`.
    pub length: f64,
    pub dx: f64,
    /// Defaults to `SAFETY * dx^2 / 2`.
    pub dt: Option<f64>,
    pub final_time: f64,
    pub level: f64,
    /// Initial data: `v = 1` for `x < x0`, else `0`.
    pub x0: f64,
    /// Interval between recorded front positions.
    pub record_every: f64,
    /// Shift the solution back when the front passes two thirds of the
    /// domain, keeping the recorded positions in absolute coordinates.
    pub recenter: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            length: 300.0,
            dx: 0.1,
            dt: None,
            final_time: 150.0,
            level: 0.5,
            x0: 20.0,
            record_every: 1.0,
            recenter: true,
        }
    }
}

impl SimConfig {
    pub fn time_step(&self) -> f64 {
        self.dt.unwrap_or(SAFETY * self.dx * self.dx / 2.0)
    }

    /// The same run on a grid twice as fine.
    pub fn refined(&self) -> SimConfig {
        SimConfig {
            dx: self.dx / 2.0,
            dt: self.dt.map(|dt| dt / 4.0),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrontPosition {
    pub t: f64,
    pub x: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpeedMeasurement {
    pub speed: f64,
    /// Standard error of the fitted slope.
    pub residual: f64,
    pub intercept: f64,
    /// Start of the fitting window.
    pub fit_from: f64,
    pub config: SimConfig,
    pub time_step: f64,
    pub positions: Vec<FrontPosition>,
    /// Total shift applied by recentering.
    pub offset: f64,
    /// Final state on the (shifted) grid.
    #[serde(skip)]
    pub final_state: Vec<f64>,
}

impl SpeedMeasurement {
    /// Final state as CSV with absolute positions.
    pub fn snapshot_csv(&self) -> String {
        let mut out = String::from("x,v\n");
        for (i, v) in self.final_state.iter().enumerate() {
            let x = self.offset + i as f64 * self.config.dx;
            out.push_str(&format!("{x:e},{v:e}\n"));
        }
        out
    }
}

/// Linear interpolation table with exact evaluation outside `[0, 1]`.
struct Table<'a> {
    expr: &'a Expr,
    values: Vec<f64>,
}

impl<'a> Table<'a> {
    fn new(expr: &'a Expr) -> Result<Self> {
        let values = (0..=TABLE_SIZE)
            .map(|i| expr.eval(i as f64 / TABLE_SIZE as f64))
            .collect::<Result<_, _>>()?;
        Ok(Table { expr, values })
    }

    fn eval(&self, v: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&v) {
            return Ok(self.expr.eval(v)?);
        }
        let s = v * TABLE_SIZE as f64;
        let i = (s as usize).min(TABLE_SIZE - 1);
        let w = s - i as f64;
        Ok(self.values[i] * (1.0 - w) + self.values[i + 1] * w)
    }
}

fn check_spec(spec: &ProblemSpec) -> Result<()> {
    let unsupported = |what: &str| Error::UnsupportedSimulation { what: what.into() };
    if (spec.alpha - 1.0).abs() > 1e-12 {
        return Err(unsupported("alpha = 1"));
    }
    let grid = spec.numerics.validation_grid.max(2);
    for i in 0..=grid {
        let u = i as f64 / grid as f64;
        if (spec.eval_g(u)? - 1.0).abs() > 1e-12 {
            return Err(unsupported("g = 1"));
        }
        if let Reaction::Factored { diffusion, .. } = &spec.reaction {
            if (diffusion.eval(u)? - 1.0).abs() > 1e-12 {
                return Err(unsupported("D = 1"));
            }
        }
    }
    Ok(())
}

fn check_config(cfg: &SimConfig, fmax: f64) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidArgument(msg));
    if !(cfg.dx > 0.0 && cfg.length > 2.0 * cfg.dx) {
        return bad(format!(
            "need 0 < 2 dx < length, got dx = {}, length = {}",
            cfg.dx, cfg.length
        ));
    }
    if !(cfg.level > 0.1 && cfg.level < 0.9) {
        return bad(format!("level must lie in (0.1, 0.9), got {}", cfg.level));
    }
    if !(cfg.x0 > 0.0 && cfg.x0 < cfg.length)
        || !(cfg.final_time > 0.0)
        || !(cfg.record_every > 0.0)
    {
        return bad(
            "x0, final_time and record_every must be positive, x0 inside the domain".into(),
        );
    }
    let dt = cfg.time_step();
    let limit = SAFETY * cfg.dx * cfg.dx / 2.0;
    // Upwinding adds |f| dt/dx to the diagonal weight; keep it nonnegative.
    let monotone = 1.0 / (2.0 / (cfg.dx * cfg.dx) + fmax / cfg.dx);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) || dt > monotone {
        return Err(Error::StabilityViolation {
            dt,
            limit: limit.min(monotone),
        });
    }
    Ok(())
}

/// Rightmost crossing of `level`, by linear interpolation.
fn crossing(v: &[f64], level: f64, dx: f64) -> Option<f64> {
    let i = v.iter().rposition(|&x| x >= level)?;
    if i + 1 >= v.len() {
        return None;
    }
    let (a, b) = (v[i], v[i + 1]);
    Some((i as f64 + (a - level) / (a - b)) * dx)
}

/// Least squares `x = a + s t`; returns `(s, a, standard error of s)`.
fn fit_line(points: &[FrontPosition]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let tm = points.iter().map(|p| p.t).sum::<f64>() / n;
    let xm = points.iter().map(|p| p.x).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.t - tm).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.t - tm) * (p.x - xm)).sum();
    let slope = sxy / sxx;
    let intercept = xm - slope * tm;
    let ssr: f64 = points
        .iter()
        .map(|p| (p.x - intercept - slope * p.t).powi(2))
        .sum();
    let se = if points.len() > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, intercept, se)
}

pub fn simulate(spec: &ProblemSpec, cfg: &SimConfig) -> Result<SpeedMeasurement> {
    check_spec(spec)?;
    let rho = Table::new(spec.rho())?;
    let f = Table::new(&spec.f)?;
    let fmax = f.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    check_config(cfg, fmax)?;

    let dx = cfg.dx;
    let dt = cfg.time_step();
    let n = (cfg.length / dx).round() as usize + 1;
    let mut v: Vec<f64> = (0..n)
        .map(|i| if (i as f64) * dx < cfg.x0 { 1.0 } else { 0.0 })
        .collect();
    let mut next = vec![0.0; n];
    let steps = (cfg.final_time / dt).ceil() as usize;
    let record = ((cfg.record_every / dt).round() as usize).max(1);
    let (r, a) = (dt / (dx * dx), dt / dx);

    let mut offset = 0.0;
    let mut positions = Vec::new();
    for step in 1..=steps {
        for i in 0..n {
            let left = if i == 0 { v[1] } else { v[i - 1] };
            let right = if i == n - 1 { v[n - 2] } else { v[i + 1] };
            let vi = v[i];
            let fi = f.eval(vi)?;
            let vx = if fi > 0.0 { vi - left } else { right - vi };
            next[i] = vi + r * (left - 2.0 * vi + right) - a * fi * vx + dt * rho.eval(vi)?;
        }
        std::mem::swap(&mut v, &mut next);

        if step % record == 0 || step == steps {
            let t = step as f64 * dt;
            let Some(mut x) = crossing(&v, cfg.level, dx) else {
                return Err(Error::FrontLost { t });
            };
            if cfg.recenter && x > 2.0 * cfg.length / 3.0 {
                let shift = ((x - cfg.length / 3.0) / dx).round() as usize;
                let tail = v[n - 1];
                v.copy_within(shift.., 0);
                v[n - shift..].fill(tail);
                offset += shift as f64 * dx;
                x -= shift as f64 * dx;
            }
            positions.push(FrontPosition { t, x: x + offset });
        }
    }

    let t_end = steps as f64 * dt;
    let fit_from = 0.5 * t_end;
    let window: Vec<FrontPosition> = positions
        .iter()
        .copied()
        .filter(|p| p.t >= fit_from)
        .collect();
    if window.len() < 2 {
        return Err(Error::InvalidArgument(
            "fewer than two recorded positions in the fitting window".into(),
        ));
    }
    let (speed, intercept, residual) = fit_line(&window);
    if residual > (MAX_RELATIVE_RESIDUAL * speed.abs()).max(RESIDUAL_FLOOR) {
        return Err(Error::MeasurementRefused { speed, residual });
    }
    Ok(SpeedMeasurement {
        speed,
        residual,
        intercept,
        fit_from,
        config: *cfg,
        time_step: dt,
        positions,
        offset,
        final_state: v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_step_is_at_the_stability_limit() {
        let cfg = SimConfig::default();
        assert!((cfg.time_step() - 0.0045).abs() < 1e-15);
        assert!((cfg.refined().time_step() - 0.0045 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn unstable_step_is_rejected() {
        let spec = ProblemSpec::new(1.0, "0", "1", "u*(1-u)").unwrap();
        let cfg = SimConfig {
            dt: Some(0.01),
            ..SimConfig::default()
        };
        assert!(matches!(
            simulate(&spec, &cfg),
            Err(Error::StabilityViolation { .. })
        ));
    }

    #[test]
    fn unsupported_models() {
        let cfg = SimConfig::default();
        let s = ProblemSpec::new(2.0, "0", "u+1", "u^2*(1-u)").unwrap();
        assert!(matches!(
            simulate(&s, &cfg),
            Err(Error::UnsupportedSimulation { .. })
        ));
        let s = ProblemSpec::new(1.0, "u", "1-u", "u*(1-u)").unwrap();
        assert!(matches!(
            simulate(&s, &cfg),
            Err(Error::UnsupportedSimulation { .. })
        ));
    }

    #[test]
    fn crossing_interpolates() {
        let v = [1.0, 1.0, 0.75, 0.25, 0.0];
        assert!((crossing(&v, 0.5, 0.1).unwrap() - 0.25).abs() < 1e-15);
        assert!(crossing(&[1.0, 1.0], 0.5, 0.1).is_none());
        assert!(crossing(&[0.0, 0.0], 0.5, 0.1).is_none());
    }

    #[test]
    fn exact_line_fit() {
        let pts: Vec<_> = (0..10)
            .map(|i| FrontPosition {
                t: i as f64,
                x: 3.0 + 2.0 * i as f64,
            })
            .collect();
        let (s, a, se) = fit_line(&pts);
        assert!((s - 2.0).abs() < 1e-12 && (a - 3.0).abs() < 1e-12 && se < 1e-12);
    }

    #[test]
    fn pure_diffusion_does_not_travel() {
        let spec = ProblemSpec::parse(1.0, "0", "1", "0").unwrap();
        let cfg = SimConfig {
            length: 100.0,
            x0: 50.0,
            final_time: 40.0,
            ..SimConfig::default()
        };
        let m = simulate(&spec, &cfg).unwrap();
        assert!(m.speed.abs() < 0.01, "{}", m.speed);
    }
}
