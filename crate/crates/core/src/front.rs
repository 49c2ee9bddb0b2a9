//! Travelling-wave profile `u(t)` from a solution `z(u)`.
//!
//! For `alpha = 1` the front satisfies `z(u(t)) = -D(u) u'(t)`, so
//! `t(u) = -integral_{anchor}^{u} D(s)/z(s) ds`. The profile is truncated to
//! `[eps_prof, 1 - eps_prof]` because `t` diverges at both ends.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interp::CubicHermite;
use crate::model::ProblemSpec;
use crate::quadrature;
use crate::shooting::Trajectory;

/// Absolute tolerance for each inter-sample quadrature.
const SEGMENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileOptions {
    pub eps_prof: f64,
    /// `t = 0` where `u` equals this value.
    pub anchor: f64,
    /// Number of output samples.
    pub points: usize,
    /// Exponent `k` in `z = (-D u')^k`. Required when `alpha != 1`;
    /// pathways other than `k = 1` are experimental.
    pub reduction_exponent: Option<f64>,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            eps_prof: 1e-4,
            anchor: 0.5,
            points: 1001,
            reduction_exponent: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub t: f64,
    pub u: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WaveProfile {
    pub c: f64,
    pub anchor: f64,
    pub eps_prof: f64,
    /// Source of the diffusion coefficient used in the reduction.
    pub diffusion: String,
    pub reduction_exponent: f64,
    /// Ordered by increasing `t`, so `u` decreases.
    #[serde(skip)]
    pub samples: Vec<ProfilePoint>,
}

impl WaveProfile {
    /// Monotone interpolant of `u` as a function of `t`.
    pub fn interpolant(&self) -> CubicHermite {
        let (t, u) = self.samples.iter().map(|p| (p.t, p.u)).unzip();
        CubicHermite::monotone(t, u)
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.samples[0].t, self.samples[self.samples.len() - 1].t)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,u\n");
        for p in &self.samples {
            out.push_str(&format!("{:e},{:e}\n", p.t, p.u));
        }
        out
    }
}

/// Reconstruct the profile with default options and the spec's `eps_prof`.
pub fn reconstruct(traj: &Trajectory, spec: &ProblemSpec) -> Result<WaveProfile> {
    let options = ProfileOptions {
        eps_prof: spec.numerics.eps_prof,
        ..ProfileOptions::default()
    };
    reconstruct_with(traj, spec, options)
}

pub fn reconstruct_with(
    traj: &Trajectory,
    spec: &ProblemSpec,
    options: ProfileOptions,
) -> Result<WaveProfile> {
    if !traj.connects() {
        return Err(Error::NotASolution { c: traj.c });
    }
    let kappa = match options.reduction_exponent {
        Some(k) => k,
        None if (spec.alpha - 1.0).abs() <= 1e-12 => 1.0,
        None => return Err(Error::ReductionUnsupported { alpha: spec.alpha }),
    };
    let eps = options.eps_prof;
    if !(kappa > 0.0) || !(eps > 0.0 && eps < 0.5) || options.points < 3 {
        return Err(Error::InvalidArgument(format!(
            "profile needs kappa > 0, eps_prof in (0, 1/2) and at least 3 points \
             (kappa = {kappa}, eps_prof = {eps}, points = {})",
            options.points
        )));
    }
    if !(options.anchor >= eps && options.anchor <= 1.0 - eps) {
        return Err(Error::InvalidArgument(format!(
            "anchor {} outside [{eps}, {}]",
            options.anchor,
            1.0 - eps
        )));
    }

    let (x, y): (Vec<f64>, Vec<f64>) = traj.ascending().map(|s| (s.u, s.z)).unzip();
    if x.len() < 2 || x[0] > eps || x[x.len() - 1] < 1.0 - eps {
        return Err(Error::InvalidArgument(format!(
            "trajectory does not cover [{eps}, {}]",
            1.0 - eps
        )));
    }
    let z = CubicHermite::monotone(x, y);
    let diffusion = spec.diffusion();
    let mut integrand =
        |s: f64| -> Result<f64> { Ok(diffusion.eval(s)? / z.eval(s).powf(1.0 / kappa)) };

    // Uniform in logit(u): dense in both tails, where t moves fastest.
    let n = options.points;
    let (lo, hi) = (logit(eps), logit(1.0 - eps));
    let us: Vec<f64> = (0..n)
        .map(|i| match i {
            0 => eps,
            _ if i == n - 1 => 1.0 - eps,
            _ => logistic(lo + (hi - lo) * i as f64 / (n - 1) as f64),
        })
        .collect();

    // cumulative[i] = integral_{eps}^{us[i]} D/z
    let mut cumulative = vec![0.0; n];
    for i in 1..n {
        let q = quadrature::integrate(&mut integrand, us[i - 1], us[i], SEGMENT_TOL)?;
        cumulative[i] = cumulative[i - 1] + q.value;
    }
    let j = us.partition_point(|&u| u <= options.anchor).clamp(1, n - 1) - 1;
    let at_anchor = cumulative[j]
        + quadrature::integrate(&mut integrand, us[j], options.anchor, SEGMENT_TOL)?.value;

    let samples = us
        .iter()
        .zip(&cumulative)
        .rev()
        .map(|(&u, &q)| ProfilePoint {
            t: at_anchor - q,
            u,
        })
        .collect();
    Ok(WaveProfile {
        c: traj.c,
        anchor: options.anchor,
        eps_prof: eps,
        diffusion: diffusion.source().to_string(),
        reduction_exponent: kappa,
        samples,
    })
}

fn logit(u: f64) -> f64 {
    (u / (1.0 - u)).ln()
}

fn logistic(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::eta_roots;
    use crate::ode::Stats;
    use crate::shooting::{Classification, Sample, StartKind};

    fn constant_trajectory(zeta: f64) -> Trajectory {
        let samples = (0..=200)
            .rev()
            .map(|i| Sample {
                u: i as f64 / 200.0,
                z: zeta,
                dz: 0.0,
            })
            .collect();
        Trajectory {
            c: 1.0,
            alpha: 1.0,
            samples,
            classification: Classification::ConnectsToZero,
            start: StartKind::QuasiSteady,
            delta: 0.0,
            u_end: 0.0,
            z_end: zeta,
            decade_ratio: 1.0,
            slope_at_zero: None,
            slope_at_one: None,
            eta0_roots: eta_roots(1.0, 1.0, 0.0),
            start_deviation: None,
            volterra_residual: None,
            stats: Stats::default(),
        }
    }

    #[test]
    fn constant_z_gives_linear_profile() {
        let spec = ProblemSpec::new(1.0, "0", "1", "u*(1-u)").unwrap();
        let zeta = 0.8;
        let p = reconstruct(&constant_trajectory(zeta), &spec).unwrap();
        for s in &p.samples {
            assert!((s.t - (0.5 - s.u) / zeta).abs() < 1e-12, "{s:?}");
        }
        assert!(p
            .samples
            .windows(2)
            .all(|w| w[0].t < w[1].t && w[0].u > w[1].u));
    }

    #[test]
    fn refusals() {
        let spec = ProblemSpec::new(2.0, "0", "u+1", "u^2*(1-u)").unwrap();
        let traj = constant_trajectory(1.0);
        assert!(matches!(
            reconstruct(&traj, &spec),
            Err(Error::ReductionUnsupported { .. })
        ));
        let opts = ProfileOptions {
            reduction_exponent: Some(1.0),
            ..ProfileOptions::default()
        };
        assert!(reconstruct_with(&traj, &spec, opts).is_ok());

        let mut miss = constant_trajectory(1.0);
        miss.classification = Classification::PositiveLimit;
        let spec = ProblemSpec::new(1.0, "0", "1", "u*(1-u)").unwrap();
        assert!(matches!(
            reconstruct(&miss, &spec),
            Err(Error::NotASolution { .. })
        ));
    }

    #[test]
    fn factored_diffusion_scales_time() {
        let spec = ProblemSpec::parse_factored(1.0, "0", "1", "2", "u*(1-u)/2").unwrap();
        let p = reconstruct(&constant_trajectory(1.0), &spec).unwrap();
        assert_eq!(p.diffusion, "2");
        let (t0, t1) = p.t_range();
        assert!((t1 - t0 - 2.0 * (1.0 - 2e-4)).abs() < 1e-10);
    }
}
