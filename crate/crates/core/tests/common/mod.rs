#![allow(dead_code)]

use frontspeed_core::shooting::Trajectory;
use frontspeed_core::ProblemSpec;

pub struct Case {
    pub name: &'static str,
    pub spec: ProblemSpec,
}

fn case(name: &'static str, alpha: f64, f: &str, g: &str, h: &str) -> Case {
    Case {
        name,
        spec: ProblemSpec::new(alpha, f, g, h).unwrap(),
    }
}

/// Specs with a finite positive `h0_alpha`, several exponents and drifts.
pub fn gallery() -> Vec<Case> {
    vec![
        case("fisher", 1.0, "0", "1", "u*(1-u)"),
        case("example1", 2.0, "0", "u+1", "u^2*(1-u)"),
        case("example2", 1.0, "u", "1-u", "u*(1-u)"),
        case("fisher_drift", 1.0, "0.5", "1", "u*(1-u)"),
        case("half", 0.5, "0", "1", "sqrt(u)*(1-u)"),
        case("mixed", 1.0, "u^2", "1+u", "u*(1-u)*(1+u)"),
        case("cubic", 3.0, "0", "1", "u^3*(1-u)"),
    ]
}

/// `z'(0)` by least squares of `z/u` against `u` on the samples below
/// `u = 1e-6`, extrapolated to `u = 0`.
pub fn fitted_slope_at_zero(traj: &Trajectory) -> f64 {
    let pts: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .filter(|s| s.u <= 1e-6)
        .map(|s| (s.u, s.z / s.u))
        .collect();
    assert!(pts.len() >= 3, "too few samples near 0");
    let n = pts.len() as f64;
    let xm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - xm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
    ym - sxy / sxx * xm
}
