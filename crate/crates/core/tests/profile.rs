use frontspeed_core::front::{reconstruct_with, ProfileOptions};
use frontspeed_core::shooting::solve;
use frontspeed_core::{reconstruct, Error, ProblemSpec, WaveProfile};

fn fisher_profile(anchor: f64) -> (ProblemSpec, WaveProfile) {
    let spec = ProblemSpec::new(1.0, "0", "1", "u*(1-u)").unwrap();
    let c = 5.0 / 6f64.sqrt();
    let traj = solve(&spec, c).unwrap().trajectory().unwrap().clone();
    let opts = ProfileOptions {
        anchor,
        ..ProfileOptions::default()
    };
    let p = reconstruct_with(&traj, &spec, opts).unwrap();
    (spec, p)
}

/// `u(t)` with `-u' = sqrt(2/3) u (1 - sqrt u)` and `u(0) = 1/2`.
fn exact(t: f64) -> f64 {
    (1.0 + (t / 6f64.sqrt()).exp() * (2f64.sqrt() - 1.0)).powi(-2)
}

fn exact_z(u: f64) -> f64 {
    (2.0f64 / 3.0).sqrt() * u * (1.0 - u.sqrt())
}

#[test]
fn fisher_profile_matches_closed_form() {
    let (_, p) = fisher_profile(0.5);
    let err = p
        .samples
        .iter()
        .map(|s| (s.u - exact(s.t)).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-4, "{err}");
    assert!(p
        .samples
        .windows(2)
        .all(|w| w[0].t < w[1].t && w[0].u > w[1].u));
    assert!(p.samples.iter().all(|s| s.u > 0.0 && s.u < 1.0));
}

#[test]
fn profile_solves_the_reduced_equation() {
    let (_, p) = fisher_profile(0.5);
    let u = p.interpolant();
    let (t0, t1) = p.t_range();
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for k in 1..=50 {
        let t = t0 + (t1 - t0) * k as f64 / 51.0;
        let du = (u.eval(t + h) - u.eval(t - h)) / (2.0 * h);
        worst = worst.max((du + exact_z(u.eval(t))).abs());
    }
    assert!(worst < 1e-4, "{worst}");
}

#[test]
fn derivative_round_trip_on_the_bulk() {
    let (_, p) = fisher_profile(0.5);
    let u = p.interpolant();
    let h = 1e-4;
    for w in p.samples.windows(2) {
        let t = 0.5 * (w[0].t + w[1].t);
        let v = u.eval(t);
        if !(0.05..=0.95).contains(&v) {
            continue;
        }
        let du = (u.eval(t + h) - u.eval(t - h)) / (2.0 * h);
        let z = exact_z(v);
        assert!((-du - z).abs() <= 1e-4 * z, "u = {v}: {} vs {z}", -du);
    }
}

#[test]
fn moving_the_anchor_shifts_time_rigidly() {
    let (_, a) = fisher_profile(0.5);
    let (_, b) = fisher_profile(0.25);
    let shifts: Vec<f64> = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| {
            assert_eq!(x.u, y.u);
            x.t - y.t
        })
        .collect();
    let (lo, hi) = shifts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &s| {
            (l.min(s), h.max(s))
        });
    assert!(hi - lo < 1e-8, "{}", hi - lo);
}

#[test]
fn subcritical_speed_has_no_profile() {
    let spec = ProblemSpec::new(1.0, "0", "1", "u*(1-u)").unwrap();
    let traj = frontspeed_core::shooting::shoot(&spec, 1.0).unwrap();
    assert!(matches!(
        reconstruct(&traj, &spec),
        Err(Error::NotASolution { .. })
    ));
}

#[test]
fn csv_header() {
    let (_, p) = fisher_profile(0.5);
    assert!(p.to_csv().starts_with("t,u\n"));
    assert_eq!(p.to_csv().lines().count(), p.samples.len() + 1);
}
