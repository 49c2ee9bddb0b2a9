//! Dormand–Prince 5(4) for scalar ODEs `dz/du = F(u, z)`, integrating in
//! either direction of `u`.
//!
//! A right-hand side may return a non-finite value to signal that a trial
//! stage left the region where `F` is defined (for instance `z <= 0`); the
//! step is then rejected and retried with a smaller step instead of failing.

use serde::Serialize;

// Butcher tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;

const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// 5th minus 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest permitted step, relative to `max(|u|, 1e-300)`.
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-10,
            atol: 1e-12,
            min_step: 1e-14,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Stats {
    pub steps: usize,
    pub rejected: usize,
    pub min_step: f64,
    pub rhs_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OdeError<E> {
    /// The step size fell below the permitted minimum at `u`.
    StepUnderflow {
        u: f64,
        step: f64,
    },
    TooManySteps {
        u: f64,
    },
    Rhs(E),
}

impl<E> From<E> for OdeError<E> {
    fn from(e: E) -> Self {
        OdeError::Rhs(e)
    }
}

/// Adaptive integrator state; the step size carries over between calls to
/// [`Dopri5::advance`], so a trajectory can be split at checkpoints without
/// restarting the step controller.
#[derive(Debug, Clone)]
pub struct Dopri5 {
    tol: Tolerances,
    step: Option<f64>,
    pub stats: Stats,
}

impl Dopri5 {
    pub fn new(tol: Tolerances) -> Self {
        Dopri5 {
            tol,
            step: None,
            stats: Stats {
                min_step: f64::INFINITY,
                ..Stats::default()
            },
        }
    }

    /// Integrate from `(u0, z0)` towards `u1`, calling `observe(u, z, dz)`
    /// after every accepted step. Returning `false` from `observe` stops the
    /// integration early. Returns the last accepted `(u, z)`, which is
    /// `(u1, z(u1))` unless stopped.
    pub fn advance<F, E, O>(
        &mut self,
        rhs: &mut F,
        u0: f64,
        z0: f64,
        u1: f64,
        initial_step: f64,
        mut observe: O,
    ) -> Result<(f64, f64), OdeError<E>>
    where
        F: FnMut(f64, f64) -> Result<f64, E>,
        O: FnMut(f64, f64, f64) -> bool,
    {
        let span = u1 - u0;
        if span == 0.0 {
            return Ok((u0, z0));
        }
        let dir = span.signum();
        let mut h = self.step.unwrap_or(initial_step.abs()).min(span.abs());
        let mut u = u0;
        let mut z = z0;
        let mut k1 = rhs(u, z)?;
        self.stats.rhs_evaluations += 1;
        let mut steps_here = 0usize;
        loop {
            let remaining = (u1 - u).abs();
            let proposed = h;
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            let hs = dir * h;
            let trial = self.try_step(rhs, u, z, k1, hs)?;
            self.stats.rhs_evaluations += 6;
            let (z_new, k7, err) = trial.unwrap_or((f64::NAN, f64::NAN, f64::INFINITY));
            if err <= 1.0 {
                u = if last { u1 } else { u + hs };
                z = z_new;
                k1 = k7;
                self.stats.steps += 1;
                self.stats.min_step = self.stats.min_step.min(h);
                let go_on = observe(u, z, k1);
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                if last {
                    self.step = Some(proposed.max(h * factor));
                    return Ok((u, z));
                }
                h *= factor;
                self.step = Some(h);
                if !go_on {
                    return Ok((u, z));
                }
            } else {
                self.stats.rejected += 1;
                let factor = if err.is_finite() {
                    (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
                } else {
                    0.25
                };
                h *= factor;
            }
            if h < self.tol.min_step * u.abs().max(1e-300) {
                return Err(OdeError::StepUnderflow { u, step: h });
            }
            steps_here += 1;
            if steps_here > self.tol.max_steps {
                return Err(OdeError::TooManySteps { u });
            }
        }
    }

    #[allow(clippy::type_complexity)]
    fn try_step<F, E>(
        &self,
        rhs: &mut F,
        u: f64,
        z: f64,
        k1: f64,
        h: f64,
    ) -> Result<Option<(f64, f64, f64)>, OdeError<E>>
    where
        F: FnMut(f64, f64) -> Result<f64, E>,
    {
        macro_rules! stage {
            ($c:expr, $z:expr) => {{
                let zz = $z;
                if !zz.is_finite() {
                    return Ok(None);
                }
                let k = rhs(u + $c * h, zz)?;
                if !k.is_finite() {
                    return Ok(None);
                }
                k
            }};
        }
        let k2 = stage!(C2, z + h * A21 * k1);
        let k3 = stage!(C3, z + h * (A31 * k1 + A32 * k2));
        let k4 = stage!(C4, z + h * (A41 * k1 + A42 * k2 + A43 * k3));
        let k5 = stage!(C5, z + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
        let k6 = stage!(
            1.0,
            z + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5)
        );
        let z_new = z + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        let k7 = stage!(1.0, z_new);
        let err_abs = (h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)).abs();
        let scale = self.tol.atol + self.tol.rtol * z.abs().max(z_new.abs());
        Ok(Some((z_new, k7, err_abs / scale)))
    }
}

/// Linearly implicit second-order Rosenbrock method with a third-order
/// error estimate (the Shampine–Reichelt pair), for stretches where the
/// problem is stiff. Needs `dF/dz` and `dF/du`.
#[derive(Debug, Clone)]
pub struct Rosenbrock23 {
    tol: Tolerances,
    step: Option<f64>,
    pub stats: Stats,
}

const ROS_D: f64 = 0.292_893_218_813_452_5; // 1 / (2 + sqrt 2)
const ROS_E32: f64 = 7.414_213_562_373_095; // 6 + sqrt 2

impl Rosenbrock23 {
    pub fn new(tol: Tolerances) -> Self {
        Rosenbrock23 {
            tol,
            step: None,
            stats: Stats {
                min_step: f64::INFINITY,
                ..Stats::default()
            },
        }
    }

    /// Same contract as [`Dopri5::advance`]; `jac(u, z)` returns
    /// `(dF/dz, dF/du)`.
    #[allow(clippy::too_many_arguments)]
    pub fn advance<F, J, E, O>(
        &mut self,
        rhs: &mut F,
        jac: &mut J,
        u0: f64,
        z0: f64,
        u1: f64,
        initial_step: f64,
        mut observe: O,
    ) -> Result<(f64, f64), OdeError<E>>
    where
        F: FnMut(f64, f64) -> Result<f64, E>,
        J: FnMut(f64, f64) -> Result<(f64, f64), E>,
        O: FnMut(f64, f64, f64) -> bool,
    {
        let span = u1 - u0;
        if span == 0.0 {
            return Ok((u0, z0));
        }
        let dir = span.signum();
        let mut h = self.step.unwrap_or(initial_step.abs()).min(span.abs());
        let (mut u, mut z) = (u0, z0);
        let mut f0 = rhs(u, z)?;
        self.stats.rhs_evaluations += 1;
        let mut steps_here = 0usize;
        loop {
            let remaining = (u1 - u).abs();
            let proposed = h;
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            let hs = dir * h;
            let (dfdz, dfdu) = jac(u, z)?;
            let w = 1.0 - hs * ROS_D * dfdz;
            let mut trial = None;
            if w.is_finite() && w != 0.0 && dfdu.is_finite() {
                let k1 = (f0 + hs * ROS_D * dfdu) / w;
                let f1 = rhs(u + 0.5 * hs, z + 0.5 * hs * k1)?;
                let k2 = (f1 - k1) / w + k1;
                let z_new = z + hs * k2;
                let f2 = if z_new.is_finite() {
                    rhs(u + hs, z_new)?
                } else {
                    f64::NAN
                };
                self.stats.rhs_evaluations += 2;
                let k3 = (f2 - ROS_E32 * (k2 - f1) - 2.0 * (k1 - f0) + hs * ROS_D * dfdu) / w;
                let err_abs = (hs / 6.0 * (k1 - 2.0 * k2 + k3)).abs();
                let scale = self.tol.atol + self.tol.rtol * z.abs().max(z_new.abs());
                let err = err_abs / scale;
                if err.is_finite() && f2.is_finite() {
                    trial = Some((z_new, f2, err));
                }
            }
            match trial {
                Some((z_new, f2, err)) if err <= 1.0 => {
                    u = if last { u1 } else { u + hs };
                    z = z_new;
                    f0 = f2;
                    self.stats.steps += 1;
                    self.stats.min_step = self.stats.min_step.min(h);
                    let go_on = observe(u, z, f0);
                    let factor = if err == 0.0 {
                        5.0
                    } else {
                        (0.9 * err.powf(-1.0 / 3.0)).clamp(0.2, 5.0)
                    };
                    if last {
                        self.step = Some(proposed.max(h * factor));
                        return Ok((u, z));
                    }
                    h *= factor;
                    self.step = Some(h);
                    if !go_on {
                        return Ok((u, z));
                    }
                }
                Some((_, _, err)) => {
                    self.stats.rejected += 1;
                    h *= (0.9 * err.powf(-1.0 / 3.0)).clamp(0.1, 0.9);
                }
                None => {
                    self.stats.rejected += 1;
                    h *= 0.25;
                }
            }
            if h < self.tol.min_step * u.abs().max(1e-300) {
                return Err(OdeError::StepUnderflow { u, step: h });
            }
            steps_here += 1;
            if steps_here > self.tol.max_steps {
                return Err(OdeError::TooManySteps { u });
            }
        }
    }
}

/// Consecutive steps with `|h dF/dz|` past the threshold before switching
/// back to the explicit method.
const SWITCH_AFTER: usize = 10;
/// Beyond this the explicit step is limited by stability, not accuracy.
/// A step controller at its stability limit oscillates around the boundary
/// (about 3.3 for Dormand–Prince), so stiff steps are counted with a
/// decaying score rather than consecutively.
const STIFF_PRODUCT: f64 = 1.5;
const STIFF_SCORE: f64 = 4.0;
const SCORE_DECAY: f64 = 0.8;
/// Below this the explicit method is stable with room to spare.
const NONSTIFF_PRODUCT: f64 = 0.5;
/// Tolerance floor on stiff stretches. Local errors there are damped like
/// `exp(-integral |dF/dz|)` within a few steps, so tighter control only
/// costs steps of the second-order method.
const STIFF_TOL_FLOOR: f64 = 1e-7;

/// Dormand–Prince while the problem is non-stiff, Rosenbrock while the
/// explicit step is pinned by stability. The decision uses `|h dF/dz|` on
/// decaying modes.
#[derive(Debug, Clone)]
pub struct Switching {
    explicit: Dopri5,
    implicit: Rosenbrock23,
    stiff: bool,
    pub switches: usize,
}

impl Switching {
    pub fn new(tol: Tolerances) -> Self {
        Switching {
            explicit: Dopri5::new(tol),
            implicit: Rosenbrock23::new(Tolerances {
                atol: tol.atol.max(STIFF_TOL_FLOOR),
                rtol: if tol.rtol > 0.0 {
                    tol.rtol.max(STIFF_TOL_FLOOR)
                } else {
                    0.0
                },
                ..tol
            }),
            stiff: false,
            switches: 0,
        }
    }

    pub fn stats(&self) -> Stats {
        let (a, b) = (self.explicit.stats, self.implicit.stats);
        Stats {
            steps: a.steps + b.steps,
            rejected: a.rejected + b.rejected,
            min_step: a.min_step.min(b.min_step),
            rhs_evaluations: a.rhs_evaluations + b.rhs_evaluations,
        }
    }

    pub fn is_stiff(&self) -> bool {
        self.stiff
    }

    /// Integrate from `(u0, z0)` to `u1`; returns `z(u1)`.
    #[allow(clippy::too_many_arguments)]
    pub fn advance<F, J, E, O>(
        &mut self,
        rhs: &mut F,
        jac: &J,
        u0: f64,
        z0: f64,
        u1: f64,
        initial_step: f64,
        mut observe: O,
    ) -> Result<f64, OdeError<E>>
    where
        F: FnMut(f64, f64) -> Result<f64, E>,
        J: Fn(f64, f64) -> Result<(f64, f64), E>,
        O: FnMut(f64, f64, f64),
    {
        let dir = (u1 - u0).signum();
        let (mut u, mut z) = (u0, z0);
        let mut step = initial_step;
        if !self.stiff && initial_step > 0.0 {
            // Starting on a stiff manifold, an explicit method may not
            // survive long enough to notice.
            let (dfdz, _) = jac(u0, z0).map_err(OdeError::Rhs)?;
            if -dir * dfdz * initial_step > STIFF_PRODUCT {
                self.stiff = true;
                self.switches += 1;
            }
        }
        while u != u1 {
            let stiff = self.stiff;
            let mut run = 0usize;
            let mut score = 0.0f64;
            let mut prev = u;
            let mut last_h = step;
            let mut jac_err = None;
            let end = {
                let mut watch = |uu: f64, zz: f64, dz: f64| {
                    observe(uu, zz, dz);
                    last_h = (uu - prev).abs();
                    prev = uu;
                    let dfdz = match jac(uu, zz) {
                        Ok((d, _)) => d,
                        Err(e) => {
                            jac_err = Some(e);
                            return false;
                        }
                    };
                    // Only decaying modes along the direction of travel
                    // constrain an explicit step.
                    let rate = dir * dfdz;
                    let product = if rate < 0.0 { -rate * last_h } else { 0.0 };
                    if stiff {
                        run = if product < NONSTIFF_PRODUCT {
                            run + 1
                        } else {
                            0
                        };
                        run < SWITCH_AFTER
                    } else {
                        score = SCORE_DECAY * score + f64::from(u8::from(product > STIFF_PRODUCT));
                        score < STIFF_SCORE
                    }
                };
                if stiff {
                    let mut jac_mut = |a: f64, b: f64| jac(a, b);
                    self.implicit
                        .advance(rhs, &mut jac_mut, u, z, u1, step, &mut watch)?
                } else {
                    self.explicit.advance(rhs, u, z, u1, step, &mut watch)?
                }
            };
            if let Some(e) = jac_err {
                return Err(OdeError::Rhs(e));
            }
            (u, z) = end;
            if u != u1 {
                self.stiff = !stiff;
                self.switches += 1;
                step = last_h;
                // The incoming method resumes from the other's step size.
                if self.stiff {
                    self.implicit.step = Some(last_h);
                } else {
                    self.explicit.step = Some(last_h);
                }
            }
        }
        Ok(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn exponential_decay_forward_and_backward() {
        let mut rhs = |_u: f64, z: f64| Ok::<_, Infallible>(-z);
        let mut ode = Dopri5::new(Tolerances::default());
        let (_, z1) = ode
            .advance(&mut rhs, 0.0, 1.0, 2.0, 1e-3, |_, _, _| true)
            .unwrap();
        assert!((z1 - (-2.0f64).exp()).abs() < 1e-10);

        let mut ode = Dopri5::new(Tolerances::default());
        let (_, z0) = ode
            .advance(&mut rhs, 2.0, z1, 0.0, 1e-3, |_, _, _| true)
            .unwrap();
        assert!((z0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn observer_sees_monotone_u_and_ends_on_target() {
        let mut rhs = |u: f64, _z: f64| Ok::<_, Infallible>(u.cos());
        let mut ode = Dopri5::new(Tolerances::default());
        let mut seen = Vec::new();
        let (_, z) = ode
            .advance(&mut rhs, 1.0, 0.0, -1.0, 1e-2, |u, _, _| {
                seen.push(u);
                true
            })
            .unwrap();
        assert!(seen.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(*seen.last().unwrap(), -1.0);
        assert!((z - (-2.0 * 1f64.sin())).abs() < 1e-10);
        assert_eq!(ode.stats.steps, seen.len());
    }

    #[test]
    fn nan_stages_shrink_the_step() {
        // sqrt is undefined for z < 0; large trial steps overshoot into it.
        let mut rhs =
            |_u: f64, z: f64| Ok::<_, Infallible>(if z < 0.0 { f64::NAN } else { -z.sqrt() });
        let mut ode = Dopri5::new(Tolerances::default());
        let (_, z) = ode
            .advance(&mut rhs, 0.0, 1.0, 1.9, 1.0, |_, _, _| true)
            .unwrap();
        // exact: z = (1 - u/2)^2
        assert!((z - 0.05f64.powi(2)).abs() < 1e-9, "{z}");
        assert!(ode.stats.rejected > 0);
    }

    #[test]
    fn underflow_is_reported() {
        let mut rhs = |_u: f64, _z: f64| Ok::<_, Infallible>(f64::NAN);
        let mut ode = Dopri5::new(Tolerances::default());
        let r = ode.advance(&mut rhs, 0.0, 1.0, 1.0, 0.1, |_, _, _| true);
        assert!(matches!(r, Err(OdeError::StepUnderflow { .. })));
    }

    #[test]
    fn rosenbrock_on_stiff_relaxation() {
        // z' = -k (z - cos u): z tracks cos u + sin u / k + O(1/k^2).
        let k = 1e8;
        let mut rhs = |u: f64, z: f64| Ok::<_, Infallible>(-k * (z - u.cos()));
        let mut jac = |u: f64, _z: f64| Ok::<_, Infallible>((-k, -k * u.sin()));
        let mut ode = Rosenbrock23::new(Tolerances {
            rtol: 1e-7,
            atol: 1e-9,
            ..Tolerances::default()
        });
        let (_, z) = ode
            .advance(&mut rhs, &mut jac, 0.0, 1.0, 2.0, 1e-3, |_, _, _| true)
            .unwrap();
        let expect = 2f64.cos() - 2f64.sin() / k;
        assert!((z - expect).abs() < 1e-7, "{z} vs {expect}");
        assert!(ode.stats.steps < 10_000, "{:?}", ode.stats);
    }

    #[test]
    fn switching_detects_stiffness_and_returns() {
        // Stiff near u = 0, non-stiff by u = 1.
        let rate = |u: f64| 1e7 * (-20.0 * u).exp();
        let mut rhs = |u: f64, z: f64| Ok::<_, Infallible>(-rate(u) * (z - u.cos()));
        let jac = |u: f64, z: f64| {
            let k = rate(u);
            Ok::<_, Infallible>((-k, 20.0 * k * (z - u.cos()) - k * u.sin()))
        };
        let mut ode = Switching::new(Tolerances::default());
        let z = ode
            .advance(&mut rhs, &jac, 0.0, 1.0, 3.0, 1e-6, |_, _, _| {})
            .unwrap();
        assert!(ode.switches >= 2, "{}", ode.switches);
        assert!(!ode.is_stiff());

        let mut reference = Dopri5::new(Tolerances::default());
        let (_, exact) = reference
            .advance(&mut rhs, 0.0, 1.0, 3.0, 1e-6, |_, _, _| true)
            .unwrap();
        assert!((z - exact).abs() < 1e-6, "{z} vs {exact}");
        assert!(
            ode.stats().steps * 10 < reference.stats.steps,
            "{:?}",
            ode.stats()
        );
    }
}
