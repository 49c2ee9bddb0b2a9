use std::fmt::Write as _;

use frontspeed_core::front::WaveProfile;
use frontspeed_core::model::Reaction;
use frontspeed_core::shooting::{NoSolutionReason, Trajectory};
use frontspeed_core::speed::SpeedResult;
use frontspeed_core::{
    ProblemSpec, SingularLimit, SpeedBounds, SpeedMeasurement, SpeedMethod, Verdict,
};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct SpecEcho {
    pub alpha: f64,
    pub f: String,
    pub g: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<String>,
    #[serde(rename = "D", skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<String>,
}

impl From<&ProblemSpec> for SpecEcho {
    fn from(spec: &ProblemSpec) -> Self {
        let (h, diffusion, rho) = match &spec.reaction {
            Reaction::Direct(h) => (Some(h.source().to_string()), None, None),
            Reaction::Factored { diffusion, rho } => (
                None,
                Some(diffusion.source().to_string()),
                Some(rho.source().to_string()),
            ),
        };
        SpecEcho {
            alpha: spec.alpha,
            f: spec.f.source().to_string(),
            g: spec.g.source().to_string(),
            h,
            diffusion,
            rho,
        }
    }
}

#[derive(Debug, Default, Serialize)]
pub struct Limits {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h0_alpha: Option<SingularLimit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h1_alpha: Option<SingularLimit>,
}

#[derive(Debug, Serialize)]
pub struct Refusal {
    pub c: f64,
    pub reason: NoSolutionReason,
}

/// Everything a command computed. JSON is this struct verbatim; the human
/// table is rendered from it.
#[derive(Debug, Serialize)]
pub struct Report {
    pub command: &'static str,
    pub spec: SpecEcho,
    pub limits: Limits,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<SpeedBounds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speed: Option<SpeedResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution: Option<Trajectory>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refusal: Option<Refusal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<WaveProfile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SpeedMeasurement>,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    pub timing_seconds: f64,
    /// CSV was written to stdout, so the table is not printed.
    #[serde(skip)]
    pub stdout_taken: bool,
}

impl Report {
    pub fn new(command: &'static str, spec: &ProblemSpec) -> Self {
        Report {
            command,
            spec: spec.into(),
            limits: Limits::default(),
            verdict: None,
            bounds: None,
            speed: None,
            solution: None,
            refusal: None,
            profile: None,
            simulation: None,
            outputs: Vec::new(),
            warnings: Vec::new(),
            timing_seconds: 0.0,
            stdout_taken: false,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let mut row = |key: &str, value: String| {
            let _ = writeln!(out, "{key:<14}{value}");
        };
        let s = &self.spec;
        let h = match (&s.h, &s.diffusion, &s.rho) {
            (Some(h), _, _) => format!("h = {h}"),
            (None, Some(d), Some(r)) => format!("D = {d}, rho = {r}"),
            _ => String::new(),
        };
        row(
            "problem",
            format!("alpha = {}, f = {}, g = {}, {h}", s.alpha, s.f, s.g),
        );
        for (key, limit) in [
            ("h0_alpha", &self.limits.h0_alpha),
            ("h1_alpha", &self.limits.h1_alpha),
        ] {
            if let Some(l) = limit {
                row(key, format!("{} ({:?})", l.value, l.provenance));
            }
        }
        if let Some(b) = &self.bounds {
            row("bounds", format!("[{:.10}, {:.10}]", b.lower, b.upper));
        }
        if let Some(v) = self.verdict {
            row(
                "verdict",
                match v {
                    Verdict::NoFrontsForAnyC => "no fronts for any speed".into(),
                    Verdict::FrontsExistAboveCStar => "fronts exist exactly for c >= c*".into(),
                },
            );
        }
        if let Some(r) = &self.speed {
            let method = match r.method {
                SpeedMethod::CoincidingBounds => "coinciding bounds",
                SpeedMethod::LowerBoundConnects => "lower bound connects",
                SpeedMethod::Bisection => "bisection",
            };
            row(
                "c*",
                format!(
                    "{:.10} +/- {:e} ({method}, {} shots)",
                    r.c_star, r.tolerance, r.iterations
                ),
            );
        }
        if let Some(t) = &self.solution {
            row("c", format!("{}", t.c));
            if let Some(s) = t.slope_at_zero {
                row("z'(0)", format!("{s:.8}"));
            }
            if let Some(s) = t.slope_at_one {
                row("|z'(1)|", format!("{s:.8}"));
            }
            row("samples", t.samples.len().to_string());
        }
        if let Some(r) = &self.refusal {
            row("refused", format!("c = {}: {:?}", r.c, r.reason));
        }
        if let Some(p) = &self.profile {
            let (t0, t1) = p.t_range();
            row(
                "profile",
                format!(
                    "{} points, t in [{t0:.4}, {t1:.4}], D = {}",
                    p.samples.len(),
                    p.diffusion
                ),
            );
        }
        if let Some(m) = &self.simulation {
            row(
                "pde speed",
                format!("{:.6} (slope std. error {:.2e})", m.speed, m.residual),
            );
        }
        for path in &self.outputs {
            row("wrote", path.clone());
        }
        for w in &self.warnings {
            row("warning", w.clone());
        }
        row("time", format!("{:.3} s", self.timing_seconds));
        out
    }
}
