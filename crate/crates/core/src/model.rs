//! Problem instances: the exponent `alpha`, the coefficient functions
//! `f`, `g`, `h` (or `h = D * rho`), optional closed-form endpoint limits and
//! numerical settings.
//!
//! Problem files are TOML:
//!
//! ```toml
//! [problem]
//! alpha = 2.0
//! f = "0"
//! g = "u+1"
//! h = "u^2*(1-u)"        # or: D = "...", rho = "..."
//! h0_alpha = 1.0         # optional, number or "infinite"
//! h1_alpha = "neg_infinite"  # optional, number <= 0 or "neg_infinite"
//!
//! [numerics]             # optional, every key has a default
//! speed_tol = 1e-6
//! ```
//!
//! Unknown keys are rejected.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::expr::{Expr, ExprError};
use crate::quadrature;

/// A limit value in the extended reals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitValue {
    Finite(f64),
    PosInfinite,
    NegInfinite,
}

impl LimitValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            LimitValue::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, LimitValue::Finite(_))
    }

    pub fn as_f64(self) -> f64 {
        match self {
            LimitValue::Finite(v) => v,
            LimitValue::PosInfinite => f64::INFINITY,
            LimitValue::NegInfinite => f64::NEG_INFINITY,
        }
    }
}

impl fmt::Display for LimitValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LimitValue::Finite(v) => write!(f, "{v}"),
            LimitValue::PosInfinite => f.write_str("infinite"),
            LimitValue::NegInfinite => f.write_str("neg_infinite"),
        }
    }
}

impl Serialize for LimitValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            LimitValue::Finite(v) => s.serialize_f64(*v),
            LimitValue::PosInfinite => s.serialize_str("infinite"),
            LimitValue::NegInfinite => s.serialize_str("neg_infinite"),
        }
    }
}

impl<'de> Deserialize<'de> for LimitValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(i) => Ok(LimitValue::Finite(i as f64)),
            Raw::Num(v) if v.is_finite() => Ok(LimitValue::Finite(v)),
            Raw::Num(v) if v > 0.0 => Ok(LimitValue::PosInfinite),
            Raw::Num(v) if v < 0.0 => Ok(LimitValue::NegInfinite),
            Raw::Text(t) if t == "infinite" || t == "inf" => Ok(LimitValue::PosInfinite),
            Raw::Text(t) if t == "neg_infinite" || t == "-inf" => Ok(LimitValue::NegInfinite),
            _ => Err(serde::de::Error::custom(
                "expected a number, \"infinite\" or \"neg_infinite\"",
            )),
        }
    }
}

/// Numerical settings. Every field has a default; a `[numerics]` section in
/// a problem file overrides individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    /// Interior points of the hypothesis-checking grid.
    pub validation_grid: usize,
    /// Tolerance for `h(0) = h(1) = 0`.
    pub endpoint_tol: f64,
    /// Requested absolute error of the running integral of `g`.
    pub integral_tol: f64,
    /// Running integral of `g` below `-integral_margin` is a violation;
    /// within `±integral_margin` it is a warning.
    pub integral_margin: f64,
    /// Uniform grid size for the mean-value extremum search.
    pub extremum_grid: usize,
    /// Backward shooting starts at `u = 1 - delta_start`.
    pub delta_start: f64,
    /// Backward shooting stops at `u = u_min`.
    pub u_min: f64,
    /// `z(u_min)` below this is considered to vanish.
    pub tol_zero: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Bisection width for the critical speed.
    pub speed_tol: f64,
    /// Profiles are truncated to `[eps_prof, 1 - eps_prof]`.
    pub eps_prof: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            validation_grid: 2001,
            endpoint_tol: 1e-12,
            integral_tol: 1e-10,
            integral_margin: 1e-9,
            extremum_grid: 4097,
            delta_start: 1e-6,
            u_min: 1e-8,
            tol_zero: 1e-7,
            rtol: 1e-10,
            atol: 1e-12,
            speed_tol: 1e-6,
            eps_prof: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reaction {
    /// `h` given directly; the diffusion used for profiles is `D = 1`.
    Direct(Expr),
    /// `h = D * rho`.
    Factored { diffusion: Expr, rho: Expr },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("malformed problem file: {0}")]
    Config(String),
    #[error("in `{field}`: {source}")]
    Expression { field: String, source: ExprError },
    #[error("give either `h` or both `D` and `rho`, not both")]
    AmbiguousReaction,
    #[error("missing reaction: give `h` or both `D` and `rho`")]
    MissingReaction,
    #[error("{0}")]
    InvalidOverride(String),
    #[error("hypothesis violated: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<Violation>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    AlphaPositive,
    HVanishesAtZero,
    HVanishesAtOne,
    HPositive,
    GPositiveAtZero,
    GIntegralPositive,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hypothesis::AlphaPositive => "alpha > 0",
            Hypothesis::HVanishesAtZero => "h(0) = 0",
            Hypothesis::HVanishesAtOne => "h(1) = 0",
            Hypothesis::HPositive => "h(u) > 0 on (0,1)",
            Hypothesis::GPositiveAtZero => "g(0) > 0",
            Hypothesis::GIntegralPositive => "integral of g over [0,u] > 0",
        })
    }
}

/// A hypothesis failing at a witness point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub hypothesis: Hypothesis,
    pub at: f64,
    pub value: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lhs = match self.hypothesis {
            Hypothesis::AlphaPositive => "alpha".to_string(),
            Hypothesis::GIntegralPositive => format!("int_0^{} g", self.at),
            Hypothesis::GPositiveAtZero => format!("g({})", self.at),
            _ => format!("h({})", self.at),
        };
        write!(f, "{} fails: {lhs} = {}", self.hypothesis, self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A problem instance. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub alpha: f64,
    pub f: Expr,
    pub g: Expr,
    pub reaction: Reaction,
    pub h0_override: Option<LimitValue>,
    pub h1_override: Option<LimitValue>,
    pub numerics: Numerics,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    problem: ProblemSection,
    #[serde(default)]
    numerics: Numerics,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemSection {
    alpha: f64,
    f: String,
    g: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h: Option<String>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    diffusion: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h0_alpha: Option<LimitValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h1_alpha: Option<LimitValue>,
}

fn parse_field(field: &str, src: &str) -> Result<Expr, ModelError> {
    Expr::parse(src).map_err(|source| ModelError::Expression {
        field: field.to_string(),
        source,
    })
}

impl ProblemSpec {
    /// Build from expression strings without checking hypotheses.
    pub fn parse(alpha: f64, f: &str, g: &str, h: &str) -> Result<Self, ModelError> {
        Ok(ProblemSpec {
            alpha,
            f: parse_field("f", f)?,
            g: parse_field("g", g)?,
            reaction: Reaction::Direct(parse_field("h", h)?),
            h0_override: None,
            h1_override: None,
            numerics: Numerics::default(),
        })
    }

    /// Like [`ProblemSpec::parse`] with `h = D * rho`.
    pub fn parse_factored(
        alpha: f64,
        f: &str,
        g: &str,
        diffusion: &str,
        rho: &str,
    ) -> Result<Self, ModelError> {
        let mut spec = ProblemSpec::parse(alpha, f, g, "0")?;
        spec.reaction = Reaction::Factored {
            diffusion: parse_field("D", diffusion)?,
            rho: parse_field("rho", rho)?,
        };
        Ok(spec)
    }

    /// Parse and validate.
    pub fn new(alpha: f64, f: &str, g: &str, h: &str) -> Result<Self, ModelError> {
        ProblemSpec::parse(alpha, f, g, h)?.validated()
    }

    pub fn with_numerics(mut self, numerics: Numerics) -> Self {
        self.numerics = numerics;
        self
    }

    pub fn with_h0_override(mut self, value: LimitValue) -> Self {
        self.h0_override = Some(value);
        self
    }

    pub fn with_h1_override(mut self, value: LimitValue) -> Self {
        self.h1_override = Some(value);
        self
    }

    /// Returns `self` if every hypothesis holds on the validation grid.
    pub fn validated(self) -> Result<Self, ModelError> {
        let report = validate(&self).map_err(|source| ModelError::Expression {
            field: "problem".into(),
            source,
        })?;
        if report.is_ok() {
            Ok(self)
        } else {
            Err(ModelError::Validation(report.violations))
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        ProblemSpec::from_toml(&text)?.validated()
    }

    /// Parse a problem file without validating hypotheses.
    pub fn from_toml(text: &str) -> Result<Self, ModelError> {
        let file: ProblemFile =
            toml::from_str(text).map_err(|e| ModelError::Config(e.to_string()))?;
        let p = file.problem;
        let reaction = match (p.h, p.diffusion, p.rho) {
            (Some(h), None, None) => Reaction::Direct(parse_field("h", &h)?),
            (None, Some(d), Some(rho)) => Reaction::Factored {
                diffusion: parse_field("D", &d)?,
                rho: parse_field("rho", &rho)?,
            },
            (Some(_), _, _) => return Err(ModelError::AmbiguousReaction),
            _ => return Err(ModelError::MissingReaction),
        };
        if let Some(v) = p.h0_alpha {
            if matches!(v, LimitValue::NegInfinite) || v.as_f64() < 0.0 {
                return Err(ModelError::InvalidOverride(format!(
                    "h0_alpha must be >= 0 or \"infinite\", got {v}"
                )));
            }
        }
        if let Some(v) = p.h1_alpha {
            if matches!(v, LimitValue::PosInfinite) || v.as_f64() > 0.0 {
                return Err(ModelError::InvalidOverride(format!(
                    "h1_alpha must be <= 0 or \"neg_infinite\", got {v}"
                )));
            }
        }
        Ok(ProblemSpec {
            alpha: p.alpha,
            f: parse_field("f", &p.f)?,
            g: parse_field("g", &p.g)?,
            reaction,
            h0_override: p.h0_alpha,
            h1_override: p.h1_alpha,
            numerics: file.numerics,
        })
    }

    pub fn to_toml(&self) -> String {
        let (h, diffusion, rho) = match &self.reaction {
            Reaction::Direct(h) => (Some(h.source().to_string()), None, None),
            Reaction::Factored { diffusion, rho } => (
                None,
                Some(diffusion.source().to_string()),
                Some(rho.source().to_string()),
            ),
        };
        let file = ProblemFile {
            problem: ProblemSection {
                alpha: self.alpha,
                f: self.f.source().to_string(),
                g: self.g.source().to_string(),
                h,
                diffusion,
                rho,
                h0_alpha: self.h0_override,
                h1_alpha: self.h1_override,
            },
            numerics: self.numerics.clone(),
        };
        toml::to_string(&file).expect("problem spec serializes")
    }

    pub fn eval_f(&self, u: f64) -> Result<f64, ExprError> {
        self.f.eval(u)
    }

    pub fn eval_g(&self, u: f64) -> Result<f64, ExprError> {
        self.g.eval(u)
    }

    pub fn eval_h(&self, u: f64) -> Result<f64, ExprError> {
        match &self.reaction {
            Reaction::Direct(h) => h.eval(u),
            Reaction::Factored { diffusion, rho } => Ok(diffusion.eval(u)? * rho.eval(u)?),
        }
    }

    /// Diffusion coefficient used by profile reconstruction (`1` unless the
    /// reaction was given in factored form).
    pub fn diffusion(&self) -> Expr {
        match &self.reaction {
            Reaction::Direct(_) => Expr::constant(1.0),
            Reaction::Factored { diffusion, .. } => diffusion.clone(),
        }
    }

    /// The reaction `rho` in the PDE `v_t = (D v_x)_x + rho(v) - f(v) v_x`.
    pub fn rho(&self) -> &Expr {
        match &self.reaction {
            Reaction::Direct(h) => h,
            Reaction::Factored { rho, .. } => rho,
        }
    }

    /// Human-readable form of `h`.
    pub fn h_source(&self) -> String {
        match &self.reaction {
            Reaction::Direct(h) => h.source().to_string(),
            Reaction::Factored { diffusion, rho } => {
                format!("({})*({})", diffusion.source(), rho.source())
            }
        }
    }
}

/// Check the standing hypotheses on a uniform grid.
pub fn validate(spec: &ProblemSpec) -> Result<ValidationReport, ExprError> {
    let num = &spec.numerics;
    let mut report = ValidationReport::default();
    if !(spec.alpha > 0.0 && spec.alpha.is_finite()) {
        report.violations.push(Violation {
            hypothesis: Hypothesis::AlphaPositive,
            at: f64::NAN,
            value: spec.alpha,
        });
    }

    for (hyp, u) in [
        (Hypothesis::HVanishesAtZero, 0.0),
        (Hypothesis::HVanishesAtOne, 1.0),
    ] {
        let value = spec.eval_h(u)?;
        if value.abs() > num.endpoint_tol {
            report.violations.push(Violation {
                hypothesis: hyp,
                at: u,
                value,
            });
        }
    }

    let n = num.validation_grid.max(1);
    let step = 1.0 / (n + 1) as f64;
    if let Some((u, value)) = (1..=n)
        .map(|i| i as f64 * step)
        .map(|u| spec.eval_h(u).map(|v| (u, v)))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .find(|&(_, v)| v <= 0.0)
    {
        report.violations.push(Violation {
            hypothesis: Hypothesis::HPositive,
            at: u,
            value,
        });
    }

    let g0 = spec.eval_g(0.0)?;
    if g0 <= 0.0 {
        report.violations.push(Violation {
            hypothesis: Hypothesis::GPositiveAtZero,
            at: 0.0,
            value: g0,
        });
    }

    // Running integral of g, cell by cell.
    let cell_tol = num.integral_tol / (n + 1) as f64;
    let mut running = 0.0;
    let mut warned = false;
    for i in 1..=n + 1 {
        let (a, b) = ((i - 1) as f64 * step, i as f64 * step);
        running += quadrature::integrate(|s| spec.eval_g(s), a, b, cell_tol)?.value;
        if running < -num.integral_margin {
            report.violations.push(Violation {
                hypothesis: Hypothesis::GIntegralPositive,
                at: b,
                value: running,
            });
            break;
        }
        if running < num.integral_margin && !warned {
            warned = true;
            report.warnings.push(format!(
                "integral of g over [0,{b}] is {running:.3e}: positivity is numerically undecidable here"
            ));
        }
    }
    Ok(report)
}
