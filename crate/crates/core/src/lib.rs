// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod bounds;
pub mod error;
pub mod expr;
pub mod front;
pub mod interp;
pub mod model;
pub mod ode;
pub mod pdecheck;
pub mod quadrature;
pub mod shooting;
pub mod speed;

pub use asymptotics::{EtaRoots, Provenance, SingularLimit};
pub use bounds::{ExistenceCertificate, SpeedBounds};
pub use error::{Error, Result, Side};
pub use expr::{Expr, ExprError};
pub use front::{reconstruct, ProfileOptions, WaveProfile};
pub use model::{LimitValue, ModelError, Numerics, ProblemSpec, ValidationReport};
pub use pdecheck::{simulate, SimConfig, SpeedMeasurement};
pub use shooting::{solve, Classification, NoSolutionReason, SolveOutcome, Trajectory};
pub use speed::{admissible, critical_speed, verdict, SpeedMethod, SpeedResult, Verdict};
