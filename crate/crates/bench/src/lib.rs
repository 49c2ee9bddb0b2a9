//! Fixtures shared by the benchmarks in `benches/`.

use frontspeed_core::ProblemSpec;

pub fn fisher() -> ProblemSpec {
    ProblemSpec::new(1.0, "0", "1", "u*(1-u)").expect("valid spec")
}

/// Pushed front: bisection between distinct bounds.
pub fn example_two() -> ProblemSpec {
    ProblemSpec::new(1.0, "u", "1-u", "u*(1-u)").expect("valid spec")
}

/// `alpha = 2`, coinciding bounds.
pub fn example_one() -> ProblemSpec {
    ProblemSpec::new(2.0, "0", "u+1", "u^2*(1-u)").expect("valid spec")
}
