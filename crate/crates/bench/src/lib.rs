//! Shared setup for the criterion benchmarks.

use carbontrace_core::cef::CefSolver;
use carbontrace_core::mcs::{sample_scenario, OperatingPoint, ScenarioContext, Tracked};
use carbontrace_core::network::{build_synthetic, SyntheticConfig};
use carbontrace_core::ScenarioSample;

/// Context for the standard backbone-plus-feeders system.
pub fn standard_context(solver: CefSolver) -> ScenarioContext {
    let net = build_synthetic(&SyntheticConfig::default()).expect("standard system builds");
    ScenarioContext::new(net, solver, Tracked::default()).expect("standard system is valid")
}

/// A fixed seeded scenario and its operating point.
pub fn fixed_point(ctx: &ScenarioContext, index: u64) -> (ScenarioSample, OperatingPoint) {
    let s = sample_scenario(&ctx.net, index, 42);
    let p = ctx.operating_point(&s).expect("scenario solves");
    (s, p)
}
