//! Monte Carlo scenario engine and mergeable statistics.

mod bench;
mod engine;
mod responsibility;
mod sample;
mod scenario;
mod stats;

pub use bench::{mode_gap, r_squared, run_bench, BenchConfig, BenchReport, BenchRow, MODE_TOLERANCE};
pub use engine::{run_mcs, ComponentSummary, LevelResult, ResultSet, RunConfig, CHUNK};
pub use responsibility::{run_responsibility, ResponsibilityLevel, ResponsibilityRow};
pub use sample::{reference_scenario, sample_scenario};
pub use scenario::{
    run_scenario, ComponentSet, Evaluation, Mode, OperatingPoint, ScenarioContext, ScenarioOutcome, Tracked,
};
pub use stats::{empirical_distribution, EmpiricalDistribution, Histogram, StatsAccumulator};
