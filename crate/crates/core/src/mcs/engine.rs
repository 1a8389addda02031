use std::ops::Range;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::sample::sample_scenario;
use super::scenario::{run_scenario, Mode, ScenarioContext, ScenarioOutcome, Tracked};
use super::stats::StatsAccumulator;
use crate::cef::CefSolver;
use crate::error::{Error, Result};
use crate::network::{with_penetration, Network};

/// Scenarios per work unit. Fixed so that results do not depend on the
/// worker count.
pub const CHUNK: u64 = 64;

/// Chunks handed to the pool at once; bounds memory on long runs.
const BATCH_CHUNKS: u64 = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub samples: u64,
    pub seed: u64,
    pub mode: Mode,
    /// Renewable penetration levels; empty runs the network as given.
    pub penetrations: Vec<f64>,
    pub bins: usize,
    /// Scenarios of the range-setting pilot pass.
    pub pilot: u64,
    /// Worker threads; 0 picks the machine's parallelism.
    pub workers: usize,
    pub skip_failures: bool,
    pub cef_solver: CefSolver,
    pub tracked: Tracked,
    /// Largest wind nameplate, as a multiple of expected load, allowed when
    /// rescaling to a penetration level.
    pub res_capacity_cap: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            samples: 1000,
            seed: 42,
            mode: Mode::Virtual,
            penetrations: Vec::new(),
            bins: 100,
            pilot: 1000,
            workers: 0,
            skip_failures: false,
            cef_solver: CefSolver::Matrix,
            tracked: Tracked::default(),
            res_capacity_cap: 3.0,
        }
    }
}

impl RunConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.samples < 1 {
            return bad("sample count must be at least 1".into());
        }
        if self.bins < 2 {
            return bad(format!("bin count must be at least 2, got {}", self.bins));
        }
        if self.pilot < 1 {
            return bad("pilot pass needs at least one scenario".into());
        }
        if let Some(p) = self.penetrations.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return bad(format!("penetration {p} outside [0, 1]"));
        }
        Ok(())
    }

    /// Networks to run: one per penetration level, or the input as given.
    pub fn levels(&self, net: &Network) -> Result<Vec<(Option<f64>, Network)>> {
        if self.penetrations.is_empty() {
            return Ok(vec![(None, net.clone())]);
        }
        self.penetrations
            .iter()
            .map(|&p| Ok((Some(p), with_penetration(net, p, self.res_capacity_cap)?)))
            .collect()
    }

    pub(crate) fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if self.workers > 0 {
            b = b.num_threads(self.workers);
        }
        b.build()
            .map_err(|e| Error::InvalidParameter(format!("cannot start {} workers: {e}", self.workers)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentSummary {
    pub name: String,
    pub count: u64,
    pub mean: f64,
    pub variance: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
}

impl ComponentSummary {
    fn new(name: &str, a: &StatsAccumulator) -> Self {
        ComponentSummary {
            name: name.to_string(),
            count: a.count,
            mean: a.mean,
            variance: a.variance(),
            std_dev: a.std_dev(),
            min: a.min,
            max: a.max,
            p5: a.quantile(0.05),
            p50: a.quantile(0.5),
            p95: a.quantile(0.95),
        }
    }
}

/// Statistics of one penetration level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelResult {
    pub penetration: Option<f64>,
    pub names: Vec<String>,
    pub accumulators: Vec<StatsAccumulator>,
    pub summaries: Vec<ComponentSummary>,
    pub scenarios: u64,
    pub failures: u64,
    /// First few failures as `(index, message)`.
    pub failure_log: Vec<(u64, String)>,
    pub redecompositions: u64,
    pub bus_count: usize,
    /// Virtual buses of the expected-value operating point.
    pub virtual_buses: Option<usize>,
    pub max_conservation_error: f64,
    /// Wall time of the scenario loop, including context setup.
    pub seconds: f64,
}

impl LevelResult {
    pub fn component(&self, name: &str) -> Option<&ComponentSummary> {
        self.summaries.iter().find(|s| s.name == name)
    }

    pub fn system_mean(&self) -> f64 {
        self.summaries[0].mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultSet {
    pub config: RunConfig,
    pub levels: Vec<LevelResult>,
    pub seconds: f64,
}

/// Runs `f` over fixed-size chunks of `0..n` on `pool` and returns the
/// results in chunk order.
pub(crate) fn map_chunks<T, F>(pool: &rayon::ThreadPool, n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<u64>) -> T + Sync,
{
    let chunks: Vec<Range<u64>> = (0..n.div_ceil(CHUNK))
        .map(|c| c * CHUNK..((c + 1) * CHUNK).min(n))
        .collect();
    let mut out = Vec::with_capacity(chunks.len());
    for batch in chunks.chunks(BATCH_CHUNKS as usize) {
        let part: Vec<T> = pool.install(|| batch.par_iter().map(|r| f(r.clone())).collect());
        out.extend(part);
    }
    out
}

struct ChunkStats {
    accs: Vec<StatsAccumulator>,
    failures: Vec<(u64, Error)>,
    redecompositions: u64,
    max_conservation_error: f64,
}

const FAILURE_LOG: usize = 10;

/// Monte Carlo over every penetration level of `cfg`.
pub fn run_mcs(cfg: &RunConfig, net: &Network) -> Result<ResultSet> {
    cfg.check()?;
    let start = Instant::now();
    let pool = cfg.pool()?;
    let mut levels = Vec::new();
    for (penetration, level_net) in cfg.levels(net)? {
        levels.push(run_level(cfg, &pool, penetration, level_net)?);
    }
    Ok(ResultSet {
        config: cfg.clone(),
        levels,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn run_level(
    cfg: &RunConfig,
    pool: &rayon::ThreadPool,
    penetration: Option<f64>,
    net: Network,
) -> Result<LevelResult> {
    let start = Instant::now();
    let ctx = ScenarioContext::new(net, cfg.cef_solver, cfg.tracked)?;
    let run = |i: u64| -> Result<ScenarioOutcome> {
        let s = sample_scenario(&ctx.net, i, cfg.seed);
        run_scenario(&ctx, &s, cfg.mode)
    };

    // Pilot pass: fixes histogram ranges; its outcomes are reused below.
    let pilot_n = cfg.pilot.min(cfg.samples);
    let pilot: Vec<Result<ScenarioOutcome>> = map_chunks(pool, pilot_n, |r| r.map(run).collect::<Vec<_>>())
        .into_iter()
        .flatten()
        .collect();
    if !cfg.skip_failures {
        if let Some(Err(e)) = pilot.iter().find(|o| o.is_err()) {
            return Err(clone_error(e));
        }
    }
    let k = ctx.components.len();
    let mut lo = vec![f64::INFINITY; k];
    let mut hi = vec![f64::NEG_INFINITY; k];
    for o in pilot.iter().flatten() {
        for (c, &v) in o.values.iter().enumerate() {
            lo[c] = lo[c].min(v);
            hi[c] = hi[c].max(v);
        }
    }
    let template: Vec<StatsAccumulator> = (0..k)
        .map(|c| {
            let (min, max) = if lo[c].is_finite() { (lo[c], hi[c]) } else { (0.0, 0.0) };
            let top = if max > 0.0 { 1.05 * max } else { 1.0 };
            StatsAccumulator::new(min.min(0.0), top, cfg.bins)
        })
        .collect();

    let chunk_stats = map_chunks(pool, cfg.samples, |r| {
        let mut cs = ChunkStats {
            accs: template.clone(),
            failures: Vec::new(),
            redecompositions: 0,
            max_conservation_error: 0.0,
        };
        for i in r {
            let outcome = if i < pilot_n {
                pilot[i as usize].as_ref().map(Clone::clone).map_err(clone_error)
            } else {
                run(i)
            };
            match outcome {
                Ok(o) => {
                    for (a, &v) in cs.accs.iter_mut().zip(&o.values) {
                        a.push(v);
                    }
                    cs.redecompositions += o.redecomposed as u64;
                    cs.max_conservation_error = cs.max_conservation_error.max(o.conservation_error);
                }
                Err(e) => {
                    cs.failures.push((i, e));
                    if !cfg.skip_failures {
                        break;
                    }
                }
            }
        }
        cs
    });

    let mut accs = template;
    let mut failures = 0;
    let mut failure_log = Vec::new();
    let mut redecompositions = 0;
    let mut max_conservation_error: f64 = 0.0;
    for cs in chunk_stats {
        if let Some((_, e)) = cs.failures.first().filter(|_| !cfg.skip_failures) {
            return Err(clone_error(e));
        }
        for (a, b) in accs.iter_mut().zip(&cs.accs) {
            a.merge(b);
        }
        failures += cs.failures.len() as u64;
        for (i, e) in cs.failures {
            if failure_log.len() < FAILURE_LOG {
                failure_log.push((i, e.to_string()));
            }
        }
        redecompositions += cs.redecompositions;
        max_conservation_error = max_conservation_error.max(cs.max_conservation_error);
    }
    if failures == cfg.samples {
        return Err(Error::Numerical(format!(
            "all {failures} scenarios failed; first: {}",
            failure_log.first().map(|f| f.1.as_str()).unwrap_or("")
        )));
    }
    let names = ctx.components.names().to_vec();
    let summaries = names
        .iter()
        .zip(&accs)
        .map(|(n, a)| ComponentSummary::new(n, a))
        .collect();
    Ok(LevelResult {
        penetration,
        names,
        accumulators: accs,
        summaries,
        scenarios: cfg.samples,
        failures,
        failure_log,
        redecompositions,
        bus_count: ctx.idx.bus_count(),
        virtual_buses: ctx.partition.as_ref().map(|p| p.block_count()),
        max_conservation_error,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Scenario errors are stored per index and re-raised once; this rebuilds
/// an owned copy with the same message and exit class.
pub(crate) fn clone_error(e: &Error) -> Error {
    match e {
        Error::Scenario { index, source } => Error::Scenario {
            index: *index,
            source: Box::new(clone_error(source)),
        },
        Error::Infeasible(m) => Error::Infeasible(m.clone()),
        Error::Numerical(m) => Error::Numerical(m.clone()),
        Error::Modeling(m) => Error::Modeling(m.clone()),
        Error::InvalidParameter(m) => Error::InvalidParameter(m.clone()),
        Error::StalePartition { expected, found } => Error::StalePartition {
            expected: *expected,
            found: *found,
        },
        other => Error::Numerical(other.to_string()),
    }
}
