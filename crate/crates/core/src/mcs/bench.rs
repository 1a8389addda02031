use serde::Serialize;

use super::engine::{run_mcs, ResultSet, RunConfig};
use super::scenario::Mode;
use crate::error::{Error, Result};
use crate::network::Network;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchConfig {
    pub sample_counts: Vec<u64>,
    /// Full mode is timed only up to this many samples.
    pub full_max: u64,
    /// Scenarios of the discarded warm-up run in each mode.
    pub warmup: u64,
    /// Scenarios compared between modes when full mode is not timed.
    pub equivalence_samples: u64,
    /// Virtual-mode timings per sample count; the fastest one is reported.
    pub repeats: u32,
    pub run: RunConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sample_counts: vec![1000, 5000, 10_000, 20_000],
            full_max: u64::MAX,
            warmup: 50,
            equivalence_samples: 100,
            repeats: 3,
            run: RunConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub samples: u64,
    pub full_seconds: Option<f64>,
    pub virtual_seconds: f64,
    pub speedup: Option<f64>,
    pub full_nodes: usize,
    pub virtual_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Coefficient of determination of virtual-mode time against samples.
    pub virtual_r_squared: f64,
    /// Largest relative gap between the modes' component means.
    pub max_mode_gap: f64,
}

/// `|a - b| / max(1, |a|)` over every component mean of every level.
pub fn mode_gap(a: &ResultSet, b: &ResultSet) -> Result<f64> {
    let mut gap: f64 = 0.0;
    for (la, lb) in a.levels.iter().zip(&b.levels) {
        if la.names != lb.names || la.summaries.len() != lb.summaries.len() {
            return Err(Error::Numerical("runs track different components".into()));
        }
        for (x, y) in la.summaries.iter().zip(&lb.summaries) {
            gap = gap.max((x.mean - y.mean).abs() / x.mean.abs().max(1.0));
        }
    }
    Ok(gap)
}

/// Largest tolerated [`mode_gap`].
pub const MODE_TOLERANCE: f64 = 1e-10;

fn with(cfg: &RunConfig, mode: Mode, samples: u64) -> RunConfig {
    RunConfig {
        mode,
        samples,
        ..cfg.clone()
    }
}

fn scenario_seconds(r: &ResultSet) -> f64 {
    r.levels.iter().map(|l| l.seconds).sum()
}

/// Least-squares fit of `y` on `x`; returns the coefficient of determination.
pub fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return 1.0;
    }
    sxy * sxy / (sxx * syy)
}

/// Times both modes on identical seeds. Refuses to report when the modes
/// disagree.
pub fn run_bench(cfg: &BenchConfig, net: &Network) -> Result<BenchReport> {
    if cfg.sample_counts.is_empty() {
        return Err(Error::InvalidParameter("no sample counts to benchmark".into()));
    }
    if cfg.warmup > 0 {
        run_mcs(&with(&cfg.run, Mode::Virtual, cfg.warmup), net)?;
        run_mcs(&with(&cfg.run, Mode::Full, cfg.warmup), net)?;
    }
    let mut rows = Vec::new();
    let mut max_gap: f64 = 0.0;
    for &n in &cfg.sample_counts {
        let virt = run_mcs(&with(&cfg.run, Mode::Virtual, n), net)?;
        let full = if n <= cfg.full_max {
            let full = run_mcs(&with(&cfg.run, Mode::Full, n), net)?;
            max_gap = max_gap.max(mode_gap(&full, &virt)?);
            Some(full)
        } else {
            let m = cfg.equivalence_samples.min(n).max(1);
            let a = run_mcs(&with(&cfg.run, Mode::Full, m), net)?;
            let b = run_mcs(&with(&cfg.run, Mode::Virtual, m), net)?;
            max_gap = max_gap.max(mode_gap(&a, &b)?);
            None
        };
        if max_gap > MODE_TOLERANCE {
            return Err(Error::Numerical(format!(
                "full and virtual modes disagree by {max_gap:.3e} at {n} samples; timings withheld"
            )));
        }
        let level = &virt.levels[0];
        let mut virtual_seconds = scenario_seconds(&virt);
        for _ in 1..cfg.repeats {
            let again = run_mcs(&with(&cfg.run, Mode::Virtual, n), net)?;
            virtual_seconds = virtual_seconds.min(scenario_seconds(&again));
        }
        let full_seconds = full.as_ref().map(scenario_seconds);
        rows.push(BenchRow {
            samples: n,
            full_seconds,
            virtual_seconds,
            speedup: full_seconds.map(|f| f / virtual_seconds),
            full_nodes: level.bus_count,
            virtual_nodes: level.virtual_buses.unwrap_or(level.bus_count),
        });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.samples as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.virtual_seconds).collect();
    Ok(BenchReport {
        virtual_r_squared: r_squared(&x, &y),
        rows,
        max_mode_gap: max_gap,
    })
}
