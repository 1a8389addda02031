//! CSV and JSON output files.
//!
//! Data files depend only on the network and the run configuration; wall
//! times go to a separate `timing.json` so that reruns can be compared
//! byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mcs::{empirical_distribution, BenchReport, Evaluation, ResponsibilityLevel, ResultSet, RunConfig};
use crate::network::Network;
use crate::virtual_bus::VirtualBusPartition;

pub fn penetration_label(p: Option<f64>) -> String {
    p.map_or_else(|| "as_given".to_string(), |p| p.to_string())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report values serialize");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Provenance sidecar written next to every set of data files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMeta {
    pub tool: String,
    pub version: String,
    pub git_describe: String,
    pub command: String,
    pub network: String,
    pub seed: u64,
    pub samples: u64,
    pub mode: String,
    pub penetrations: Vec<String>,
    pub bins: usize,
    pub cef_solver: String,
    pub skip_failures: bool,
    pub bus_count: usize,
    pub branch_count: usize,
    /// Wall times live in this file, when the command records any.
    pub timing_file: Option<String>,
}

impl RunMeta {
    pub fn new(command: &str, network: &str, git_describe: &str, cfg: &RunConfig, net: &Network) -> Self {
        RunMeta {
            tool: "carbontrace".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            git_describe: git_describe.into(),
            command: command.into(),
            network: network.into(),
            seed: cfg.seed,
            samples: cfg.samples,
            mode: cfg.mode.to_string(),
            penetrations: if cfg.penetrations.is_empty() {
                vec![penetration_label(None)]
            } else {
                cfg.penetrations.iter().map(|&p| penetration_label(Some(p))).collect()
            },
            bins: cfg.bins,
            cef_solver: format!("{:?}", cfg.cef_solver).to_lowercase(),
            skip_failures: cfg.skip_failures,
            bus_count: net.buses.len(),
            branch_count: net.branches.len(),
            timing_file: Some("timing.json".into()),
        }
    }
}

/// Writes `run_meta.json` into `dir` on its own, for commands whose data
/// files are not written by [`write_run`].
pub fn write_meta(dir: &Path, meta: &RunMeta) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let path = dir.join("run_meta.json");
    write_json(&path, meta)?;
    Ok(path)
}

#[derive(Debug, Serialize)]
struct SummaryRow<'a> {
    penetration: &'a str,
    component: &'a str,
    count: u64,
    mean: f64,
    variance: f64,
    std_dev: f64,
    min: f64,
    max: f64,
    p5: f64,
    p50: f64,
    p95: f64,
}

#[derive(Debug, Serialize)]
struct HistogramRow<'a> {
    penetration: &'a str,
    component: &'a str,
    bin: usize,
    lo: f64,
    hi: f64,
    count: u64,
    pdf: f64,
    cdf: f64,
}

#[derive(Debug, Serialize)]
struct TotalsRow {
    penetration: String,
    scenarios: u64,
    failures: u64,
    system_mean: f64,
    load_mean: f64,
    ev_mean: f64,
    losses_mean: f64,
    redecompositions: u64,
    bus_count: usize,
    virtual_buses: Option<usize>,
    max_conservation_error: f64,
}

#[derive(Debug, Serialize)]
struct Timing {
    total_seconds: f64,
    workers: usize,
    mode: String,
    levels: Vec<LevelTiming>,
}

#[derive(Debug, Serialize)]
struct LevelTiming {
    penetration: String,
    seconds: f64,
    seconds_per_scenario: f64,
}

/// Paths written by [`write_run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunFiles {
    pub summary: PathBuf,
    pub histograms: PathBuf,
    pub totals: PathBuf,
    pub meta: PathBuf,
    pub timing: PathBuf,
}

pub fn write_run(dir: &Path, result: &ResultSet, meta: &RunMeta) -> Result<RunFiles> {
    ensure_dir(dir)?;
    let files = RunFiles {
        summary: dir.join("summary.csv"),
        histograms: dir.join("histograms.csv"),
        totals: dir.join("totals.csv"),
        meta: dir.join("run_meta.json"),
        timing: dir.join("timing.json"),
    };
    let mut summary = writer(&files.summary)?;
    let mut hist = writer(&files.histograms)?;
    let mut totals = writer(&files.totals)?;
    for level in &result.levels {
        let label = penetration_label(level.penetration);
        for (s, acc) in level.summaries.iter().zip(&level.accumulators) {
            summary.serialize(SummaryRow {
                penetration: &label,
                component: &s.name,
                count: s.count,
                mean: s.mean,
                variance: s.variance,
                std_dev: s.std_dev,
                min: s.min,
                max: s.max,
                p5: s.p5,
                p50: s.p50,
                p95: s.p95,
            })?;
            let d = empirical_distribution(acc);
            for (b, &count) in acc.histogram.counts.iter().enumerate() {
                hist.serialize(HistogramRow {
                    penetration: &label,
                    component: &s.name,
                    bin: b,
                    lo: d.edges[b],
                    hi: d.edges[b + 1],
                    count,
                    pdf: d.pdf[b],
                    cdf: d.cdf[b],
                })?;
            }
        }
        let sum_prefix = |prefix: &str| {
            level
                .summaries
                .iter()
                .filter(|s| s.name.starts_with(prefix))
                .map(|s| s.mean)
                .sum::<f64>()
        };
        totals.serialize(TotalsRow {
            penetration: label.clone(),
            scenarios: level.scenarios,
            failures: level.failures,
            system_mean: level.system_mean(),
            load_mean: sum_prefix("load:"),
            ev_mean: sum_prefix("ev:"),
            losses_mean: level.component("losses").map_or(f64::NAN, |s| s.mean),
            redecompositions: level.redecompositions,
            bus_count: level.bus_count,
            virtual_buses: level.virtual_buses,
            max_conservation_error: level.max_conservation_error,
        })?;
    }
    summary.flush().map_err(|e| Error::io(&files.summary, e))?;
    hist.flush().map_err(|e| Error::io(&files.histograms, e))?;
    totals.flush().map_err(|e| Error::io(&files.totals, e))?;
    write_json(&files.meta, meta)?;
    let timing = Timing {
        total_seconds: result.seconds,
        workers: result.config.workers,
        mode: result.config.mode.to_string(),
        levels: result
            .levels
            .iter()
            .map(|l| LevelTiming {
                penetration: penetration_label(l.penetration),
                seconds: l.seconds,
                seconds_per_scenario: l.seconds / l.scenarios as f64,
            })
            .collect(),
    };
    write_json(&files.timing, &timing)?;
    Ok(files)
}

#[derive(Debug, Serialize)]
struct PartitionRow {
    bus_id: u32,
    virtual_bus_id: usize,
    is_start: bool,
}

pub fn write_partition<W: std::io::Write>(out: W, p: &VirtualBusPartition) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (bus_id, virtual_bus_id, is_start) in p.rows() {
        w.serialize(PartitionRow {
            bus_id,
            virtual_bus_id,
            is_start,
        })?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

#[derive(Debug, Serialize)]
struct BusDumpRow {
    bus_id: u32,
    e_i: f64,
    consumption_mw: f64,
    load_rate: f64,
}

#[derive(Debug, Serialize)]
struct BranchDumpRow {
    branch_id: u32,
    p_send_mw: f64,
    p_recv_mw: f64,
    intensity: f64,
    loss_rate: f64,
}

/// Per-bus and per-branch CEF values of one operating point:
/// `<stem>_buses.csv` and `<stem>_branches.csv`.
pub fn write_scenario_dump(dir: &Path, net: &Network, stem: &str, eval: &Evaluation) -> Result<(PathBuf, PathBuf)> {
    ensure_dir(dir)?;
    let bus_path = dir.join(format!("{stem}_buses.csv"));
    let branch_path = dir.join(format!("{stem}_branches.csv"));
    let sol = &eval.solution;
    let mut w = writer(&bus_path)?;
    for (i, n) in eval.point.graph.nodes.iter().enumerate() {
        w.serialize(BusDumpRow {
            bus_id: n.bus,
            e_i: sol.bus_intensity[i],
            consumption_mw: n.consumption,
            load_rate: sol.load_rate[i],
        })?;
    }
    w.flush().map_err(|e| Error::io(&bus_path, e))?;
    let mut w = writer(&branch_path)?;
    for (k, b) in net.branches.iter().enumerate() {
        w.serialize(BranchDumpRow {
            branch_id: b.id,
            p_send_mw: eval.point.flow.p_send[k],
            p_recv_mw: eval.point.flow.p_recv(k),
            intensity: sol.branch_intensity[k],
            loss_rate: sol.branch_loss_rate[k],
        })?;
    }
    w.flush().map_err(|e| Error::io(&branch_path, e))?;
    Ok((bus_path, branch_path))
}

#[derive(Debug, Serialize)]
struct ResponsibilityCsvRow<'a> {
    penetration: &'a str,
    generator: &'a str,
    component: &'a str,
    bus_id: Option<u32>,
    mean_rate: f64,
    mean_fraction: Option<f64>,
}

/// One row per component, then `total` (sum of the rows) and `generator`
/// (the generator's own mean emission rate) per level.
pub fn write_responsibility(path: &Path, levels: &[ResponsibilityLevel]) -> Result<()> {
    let mut w = writer(path)?;
    for level in levels {
        let label = penetration_label(level.penetration);
        let mut emit = |component: &str, bus_id: Option<u32>, mean_rate: f64, mean_fraction: Option<f64>| {
            w.serialize(ResponsibilityCsvRow {
                penetration: &label,
                generator: &level.generator,
                component,
                bus_id,
                mean_rate,
                mean_fraction,
            })
        };
        for r in &level.rows {
            let fraction = (!r.mean_fraction.is_nan()).then_some(r.mean_fraction);
            emit(&r.component, r.bus, r.mean_rate, fraction)?;
        }
        emit("total", None, level.total_mean, None)?;
        emit("generator", None, level.generator_mean_rate, None)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_bench_csv(path: &Path, report: &BenchReport) -> Result<()> {
    let mut w = writer(path)?;
    for r in &report.rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Fixed-width table of a benchmark for the terminal.
pub fn format_bench_table(report: &BenchReport) -> String {
    let mut s = format!(
        "{:>8} {:>12} {:>12} {:>9} {:>10} {:>13}\n",
        "samples", "full_s", "virtual_s", "speedup", "full_nodes", "virtual_nodes"
    );
    let opt = |v: Option<f64>, prec: usize| v.map_or_else(|| "-".to_string(), |v| format!("{v:.prec$}"));
    for r in &report.rows {
        s.push_str(&format!(
            "{:>8} {:>12} {:>12.3} {:>9} {:>10} {:>13}\n",
            r.samples,
            opt(r.full_seconds, 3),
            r.virtual_seconds,
            opt(r.speedup, 1),
            r.full_nodes,
            r.virtual_nodes
        ));
    }
    s.push_str(&format!(
        "virtual-mode R^2 over sample counts: {:.4}; max mode gap {:.2e}\n",
        report.virtual_r_squared, report.max_mode_gap
    ));
    s
}
