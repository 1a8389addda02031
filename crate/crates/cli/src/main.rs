use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use carbontrace_core::cef::CefSolver;
use carbontrace_core::mcs::{
    reference_scenario, run_bench, run_mcs, run_responsibility, sample_scenario, BenchConfig, Mode, RunConfig,
    ScenarioContext, Tracked,
};
use carbontrace_core::network::{build_synthetic, nine_node_feeder, save_network, with_penetration, SyntheticConfig};
use carbontrace_core::powerflow::read_flow_file;
use carbontrace_core::report::{
    format_bench_table, penetration_label, write_bench_csv, write_meta, write_partition, write_responsibility,
    write_run, write_scenario_dump, RunMeta,
};
use carbontrace_core::{load_network, Error, Network, Result};

const GIT_DESCRIBE: &str = env!("CARBONTRACE_GIT_DESCRIBE");

#[derive(Parser, Debug)]
#[command(name = "carbontrace", version, about = "Probabilistic carbon emission flow analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo run: summary, histogram and totals CSVs.
    Run(RunCmd),
    /// Times full against virtual mode over a grid of sample counts.
    Bench(BenchCmd),
    /// Virtual-bus partition of the expected-value operating point.
    Decompose(DecomposeCmd),
    /// Traces one generator's emissions to every load and loss.
    Responsibility(ResponsibilityCmd),
    /// Intensities of a single operating point, optionally from a flow file.
    Cef(CefCmd),
    /// Writes a synthetic test network.
    Synth(SynthCmd),
    /// Checks a network file and reports every problem found.
    Validate(ValidateCmd),
}

#[derive(Args, Debug)]
struct Sampling {
    #[arg(long)]
    network: PathBuf,
    #[arg(long, default_value_t = 1000)]
    samples: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Renewable penetration level; repeat for several.
    #[arg(long = "penetration")]
    penetrations: Vec<f64>,
    /// Worker threads, 0 for one per core.
    #[arg(long, env = "CARBONTRACE_WORKERS", default_value_t = 0)]
    workers: usize,
    /// Count failing scenarios instead of aborting on the first.
    #[arg(long)]
    skip_failures: bool,
    /// auto, sweep or matrix.
    #[arg(long, default_value = "matrix")]
    cef_solver: CefSolver,
}

impl Sampling {
    fn config(&self, mode: Mode) -> RunConfig {
        RunConfig {
            samples: self.samples,
            seed: self.seed,
            mode,
            penetrations: self.penetrations.clone(),
            workers: self.workers,
            skip_failures: self.skip_failures,
            cef_solver: self.cef_solver,
            ..Default::default()
        }
    }
}

#[derive(Args, Debug)]
struct RunCmd {
    #[command(flatten)]
    sampling: Sampling,
    /// full or virtual.
    #[arg(long, default_value = "virtual")]
    mode: Mode,
    #[arg(long, default_value_t = 100)]
    bins: usize,
    /// Scenarios of the pass that fixes the histogram ranges.
    #[arg(long, default_value_t = 1000)]
    pilot: u64,
    /// Also write per-bus and per-branch values of this scenario; repeatable.
    #[arg(long = "dump-scenario")]
    dump_scenarios: Vec<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchCmd {
    #[arg(long)]
    network: PathBuf,
    /// Sample counts to time; repeatable.
    #[arg(long = "samples", default_values_t = [1000u64, 5000, 10_000, 20_000])]
    sample_counts: Vec<u64>,
    /// Largest sample count full mode is timed at.
    #[arg(long)]
    full_max: Option<u64>,
    #[arg(long, default_value_t = 50)]
    warmup: u64,
    /// Virtual-mode timings per sample count; the fastest is reported.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    repeats: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    penetration: Option<f64>,
    #[arg(long, env = "CARBONTRACE_WORKERS", default_value_t = 0)]
    workers: usize,
    #[arg(long, default_value = "matrix")]
    cef_solver: CefSolver,
    /// Directory for bench.csv and its metadata.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DecomposeCmd {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    penetration: Option<f64>,
    /// Directory for partition.csv; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ResponsibilityCmd {
    #[command(flatten)]
    sampling: Sampling,
    #[arg(long)]
    generator: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CefCmd {
    #[arg(long)]
    network: PathBuf,
    /// Branch flows (branch_id, p_send_mw, p_recv_mw) replacing the DC solve.
    #[arg(long)]
    flows: Option<PathBuf>,
    /// Sampled scenario to evaluate; the expected-value point when absent.
    #[arg(long)]
    scenario: Option<u64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    penetration: Option<f64>,
    #[arg(long, default_value = "full")]
    mode: Mode,
    #[arg(long, default_value = "auto")]
    cef_solver: CefSolver,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SynthCmd {
    /// The nine-bus feeder instead of the backbone-plus-feeders system.
    #[arg(long)]
    nine_node: bool,
    #[arg(long, default_value_t = 30)]
    feeders: usize,
    #[arg(long, default_value_t = 1)]
    der_per_feeder: usize,
    #[arg(long, default_value_t = 0.4)]
    penetration: f64,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ValidateCmd {
    #[arg(long)]
    network: PathBuf,
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn single_level(net: Network, penetration: Option<f64>) -> Result<Network> {
    match penetration {
        Some(p) => with_penetration(&net, p, RunConfig::default().res_capacity_cap),
        None => Ok(net),
    }
}

fn cmd_run(c: &RunCmd) -> Result<()> {
    let net = load_network(&c.sampling.network)?;
    let cfg = RunConfig {
        bins: c.bins,
        pilot: c.pilot,
        ..c.sampling.config(c.mode)
    };
    let result = run_mcs(&cfg, &net)?;
    let meta = RunMeta::new("run", &display(&c.sampling.network), GIT_DESCRIBE, &cfg, &net);
    let files = write_run(&c.out, &result, &meta)?;
    for level in &result.levels {
        let system = &level.summaries[0];
        println!(
            "penetration {}: {} scenarios, {} failed, system {:.3} +/- {:.3} tCO2/h, {:.2} s",
            penetration_label(level.penetration),
            level.scenarios,
            level.failures,
            system.mean,
            system.std_dev,
            level.seconds
        );
        for (index, message) in &level.failure_log {
            eprintln!("  scenario {index}: {message}");
        }
    }
    if !c.dump_scenarios.is_empty() {
        for (p, level_net) in cfg.levels(&net)? {
            let ctx = ScenarioContext::new(level_net, cfg.cef_solver, cfg.tracked)?;
            for &i in &c.dump_scenarios {
                let s = sample_scenario(&ctx.net, i, cfg.seed);
                let eval = ctx.evaluate(&s, cfg.mode).map_err(|e| e.in_scenario(i))?;
                let stem = match p {
                    Some(p) => format!("p{p}_scenario_{i}"),
                    None => format!("scenario_{i}"),
                };
                write_scenario_dump(&c.out, &ctx.net, &stem, &eval)?;
            }
        }
    }
    println!("wrote {}", display(files.summary.parent().unwrap_or(&c.out)));
    Ok(())
}

fn cmd_bench(c: &BenchCmd) -> Result<()> {
    let net = load_network(&c.network)?;
    let run = RunConfig {
        seed: c.seed,
        workers: c.workers,
        cef_solver: c.cef_solver,
        penetrations: c.penetration.into_iter().collect(),
        ..Default::default()
    };
    let cfg = BenchConfig {
        sample_counts: c.sample_counts.clone(),
        full_max: c.full_max.unwrap_or(u64::MAX),
        warmup: c.warmup,
        repeats: c.repeats,
        run,
        ..Default::default()
    };
    let report = run_bench(&cfg, &net)?;
    print!("{}", format_bench_table(&report));
    if let Some(dir) = &c.out {
        write_meta(dir, &meta_without_timing("bench", &c.network, &cfg.run, &net))?;
        write_bench_csv(&dir.join("bench.csv"), &report)?;
    }
    Ok(())
}

fn meta_without_timing(command: &str, network: &Path, cfg: &RunConfig, net: &Network) -> RunMeta {
    RunMeta {
        timing_file: None,
        ..RunMeta::new(command, &display(network), GIT_DESCRIBE, cfg, net)
    }
}

fn cmd_decompose(c: &DecomposeCmd) -> Result<()> {
    let net = single_level(load_network(&c.network)?, c.penetration)?;
    let ctx = ScenarioContext::new(net, CefSolver::Auto, Tracked::default())?;
    // The context swallows reference-point failures; surface them here.
    let p = match ctx.partition.clone() {
        Some(p) => p,
        None => {
            let point = ctx.operating_point(&reference_scenario(&ctx.net))?;
            carbontrace_core::VirtualBusPartition::new(&point.graph)?
        }
    };
    eprintln!("{} buses -> {} virtual buses", p.bus_count(), p.block_count());
    match &c.out {
        Some(dir) => {
            let cfg = RunConfig {
                samples: 0,
                penetrations: c.penetration.into_iter().collect(),
                ..Default::default()
            };
            write_meta(dir, &meta_without_timing("decompose", &c.network, &cfg, &ctx.net))?;
            let path = dir.join("partition.csv");
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_partition(file, &p)
        }
        None => write_partition(std::io::stdout().lock(), &p),
    }
}

fn cmd_responsibility(c: &ResponsibilityCmd) -> Result<()> {
    let net = load_network(&c.sampling.network)?;
    let cfg = c.sampling.config(Mode::Full);
    let levels = run_responsibility(&cfg, &net, &c.generator)?;
    write_meta(&c.out, &meta_without_timing("responsibility", &c.sampling.network, &cfg, &net))?;
    write_responsibility(&c.out.join("responsibility.csv"), &levels)?;
    for l in &levels {
        println!(
            "penetration {}: {} traced {:.4} tCO2/h of {:.4} (largest scenario gap {:.1e}), {} scenarios",
            penetration_label(l.penetration),
            l.generator,
            l.total_mean,
            l.generator_mean_rate,
            l.max_relative_gap,
            l.scenarios
        );
    }
    Ok(())
}

fn cmd_cef(c: &CefCmd) -> Result<()> {
    let net = single_level(load_network(&c.network)?, c.penetration)?;
    let ctx = ScenarioContext::new(net, c.cef_solver, Tracked::default())?;
    let (s, stem) = match c.scenario {
        Some(i) => (sample_scenario(&ctx.net, i, c.seed), format!("scenario_{i}")),
        None => (reference_scenario(&ctx.net), "expected".to_string()),
    };
    let point = match &c.flows {
        Some(path) => ctx.operating_point_with_flow(&s, read_flow_file(path, &ctx.net, &ctx.idx)?)?,
        None => ctx.operating_point(&s)?,
    };
    let eval = ctx.solve(point, c.mode)?;
    let cfg = RunConfig {
        samples: 1,
        seed: c.seed,
        mode: c.mode,
        cef_solver: c.cef_solver,
        penetrations: c.penetration.into_iter().collect(),
        ..Default::default()
    };
    write_meta(&c.out, &meta_without_timing("cef", &c.network, &cfg, &ctx.net))?;
    let (buses, branches) = write_scenario_dump(&c.out, &ctx.net, &stem, &eval)?;
    let sol = &eval.solution;
    println!(
        "generation {:.4} tCO2/h = loads {:.4} + losses {:.4} (relative gap {:.1e}); solved on {} nodes",
        sol.total_generator_rate(),
        sol.total_load_rate(),
        sol.total_loss_rate(),
        sol.conservation_error(),
        eval.solved_nodes
    );
    println!("wrote {} and {}", display(&buses), display(&branches));
    Ok(())
}

fn cmd_synth(c: &SynthCmd) -> Result<()> {
    let net = if c.nine_node {
        nine_node_feeder()
    } else {
        build_synthetic(&SyntheticConfig {
            n_feeders: c.feeders,
            der_per_feeder: c.der_per_feeder,
            penetration: c.penetration,
            seed: c.seed,
            ..Default::default()
        })?
    };
    save_network(&net, &c.out)?;
    println!(
        "wrote {}: {} buses, {} branches, {} generators",
        display(&c.out),
        net.buses.len(),
        net.branches.len(),
        net.generators.len()
    );
    Ok(())
}

fn cmd_validate(c: &ValidateCmd) -> Result<()> {
    let net = load_network(&c.network)?;
    println!(
        "{}: ok ({} buses, {} branches, {} generators, {} loads, {} EV stations)",
        display(&c.network),
        net.buses.len(),
        net.branches.len(),
        net.generators.len(),
        net.loads.len(),
        net.ev_stations.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::Bench(c) => cmd_bench(c),
        Command::Decompose(c) => cmd_decompose(c),
        Command::Responsibility(c) => cmd_responsibility(c),
        Command::Cef(c) => cmd_cef(c),
        Command::Synth(c) => cmd_synth(c),
        Command::Validate(c) => cmd_validate(c),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
