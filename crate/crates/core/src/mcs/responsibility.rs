use serde::Serialize;

use super::engine::{clone_error, map_chunks, RunConfig};
use super::sample::sample_scenario;
use super::scenario::{Mode, ScenarioContext, Tracked};
use crate::cef::trace_generator_responsibility_with;
use crate::error::{Error, Result};
use crate::network::{BusId, Network};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponsibilityRow {
    /// `load:<bus>` (base load and EV demand at the bus) or `losses`.
    pub component: String,
    pub bus: Option<BusId>,
    /// Mean tCO2/h charged to the component.
    pub mean_rate: f64,
    /// Mean fraction of the component's power drawn from the generator.
    pub mean_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponsibilityLevel {
    pub penetration: Option<f64>,
    pub generator: String,
    pub rows: Vec<ResponsibilityRow>,
    /// Sum of the row means.
    pub total_mean: f64,
    /// Mean emission rate of the generator itself.
    pub generator_mean_rate: f64,
    /// Largest per-scenario `|traced total - generator rate| / generator rate`.
    pub max_relative_gap: f64,
    pub scenarios: u64,
    pub failures: u64,
}

/// Sums over a chunk, kept in scenario order for deterministic merging.
struct Partial {
    rate: Vec<f64>,
    fraction: Vec<f64>,
    loss: f64,
    gen: f64,
    count: u64,
    failures: u64,
    gap: f64,
    error: Option<Error>,
}

/// Monte Carlo mean of one generator's emissions charged to every consuming
/// bus and to losses.
pub fn run_responsibility(cfg: &RunConfig, net: &Network, generator_id: &str) -> Result<Vec<ResponsibilityLevel>> {
    cfg.check()?;
    let (target, _) = net
        .generator(generator_id)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown generator {generator_id:?}")))?;
    let pool = cfg.pool()?;
    let mut out = Vec::new();
    for (penetration, level_net) in cfg.levels(net)? {
        let ctx = ScenarioContext::new(level_net, cfg.cef_solver, Tracked::default())?;
        let mut buses: Vec<usize> = ctx.idx.load_bus.iter().chain(&ctx.idx.ev_bus).copied().collect();
        buses.sort_unstable();
        buses.dedup();
        let partials = map_chunks(&pool, cfg.samples, |r| {
            let mut p = Partial {
                rate: vec![0.0; buses.len()],
                fraction: vec![0.0; buses.len()],
                loss: 0.0,
                gen: 0.0,
                count: 0,
                failures: 0,
                gap: 0.0,
                error: None,
            };
            for i in r {
                let s = sample_scenario(&ctx.net, i, cfg.seed);
                let traced = ctx.evaluate(&s, Mode::Full).and_then(|eval| {
                    let resp = trace_generator_responsibility_with(&eval.point.graph, target, cfg.cef_solver)?;
                    Ok((eval, resp))
                });
                match traced {
                    Ok((eval, resp)) => {
                        for (k, &b) in buses.iter().enumerate() {
                            p.rate[k] += resp.load[b];
                            p.fraction[k] += resp.fraction[b];
                        }
                        p.loss += resp.total_loss();
                        let gen_rate = eval.solution.generator_rate[target];
                        p.gen += gen_rate;
                        let gap = (resp.total() - gen_rate).abs();
                        p.gap = p.gap.max(if gen_rate > 0.0 { gap / gen_rate } else { gap });
                        p.count += 1;
                    }
                    Err(e) => {
                        p.failures += 1;
                        if !cfg.skip_failures {
                            p.error = Some(e.in_scenario(i));
                            break;
                        }
                    }
                }
            }
            p
        });
        let mut total = Partial {
            rate: vec![0.0; buses.len()],
            fraction: vec![0.0; buses.len()],
            loss: 0.0,
            gen: 0.0,
            count: 0,
            failures: 0,
            gap: 0.0,
            error: None,
        };
        for p in partials {
            if let Some(e) = &p.error {
                return Err(clone_error(e));
            }
            for k in 0..buses.len() {
                total.rate[k] += p.rate[k];
                total.fraction[k] += p.fraction[k];
            }
            total.loss += p.loss;
            total.gen += p.gen;
            total.count += p.count;
            total.failures += p.failures;
            total.gap = total.gap.max(p.gap);
        }
        if total.count == 0 {
            return Err(Error::Numerical("every scenario failed".into()));
        }
        let n = total.count as f64;
        let mut rows: Vec<ResponsibilityRow> = buses
            .iter()
            .enumerate()
            .map(|(k, &b)| ResponsibilityRow {
                component: format!("load:{}", ctx.idx.bus_ids[b]),
                bus: Some(ctx.idx.bus_ids[b]),
                mean_rate: total.rate[k] / n,
                mean_fraction: total.fraction[k] / n,
            })
            .collect();
        rows.push(ResponsibilityRow {
            component: "losses".into(),
            bus: None,
            mean_rate: total.loss / n,
            mean_fraction: f64::NAN,
        });
        let total_mean = rows.iter().map(|r| r.mean_rate).sum();
        out.push(ResponsibilityLevel {
            penetration,
            generator: generator_id.to_string(),
            rows,
            total_mean,
            generator_mean_rate: total.gen / n,
            max_relative_gap: total.gap,
            scenarios: cfg.samples,
            failures: total.failures,
        });
    }
    Ok(out)
}
