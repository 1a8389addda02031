use serde::{Deserialize, Serialize};

use super::sample::reference_scenario;
use crate::cef::{allocate_emissions, build_flow_graph, solve_intensities_with, CarbonSolution, CefSolver, FlowGraph};
use crate::error::{Error, Result};
use crate::network::{BusId, Network, NetworkIndex};
use crate::powerflow::{dispatch, DcPowerFlow, DispatchResult, FlowSolution, ScenarioSample};
use crate::virtual_bus::{expand_solution, VirtualBusPartition};

/// Whether the CEF solve runs on every bus or on the virtual-bus graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Full,
    #[default]
    Virtual,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::Virtual => "virtual",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Mode::Full),
            "virtual" => Ok(Mode::Virtual),
            other => Err(Error::InvalidParameter(format!(
                "unknown mode {other:?} (expected full or virtual)"
            ))),
        }
    }
}

/// Which emission components a run reports besides the system total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tracked {
    pub loads: bool,
    pub ev_stations: bool,
    pub losses: bool,
    pub generators: bool,
}

impl Default for Tracked {
    fn default() -> Self {
        Tracked {
            loads: true,
            ev_stations: true,
            losses: true,
            generators: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Component {
    System,
    Losses,
    /// Bus position and the load entries on it.
    Load(usize, Vec<usize>),
    Ev(usize, Vec<usize>),
    Generator(usize),
}

/// Named emission-rate components evaluated on every scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSet {
    names: Vec<String>,
    parts: Vec<Component>,
}

fn group_by_bus(buses: &[usize]) -> Vec<(usize, Vec<usize>)> {
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for (j, &b) in buses.iter().enumerate() {
        match groups.iter_mut().find(|(bus, _)| *bus == b) {
            Some((_, v)) => v.push(j),
            None => groups.push((b, vec![j])),
        }
    }
    groups
}

impl ComponentSet {
    pub fn new(net: &Network, idx: &NetworkIndex, tracked: Tracked) -> Self {
        let mut names = vec!["system".to_string()];
        let mut parts = vec![Component::System];
        if tracked.losses {
            names.push("losses".into());
            parts.push(Component::Losses);
        }
        if tracked.loads {
            for (bus, loads) in group_by_bus(&idx.load_bus) {
                names.push(format!("load:{}", idx.bus_ids[bus]));
                parts.push(Component::Load(bus, loads));
            }
        }
        if tracked.ev_stations {
            for (bus, stations) in group_by_bus(&idx.ev_bus) {
                names.push(format!("ev:{}", idx.bus_ids[bus]));
                parts.push(Component::Ev(bus, stations));
            }
        }
        if tracked.generators {
            for (g, gen) in net.generators.iter().enumerate() {
                names.push(format!("gen:{}", gen.id));
                parts.push(Component::Generator(g));
            }
        }
        ComponentSet { names, parts }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Emission rates, tCO2/h, in [`Self::names`] order.
    pub fn evaluate(&self, s: &ScenarioSample, sol: &CarbonSolution) -> Vec<f64> {
        self.parts
            .iter()
            .map(|p| match p {
                Component::System => sol.total_generator_rate(),
                Component::Losses => sol.total_loss_rate(),
                Component::Load(bus, loads) => {
                    loads.iter().map(|&j| s.base_loads[j]).sum::<f64>() * sol.bus_intensity[*bus]
                }
                Component::Ev(bus, stations) => {
                    stations.iter().map(|&j| s.ev_demands[j]).sum::<f64>() * sol.bus_intensity[*bus]
                }
                Component::Generator(g) => sol.generator_rate[*g],
            })
            .collect()
    }
}

/// Dispatch, flows and flow graph of one scenario.
#[derive(Debug, Clone)]
pub struct OperatingPoint {
    pub consumption: Vec<f64>,
    pub dispatch: DispatchResult,
    pub flow: FlowSolution,
    pub graph: FlowGraph,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub point: OperatingPoint,
    pub solution: CarbonSolution,
    /// Virtual buses the CEF solve ran on (bus count in full mode).
    pub solved_nodes: usize,
    /// The cached partition did not fit and a fresh one was built.
    pub redecomposed: bool,
}

/// What the engine keeps from one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub values: Vec<f64>,
    pub conservation_error: f64,
    pub redecomposed: bool,
}

/// Everything shared read-only by the scenarios of one network.
#[derive(Debug)]
pub struct ScenarioContext {
    pub net: Network,
    pub idx: NetworkIndex,
    pub dc: DcPowerFlow,
    pub solver: CefSolver,
    pub components: ComponentSet,
    /// Partition of the expected-value operating point, when it solves.
    pub partition: Option<VirtualBusPartition>,
}

impl ScenarioContext {
    pub fn new(net: Network, solver: CefSolver, tracked: Tracked) -> Result<Self> {
        let idx = NetworkIndex::new(&net)?;
        let dc = DcPowerFlow::new(&net, &idx)?;
        let components = ComponentSet::new(&net, &idx, tracked);
        let mut ctx = ScenarioContext {
            net,
            idx,
            dc,
            solver,
            components,
            partition: None,
        };
        ctx.partition = ctx
            .operating_point(&reference_scenario(&ctx.net))
            .and_then(|p| VirtualBusPartition::new(&p.graph))
            .ok();
        Ok(ctx)
    }

    pub fn bus_ids(&self) -> &[BusId] {
        &self.idx.bus_ids
    }

    pub fn operating_point(&self, s: &ScenarioSample) -> Result<OperatingPoint> {
        let consumption = s.bus_consumption(&self.idx);
        let mut d = dispatch(&self.net, &self.idx, s)?;
        let injections = d.injections(&self.idx, &consumption);
        let lossless = self.dc.solve(&injections)?;
        let flow = self.dc.estimate_losses(&lossless)?;
        let slack = self.idx.slack_bus;
        d.absorb_losses(&self.net, &self.idx, flow.injection[slack] - injections[slack])?;
        let graph = build_flow_graph(&self.idx, &flow, &d, &consumption)?;
        Ok(OperatingPoint {
            consumption,
            dispatch: d,
            flow,
            graph,
        })
    }

    /// Operating point with externally supplied branch flows. The slack
    /// unit takes up whatever its bus needs to balance; every other bus
    /// must already balance against the dispatch.
    pub fn operating_point_with_flow(&self, s: &ScenarioSample, flow: FlowSolution) -> Result<OperatingPoint> {
        let consumption = s.bus_consumption(&self.idx);
        let mut d = dispatch(&self.net, &self.idx, s)?;
        let injections = d.injections(&self.idx, &consumption);
        let slack = self.idx.slack_bus;
        d.absorb_losses(&self.net, &self.idx, flow.injection[slack] - injections[slack])?;
        let graph = build_flow_graph(&self.idx, &flow, &d, &consumption)?;
        Ok(OperatingPoint {
            consumption,
            dispatch: d,
            flow,
            graph,
        })
    }

    /// Carbon solution of an operating point.
    pub fn solve(&self, point: OperatingPoint, mode: Mode) -> Result<Evaluation> {
        let g = &point.graph;
        let (solution, solved_nodes, redecomposed) = match mode {
            Mode::Full => {
                let sol = allocate_emissions(solve_intensities_with(g, self.solver)?, g);
                (sol, g.node_count(), false)
            }
            Mode::Virtual => {
                let fresh;
                let (partition, redecomposed) = match &self.partition {
                    Some(p) if p.matches(g) => (p, false),
                    _ => {
                        fresh = VirtualBusPartition::new(g)?;
                        (&fresh, true)
                    }
                };
                let agg = partition.aggregate(g)?;
                let agg_sol = solve_intensities_with(&agg, self.solver)?;
                (expand_solution(&agg_sol, partition, g)?, agg.node_count(), redecomposed)
            }
        };
        Ok(Evaluation {
            point,
            solution,
            solved_nodes,
            redecomposed,
        })
    }

    pub fn evaluate(&self, s: &ScenarioSample, mode: Mode) -> Result<Evaluation> {
        self.solve(self.operating_point(s)?, mode)
    }
}

/// Tracked emission rates of one scenario; errors carry the scenario index.
pub fn run_scenario(ctx: &ScenarioContext, s: &ScenarioSample, mode: Mode) -> Result<ScenarioOutcome> {
    let eval = ctx.evaluate(s, mode).map_err(|e| e.in_scenario(s.index))?;
    Ok(ScenarioOutcome {
        values: ctx.components.evaluate(s, &eval.solution),
        conservation_error: eval.solution.conservation_error(),
        redecomposed: eval.redecomposed,
    })
}
