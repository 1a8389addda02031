use std::collections::VecDeque;

use faer::linalg::solvers::SolveCore;
use faer::{Conj, Mat};
use serde::{Deserialize, Serialize};

use super::graph::{FlowGraph, BALANCE_TOLERANCE, FLOW_EPSILON};
use crate::error::{Error, Result};

/// How the nodal intensity equations are solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CefSolver {
    /// Topological sweep when the graph is acyclic, linear system otherwise.
    #[default]
    Auto,
    /// Topological sweep; fails on a directed cycle.
    Sweep,
    /// Dense linear system over all nodes.
    Matrix,
}

impl std::str::FromStr for CefSolver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(CefSolver::Auto),
            "sweep" => Ok(CefSolver::Sweep),
            "matrix" => Ok(CefSolver::Matrix),
            other => Err(Error::InvalidParameter(format!(
                "unknown CEF solver {other:?} (expected auto, sweep or matrix)"
            ))),
        }
    }
}

/// Carbon intensities and emission rates on one flow graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarbonSolution {
    /// tCO2/MWh per node.
    pub bus_intensity: Vec<f64>,
    /// tCO2/MWh per branch: the intensity of its sending node.
    pub branch_intensity: Vec<f64>,
    /// tCO2/h per node.
    pub load_rate: Vec<f64>,
    /// tCO2/h of losses absorbed inside each node.
    pub node_loss_rate: Vec<f64>,
    /// tCO2/h per branch.
    pub branch_loss_rate: Vec<f64>,
    /// tCO2/h per generator.
    pub generator_rate: Vec<f64>,
}

impl CarbonSolution {
    /// Wraps node intensities; rates stay zero until [`allocate_emissions`].
    pub fn from_intensities(g: &FlowGraph, bus_intensity: Vec<f64>) -> Self {
        let branch_intensity = g
            .branch_ends
            .iter()
            .zip(&g.orientation)
            .map(|(&(a, b), &o)| if o < 0 { bus_intensity[b] } else { bus_intensity[a] })
            .collect();
        CarbonSolution {
            bus_intensity,
            branch_intensity,
            load_rate: vec![0.0; g.node_count()],
            node_loss_rate: vec![0.0; g.node_count()],
            branch_loss_rate: vec![0.0; g.branch_count()],
            generator_rate: vec![0.0; g.generator_count],
        }
    }

    pub fn total_generator_rate(&self) -> f64 {
        self.generator_rate.iter().sum()
    }

    pub fn total_load_rate(&self) -> f64 {
        self.load_rate.iter().sum()
    }

    pub fn total_loss_rate(&self) -> f64 {
        self.branch_loss_rate.iter().sum::<f64>() + self.node_loss_rate.iter().sum::<f64>()
    }

    /// `|generation - (loads + losses)| / generation`, or the absolute gap
    /// when nothing emits.
    pub fn conservation_error(&self) -> f64 {
        let gen = self.total_generator_rate();
        let gap = (gen - self.total_load_rate() - self.total_loss_rate()).abs();
        if gen > 0.0 {
            gap / gen
        } else {
            gap
        }
    }
}

pub fn solve_intensities(g: &FlowGraph) -> Result<CarbonSolution> {
    solve_intensities_with(g, CefSolver::Auto)
}

pub fn solve_intensities_with(g: &FlowGraph, solver: CefSolver) -> Result<CarbonSolution> {
    let values: Vec<f64> = g.injections.iter().map(|i| i.intensity).collect();
    let e = solve_values(g, solver, &values)?;
    Ok(CarbonSolution::from_intensities(g, e))
}

/// Emission rates from solved intensities.
pub fn allocate_emissions(mut sol: CarbonSolution, g: &FlowGraph) -> CarbonSolution {
    for (i, n) in g.nodes.iter().enumerate() {
        sol.load_rate[i] = n.consumption * sol.bus_intensity[i];
        sol.node_loss_rate[i] = n.sink_loss * sol.bus_intensity[i];
    }
    sol.branch_loss_rate.iter_mut().for_each(|r| *r = 0.0);
    for e in &g.edges {
        sol.branch_loss_rate[e.branch] += e.loss * sol.bus_intensity[e.from];
    }
    for f in &g.fed_losses {
        sol.branch_loss_rate[f.branch] += f.power * sol.bus_intensity[f.node];
    }
    sol.generator_rate.iter_mut().for_each(|r| *r = 0.0);
    for inj in &g.injections {
        sol.generator_rate[inj.generator] += inj.power * inj.intensity;
    }
    sol
}

/// Share of one generator in every component's emissions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Responsibility {
    pub generator: usize,
    /// tCO2/MWh of the traced generator.
    pub intensity: f64,
    /// Fraction of each node's power that originates at the generator.
    pub fraction: Vec<f64>,
    /// tCO2/h per node.
    pub load: Vec<f64>,
    /// tCO2/h of losses absorbed inside each node.
    pub node_loss: Vec<f64>,
    /// tCO2/h per branch.
    pub branch_loss: Vec<f64>,
}

impl Responsibility {
    pub fn total_load(&self) -> f64 {
        self.load.iter().sum()
    }

    pub fn total_loss(&self) -> f64 {
        self.node_loss.iter().sum::<f64>() + self.branch_loss.iter().sum::<f64>()
    }

    pub fn total(&self) -> f64 {
        self.total_load() + self.total_loss()
    }
}

pub fn trace_generator_responsibility(g: &FlowGraph, generator: usize) -> Result<Responsibility> {
    trace_generator_responsibility_with(g, generator, CefSolver::Auto)
}

pub fn trace_generator_responsibility_with(
    g: &FlowGraph,
    generator: usize,
    solver: CefSolver,
) -> Result<Responsibility> {
    let inj = g
        .injections
        .iter()
        .find(|i| i.generator == generator)
        .ok_or_else(|| Error::InvalidParameter(format!("generator position {generator} not in the flow graph")))?;
    let values: Vec<f64> = g
        .injections
        .iter()
        .map(|i| if i.generator == generator { 1.0 } else { 0.0 })
        .collect();
    let fraction = solve_values(g, solver, &values)?;
    let cei = inj.intensity;
    let load = g.nodes.iter().zip(&fraction).map(|(n, f)| n.consumption * f * cei).collect();
    let node_loss = g.nodes.iter().zip(&fraction).map(|(n, f)| n.sink_loss * f * cei).collect();
    let mut branch_loss = vec![0.0; g.branch_count()];
    for e in &g.edges {
        branch_loss[e.branch] += e.loss * fraction[e.from] * cei;
    }
    for f in &g.fed_losses {
        branch_loss[f.branch] += f.power * fraction[f.node] * cei;
    }
    Ok(Responsibility {
        generator,
        intensity: cei,
        fraction,
        load,
        node_loss,
        branch_loss,
    })
}

/// Node values of the proportional-sharing mix when injection `j` carries
/// `values[j]`.
pub(crate) fn solve_values(g: &FlowGraph, solver: CefSolver, values: &[f64]) -> Result<Vec<f64>> {
    let throughput = g.throughput();
    let mut own = vec![0.0; g.node_count()];
    for (inj, v) in g.injections.iter().zip(values) {
        own[inj.node] += inj.power * v;
    }
    let dead = dead_nodes(g, &throughput)?;
    match solver {
        CefSolver::Matrix => matrix(g, &throughput, &own, &dead),
        CefSolver::Sweep => sweep(g, &throughput, &own, &dead).ok_or_else(|| {
            Error::Modeling("flow graph has a directed cycle; the sweep solver needs an acyclic graph".into())
        }),
        CefSolver::Auto => match sweep(g, &throughput, &own, &dead) {
            Some(e) => Ok(e),
            None => matrix(g, &throughput, &own, &dead),
        },
    }
}

/// Nodes that receive no power at all. They are only allowed when they
/// also deliver nothing.
fn dead_nodes(g: &FlowGraph, throughput: &[f64]) -> Result<Vec<bool>> {
    let mut dead = vec![false; g.node_count()];
    let demand = g.node_demand();
    for (i, &t) in throughput.iter().enumerate() {
        if t < FLOW_EPSILON {
            if demand[i] > BALANCE_TOLERANCE {
                return Err(Error::Modeling(format!(
                    "bus {} consumes {:.3e} MW but no generation reaches it",
                    g.nodes[i].bus, demand[i]
                )));
            }
            dead[i] = true;
        }
    }
    Ok(dead)
}

fn sweep(g: &FlowGraph, throughput: &[f64], own: &[f64], dead: &[bool]) -> Option<Vec<f64>> {
    let n = g.node_count();
    let mut pending: Vec<usize> = (0..n).map(|i| g.in_degree(i)).collect();
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| pending[i] == 0).collect();
    let mut e = vec![0.0; n];
    let mut done = 0;
    while let Some(i) = queue.pop_front() {
        done += 1;
        if !dead[i] {
            let mut acc = own[i];
            for &k in g.in_edges(i) {
                let edge = &g.edges[k];
                acc += edge.recv() * e[edge.from];
            }
            e[i] = acc / throughput[i];
        }
        for &k in g.out_edges(i) {
            let to = g.edges[k].to;
            pending[to] -= 1;
            if pending[to] == 0 {
                queue.push_back(to);
            }
        }
    }
    (done == n).then_some(e)
}

fn matrix(g: &FlowGraph, throughput: &[f64], own: &[f64], dead: &[bool]) -> Result<Vec<f64>> {
    let n = g.node_count();
    if n == 0 {
        return Ok(Vec::new());
    }
    // Row i: e_i - sum_j (recv_ji / T_i) e_j = own_i / T_i.
    let mut a = Mat::<f64>::identity(n, n);
    let mut rhs = Mat::<f64>::zeros(n, 1);
    for i in 0..n {
        if !dead[i] {
            rhs[(i, 0)] = own[i] / throughput[i];
        }
    }
    for edge in &g.edges {
        if !dead[edge.to] {
            a[(edge.to, edge.from)] -= edge.recv() / throughput[edge.to];
        }
    }
    let lu = a.partial_piv_lu();
    lu.solve_in_place_with_conj(Conj::No, rhs.as_mut());
    let e: Vec<f64> = (0..n).map(|i| rhs[(i, 0)]).collect();
    if let Some(i) = e.iter().position(|x| !x.is_finite()) {
        return Err(Error::Numerical(format!(
            "singular intensity system at bus {}",
            g.nodes[i].bus
        )));
    }
    Ok(e)
}
