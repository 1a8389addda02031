use std::hash::{DefaultHasher, Hash, Hasher};

use crate::error::{Error, Result};
use crate::network::{BusId, NetworkIndex};
use crate::powerflow::{DispatchResult, FlowSolution};

/// Branches carrying less than this many MW are left out of the graph.
pub const FLOW_EPSILON: f64 = 1e-9;

/// Largest tolerated nodal imbalance, MW.
pub const BALANCE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowNode {
    /// Original bus id; for a contracted graph, the id of the start bus.
    pub bus: BusId,
    /// Load plus EV demand, MW.
    pub consumption: f64,
    /// Losses consumed inside the node (internal branches of a contracted
    /// node), MW.
    pub sink_loss: f64,
    /// At least one generator is attached, whatever its output.
    pub has_generator: bool,
    pub pinned: bool,
}

/// Local generation entering the mix at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Injection {
    pub node: usize,
    /// Generator position in the network.
    pub generator: usize,
    pub power: f64,
    pub intensity: f64,
}

/// A branch oriented along its flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowEdge {
    /// Branch position in the network.
    pub branch: usize,
    pub from: usize,
    pub to: usize,
    /// Sending-end flow, MW, positive.
    pub send: f64,
    pub loss: f64,
}

impl FlowEdge {
    pub fn recv(&self) -> f64 {
        self.send - self.loss
    }
}

/// Part of a branch loss supplied from one end. A branch whose sending-end
/// flow is smaller than its loss is fed from both ends and gets no edge;
/// each end's share is consumed at that end and carries its intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FedLoss {
    pub branch: usize,
    pub node: usize,
    pub power: f64,
}

/// Directed flow graph one carbon-intensity solve runs on.
#[derive(Debug, Clone)]
pub struct FlowGraph {
    pub nodes: Vec<FlowNode>,
    pub injections: Vec<Injection>,
    pub edges: Vec<FlowEdge>,
    /// Node ends of every network branch, in the original from/to order.
    pub branch_ends: Vec<(usize, usize)>,
    /// +1 when a branch carries flow from-to, -1 for to-from, 0 when omitted
    /// or internal to a node.
    pub orientation: Vec<i8>,
    pub generator_count: usize,
    pub fed_losses: Vec<FedLoss>,
    in_start: Vec<usize>,
    in_list: Vec<usize>,
    out_start: Vec<usize>,
    out_list: Vec<usize>,
}

impl FlowGraph {
    pub fn new(
        nodes: Vec<FlowNode>,
        injections: Vec<Injection>,
        edges: Vec<FlowEdge>,
        branch_ends: Vec<(usize, usize)>,
        orientation: Vec<i8>,
        generator_count: usize,
    ) -> Self {
        let n = nodes.len();
        let (in_start, in_list) = csr(n, edges.iter().map(|e| e.to));
        let (out_start, out_list) = csr(n, edges.iter().map(|e| e.from));
        FlowGraph {
            nodes,
            injections,
            edges,
            branch_ends,
            orientation,
            generator_count,
            fed_losses: Vec::new(),
            in_start,
            in_list,
            out_start,
            out_list,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn branch_count(&self) -> usize {
        self.branch_ends.len()
    }

    /// Edge positions entering `node`.
    pub fn in_edges(&self, node: usize) -> &[usize] {
        &self.in_list[self.in_start[node]..self.in_start[node + 1]]
    }

    /// Edge positions leaving `node`.
    pub fn out_edges(&self, node: usize) -> &[usize] {
        &self.out_list[self.out_start[node]..self.out_start[node + 1]]
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.in_start[node + 1] - self.in_start[node]
    }

    /// Local generation per node, MW.
    pub fn node_generation(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.nodes.len()];
        for inj in &self.injections {
            g[inj.node] += inj.power;
        }
        g
    }

    /// Consumption, absorbed losses and fed branch losses per node, MW.
    pub fn node_demand(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.nodes.iter().map(|n| n.consumption + n.sink_loss).collect();
        for f in &self.fed_losses {
            d[f.node] += f.power;
        }
        d
    }

    /// Local generation plus received inflow per node, MW.
    pub fn throughput(&self) -> Vec<f64> {
        let mut t = self.node_generation();
        for e in &self.edges {
            t[e.to] += e.recv();
        }
        t
    }

    pub fn total_consumption(&self) -> f64 {
        self.nodes.iter().map(|n| n.consumption).sum()
    }

    pub fn total_generation(&self) -> f64 {
        self.injections.iter().map(|i| i.power).sum()
    }

    /// Branch losses plus losses absorbed inside nodes, MW.
    pub fn total_loss(&self) -> f64 {
        self.edges.iter().map(|e| e.loss).sum::<f64>()
            + self.nodes.iter().map(|n| n.sink_loss).sum::<f64>()
            + self.fed_losses.iter().map(|f| f.power).sum::<f64>()
    }

    /// Checks inflow + generation = outflow + consumption + absorbed losses
    /// at every node.
    pub fn check_balance(&self) -> Result<()> {
        let mut residual = self.throughput();
        for (r, d) in residual.iter_mut().zip(self.node_demand()) {
            *r -= d;
        }
        for e in &self.edges {
            residual[e.from] -= e.send;
        }
        for (i, r) in residual.iter().enumerate() {
            if r.abs() > BALANCE_TOLERANCE || !r.is_finite() {
                return Err(Error::Numerical(format!(
                    "bus {} out of balance by {r:.3e} MW",
                    self.nodes[i].bus
                )));
            }
        }
        Ok(())
    }

    /// Hash of the orientation of the listed branches.
    pub fn orientation_signature(&self, branches: &[usize]) -> u64 {
        let mut h = DefaultHasher::new();
        branches.len().hash(&mut h);
        for &k in branches {
            k.hash(&mut h);
            self.orientation[k].hash(&mut h);
        }
        h.finish()
    }
}

fn csr(n: usize, keys: impl Iterator<Item = usize> + Clone) -> (Vec<usize>, Vec<usize>) {
    let mut start = vec![0usize; n + 1];
    for k in keys.clone() {
        start[k + 1] += 1;
    }
    for i in 0..n {
        start[i + 1] += start[i];
    }
    let mut fill = start.clone();
    let mut list = vec![0usize; start[n]];
    for (e, k) in keys.enumerate() {
        list[fill[k]] = e;
        fill[k] += 1;
    }
    (start, list)
}

/// Orients every branch along its flow and attaches generation and
/// consumption to buses.
pub fn build_flow_graph(
    idx: &NetworkIndex,
    flow: &FlowSolution,
    dispatch: &DispatchResult,
    consumption: &[f64],
) -> Result<FlowGraph> {
    let n = idx.bus_count();
    if consumption.len() != n || flow.p_send.len() != idx.branch_count() {
        return Err(Error::InvalidParameter(
            "flow solution or consumption vector does not match the network".into(),
        ));
    }
    let mut nodes: Vec<FlowNode> = (0..n)
        .map(|i| FlowNode {
            bus: idx.bus_ids[i],
            consumption: consumption[i],
            sink_loss: 0.0,
            has_generator: false,
            pinned: idx.pinned[i],
        })
        .collect();
    let injections: Vec<Injection> = dispatch
        .output
        .iter()
        .zip(&dispatch.intensity)
        .zip(&idx.generator_bus)
        .enumerate()
        .map(|(g, ((&power, &intensity), &node))| {
            nodes[node].has_generator = true;
            Injection {
                node,
                generator: g,
                power,
                intensity,
            }
        })
        .collect();
    let mut edges = Vec::with_capacity(flow.p_send.len());
    let mut fed_losses = Vec::new();
    let mut orientation = vec![0i8; flow.p_send.len()];
    for (k, &(a, b)) in idx.branch_ends.iter().enumerate() {
        let p = flow.p_send[k];
        if p.abs() < FLOW_EPSILON {
            continue;
        }
        let (from, to) = if p > 0.0 { (a, b) } else { (b, a) };
        let recv = p.abs() - flow.loss[k];
        if recv < 0.0 {
            fed_losses.push(FedLoss {
                branch: k,
                node: from,
                power: p.abs(),
            });
            fed_losses.push(FedLoss {
                branch: k,
                node: to,
                power: -recv,
            });
            continue;
        }
        orientation[k] = if p > 0.0 { 1 } else { -1 };
        edges.push(FlowEdge {
            branch: k,
            from,
            to,
            send: p.abs(),
            loss: flow.loss[k],
        });
    }
    let mut g = FlowGraph::new(
        nodes,
        injections,
        edges,
        idx.branch_ends.clone(),
        orientation,
        dispatch.output.len(),
    );
    g.fed_losses = fed_losses;
    g.check_balance()?;
    Ok(g)
}
