//! Contraction of downstream runs of buses that share one carbon intensity.
//!
//! A bus starts a virtual bus when it is pinned, carries a generator, or
//! does not have exactly one incoming flow. Every other bus has a single
//! upstream neighbour and inherits its intensity, so it can be merged into
//! the block of the start bus it hangs from.

use crate::cef::{allocate_emissions, CarbonSolution, FlowEdge, FlowGraph, FlowNode, Injection};
use crate::error::{Error, Result};
use crate::network::BusId;

#[derive(Debug, Clone, PartialEq)]
pub struct VirtualBusPartition {
    /// Block of every node.
    pub block_of: Vec<usize>,
    /// Nodes of every block, start node first.
    pub members: Vec<Vec<usize>>,
    pub is_start: Vec<bool>,
    /// Branches touching a non-start node; their orientation fixes the
    /// partition.
    pub guarded: Vec<usize>,
    pub signature: u64,
    bus_ids: Vec<BusId>,
}

pub fn find_start_buses(g: &FlowGraph) -> Vec<bool> {
    (0..g.node_count())
        .map(|i| {
            let n = &g.nodes[i];
            n.pinned || n.has_generator || g.in_degree(i) != 1
        })
        .collect()
}

/// Partitions `g` into virtual buses and builds the contracted graph.
pub fn decompose(g: &FlowGraph) -> Result<(VirtualBusPartition, FlowGraph)> {
    let partition = VirtualBusPartition::new(g)?;
    let aggregated = partition.aggregate(g)?;
    Ok((partition, aggregated))
}

impl VirtualBusPartition {
    pub fn new(g: &FlowGraph) -> Result<Self> {
        let n = g.node_count();
        let is_start = find_start_buses(g);
        const UNSET: usize = usize::MAX;
        let mut block_of = vec![UNSET; n];
        let mut members = Vec::new();
        for i in (0..n).filter(|&i| is_start[i]) {
            block_of[i] = members.len();
            members.push(vec![i]);
        }
        let mut on_path = vec![false; n];
        let mut path = Vec::new();
        for i in 0..n {
            // Walk up the unique in-edges until a node with a known block.
            let mut cur = i;
            while block_of[cur] == UNSET {
                if on_path[cur] {
                    return Err(Error::Modeling(format!(
                        "bus {} has no upstream path to a start bus",
                        g.nodes[cur].bus
                    )));
                }
                on_path[cur] = true;
                path.push(cur);
                cur = g.edges[g.in_edges(cur)[0]].from;
            }
            let b = block_of[cur];
            for &p in &path {
                block_of[p] = b;
                on_path[p] = false;
            }
            path.clear();
        }
        for i in (0..n).filter(|&i| !is_start[i]) {
            members[block_of[i]].push(i);
        }
        let guarded: Vec<usize> = g
            .branch_ends
            .iter()
            .enumerate()
            .filter(|(_, &(a, b))| !is_start[a] || !is_start[b])
            .map(|(k, _)| k)
            .collect();
        let signature = g.orientation_signature(&guarded);
        Ok(VirtualBusPartition {
            block_of,
            members,
            is_start,
            guarded,
            signature,
            bus_ids: g.nodes.iter().map(|n| n.bus).collect(),
        })
    }

    pub fn block_count(&self) -> usize {
        self.members.len()
    }

    pub fn bus_count(&self) -> usize {
        self.block_of.len()
    }

    /// `(bus id, virtual bus index, is start)` for every bus in node order.
    pub fn rows(&self) -> impl Iterator<Item = (BusId, usize, bool)> + '_ {
        (0..self.bus_count()).map(|i| (self.bus_ids[i], self.block_of[i], self.is_start[i]))
    }

    fn check_signature(&self, g: &FlowGraph) -> Result<()> {
        if g.node_count() != self.bus_count() {
            return Err(Error::InvalidParameter(format!(
                "partition covers {} buses, flow graph has {}",
                self.bus_count(),
                g.node_count()
            )));
        }
        let found = g.orientation_signature(&self.guarded);
        if found != self.signature {
            return Err(Error::StalePartition {
                expected: self.signature,
                found,
            });
        }
        Ok(())
    }

    /// True when `g` has the flow directions this partition was built for.
    pub fn matches(&self, g: &FlowGraph) -> bool {
        self.check_signature(g).is_ok()
    }

    /// Contracts `g` onto the blocks.
    pub fn aggregate(&self, g: &FlowGraph) -> Result<FlowGraph> {
        self.check_signature(g)?;
        let mut nodes: Vec<FlowNode> = self
            .members
            .iter()
            .map(|m| {
                let start = &g.nodes[m[0]];
                FlowNode {
                    bus: start.bus,
                    consumption: 0.0,
                    sink_loss: 0.0,
                    has_generator: start.has_generator,
                    pinned: start.pinned,
                }
            })
            .collect();
        for (i, n) in g.nodes.iter().enumerate() {
            let agg = &mut nodes[self.block_of[i]];
            agg.consumption += n.consumption;
            agg.sink_loss += n.sink_loss;
        }
        for f in &g.fed_losses {
            nodes[self.block_of[f.node]].sink_loss += f.power;
        }
        let injections = g
            .injections
            .iter()
            .map(|inj| Injection {
                node: self.block_of[inj.node],
                ..*inj
            })
            .collect();
        let mut edges = Vec::new();
        let mut orientation = g.orientation.clone();
        for e in &g.edges {
            let (bf, bt) = (self.block_of[e.from], self.block_of[e.to]);
            if bf == bt {
                nodes[bf].sink_loss += e.loss;
                orientation[e.branch] = 0;
            } else {
                edges.push(FlowEdge {
                    from: bf,
                    to: bt,
                    ..*e
                });
            }
        }
        let branch_ends = g
            .branch_ends
            .iter()
            .map(|&(a, b)| (self.block_of[a], self.block_of[b]))
            .collect();
        Ok(FlowGraph::new(
            nodes,
            injections,
            edges,
            branch_ends,
            orientation,
            g.generator_count,
        ))
    }

    /// Structural validity against the graph it was built from: every node in
    /// exactly one block, non-start members fed by a single edge from inside
    /// their own block, and no generation away from the start bus.
    pub fn check_structure(&self, g: &FlowGraph) -> Result<()> {
        let n = g.node_count();
        let fail = |m: String| Err(Error::Modeling(m));
        let mut seen = vec![false; n];
        for (b, m) in self.members.iter().enumerate() {
            if m.is_empty() || !self.is_start[m[0]] {
                return fail(format!("virtual bus {b} does not begin with a start bus"));
            }
            for &i in m {
                if seen[i] || self.block_of[i] != b {
                    return fail(format!("bus {} listed inconsistently", g.nodes[i].bus));
                }
                seen[i] = true;
                if !self.is_start[i] {
                    let ins = g.in_edges(i);
                    let node = &g.nodes[i];
                    if ins.len() != 1 || node.has_generator || node.pinned {
                        return fail(format!("bus {} cannot be an inner member", node.bus));
                    }
                    if self.block_of[g.edges[ins[0]].from] != b {
                        return fail(format!("bus {} is fed from another virtual bus", node.bus));
                    }
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(i) => fail(format!("bus {} is in no virtual bus", g.nodes[i].bus)),
            None => Ok(()),
        }
    }
}

/// Spreads block intensities over the member buses of `full` and allocates
/// emissions there.
pub fn expand_solution(
    aggregated: &CarbonSolution,
    partition: &VirtualBusPartition,
    full: &FlowGraph,
) -> Result<CarbonSolution> {
    partition.check_signature(full)?;
    let e = partition
        .block_of
        .iter()
        .map(|&b| aggregated.bus_intensity[b])
        .collect();
    Ok(allocate_emissions(CarbonSolution::from_intensities(full, e), full))
}
