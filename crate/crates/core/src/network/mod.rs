//! Grid description, file ingestion, validation, and synthetic systems.

mod io;
mod synthetic;
mod types;
mod validate;

use std::collections::HashMap;

pub use io::{load_network, save_network};
pub use synthetic::{build_synthetic, nine_node_feeder, with_penetration, SyntheticConfig};
pub use types::*;
pub use validate::{validate, Violation, ViolationKind};

use crate::error::{Error, Result};

/// Dense index view of a validated [`Network`]: bus ids mapped to
/// positions, per-bus attachment lists, and the slack unit.
#[derive(Debug, Clone)]
pub struct NetworkIndex {
    pub bus_ids: Vec<BusId>,
    pub bus_pos: HashMap<BusId, usize>,
    /// `(from, to)` bus positions per branch.
    pub branch_ends: Vec<(usize, usize)>,
    pub generator_bus: Vec<usize>,
    pub load_bus: Vec<usize>,
    pub ev_bus: Vec<usize>,
    pub slack_bus: usize,
    pub slack_generator: usize,
    /// Buses that always begin their own virtual bus: every non-distribution
    /// bus and every distribution bus adjacent to a transmission bus.
    pub pinned: Vec<bool>,
}

impl NetworkIndex {
    pub fn new(net: &Network) -> Result<Self> {
        let violations = validate(net);
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }
        let bus_ids: Vec<BusId> = net.buses.iter().map(|b| b.id).collect();
        let bus_pos: HashMap<BusId, usize> = bus_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let pos = |id: BusId| bus_pos[&id];
        let branch_ends: Vec<(usize, usize)> =
            net.branches.iter().map(|b| (pos(b.from_bus), pos(b.to_bus))).collect();
        let generator_bus = net.generators.iter().map(|g| pos(g.bus)).collect::<Vec<_>>();
        let slack_bus = net
            .buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .expect("validated: one slack bus");
        let slack_generator = net
            .generators
            .iter()
            .enumerate()
            .filter(|(i, g)| generator_bus[*i] == slack_bus && g.kind == GeneratorKind::Conventional)
            .map(|(i, _)| i)
            .next()
            .expect("validated: slack bus has a conventional unit");

        let mut pinned: Vec<bool> = net.buses.iter().map(|b| b.kind != BusKind::Distribution).collect();
        for &(a, b) in &branch_ends {
            let (ka, kb) = (net.buses[a].kind, net.buses[b].kind);
            if ka == BusKind::Distribution && kb == BusKind::Transmission {
                pinned[a] = true;
            }
            if kb == BusKind::Distribution && ka == BusKind::Transmission {
                pinned[b] = true;
            }
        }

        Ok(NetworkIndex {
            load_bus: net.loads.iter().map(|l| pos(l.bus)).collect(),
            ev_bus: net.ev_stations.iter().map(|e| pos(e.bus)).collect(),
            bus_ids,
            bus_pos,
            branch_ends,
            generator_bus,
            slack_bus,
            slack_generator,
            pinned,
        })
    }

    pub fn bus_count(&self) -> usize {
        self.bus_ids.len()
    }

    pub fn branch_count(&self) -> usize {
        self.branch_ends.len()
    }
}
