#![allow(dead_code)]

use carbontrace_core::cef::{FlowEdge, FlowGraph, FlowNode, Injection};
use carbontrace_core::network::{
    Branch, Bus, BusKind, Generator, GeneratorKind, LoadSpec, Network,
};
use carbontrace_core::stochastic::{BetaParams, MarginalCeiParams, NormalParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn conventional(id: &str, bus: u32, cei: MarginalCeiParams, participation: f64) -> Generator {
    Generator {
        id: id.to_string(),
        bus,
        kind: GeneratorKind::Conventional,
        rated_output: cei.p_rate,
        max_output: Some(cei.p_lim),
        cei: Some(cei),
        fixed_intensity: None,
        weibull: None,
        turbine: None,
        beta: None,
        participation_factor: participation,
        nominal_output: None,
    }
}

pub fn der(id: &str, bus: u32, capacity: f64) -> Generator {
    Generator {
        id: id.to_string(),
        bus,
        kind: GeneratorKind::DerPv,
        rated_output: capacity,
        max_output: None,
        cei: None,
        fixed_intensity: Some(0.0),
        weibull: None,
        turbine: None,
        beta: Some(BetaParams::default()),
        participation_factor: 0.0,
        nominal_output: Some(capacity),
    }
}

pub fn bus(id: u32, kind: BusKind) -> Bus {
    Bus {
        id,
        kind,
        base_load_ref: None,
        ev_station_ref: None,
    }
}

pub fn line(id: u32, from_bus: u32, to_bus: u32, susceptance: f64, resistance: f64) -> Branch {
    Branch {
        id,
        from_bus,
        to_bus,
        susceptance,
        resistance,
        rating: None,
    }
}

/// Random radial distribution network of `n` buses hanging from a slack
/// source at bus 1. Every bus but the root carries a normally distributed
/// load; roughly `der_share` of them host a small PV unit.
pub fn random_radial(n: usize, seed: u64, der_share: f64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buses = vec![bus(1, BusKind::Slack)];
    let mut branches = Vec::new();
    let mut loads = Vec::new();
    let mut generators = vec![conventional("G1", 1, MarginalCeiParams::flat(0.75, 20.0, 50.0), 1.0)];
    for i in 2..=n as u32 {
        let parent = rng.random_range(i.saturating_sub(6).max(1)..i);
        buses.push(bus(i, BusKind::Distribution));
        let b = rng.random_range(20.0..80.0);
        branches.push(line(i - 1, parent, i, b, rng.random_range(0.1..0.5) / b));
        let mu = rng.random_range(0.05..0.3);
        loads.push(LoadSpec {
            bus: i,
            normal: NormalParams { mu, sigma: 0.15 * mu },
        });
        if rng.random::<f64>() < der_share {
            generators.push(der(&format!("PV{i}"), i, rng.random_range(0.05..0.4)));
        }
    }
    Network {
        base_mva: 10.0,
        buses,
        branches,
        generators,
        loads,
        ev_stations: Vec::new(),
        penetration_target: 0.0,
    }
}

/// Random balanced acyclic flow graph on `n` nodes (edges only run from
/// lower to higher index). Node 0 always generates; other nodes do with
/// probability `gen_share`. Generator intensities are drawn from [0, 1.2).
pub fn random_dag(n: usize, seed: u64, gen_share: f64) -> FlowGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes: Vec<FlowNode> = (0..n)
        .map(|i| FlowNode {
            bus: i as u32 + 1,
            consumption: 0.0,
            sink_loss: 0.0,
            has_generator: false,
            pinned: false,
        })
        .collect();
    let mut candidate: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, c) in candidate.iter_mut().enumerate() {
        for j in i + 1..n {
            if rng.random::<f64>() < 0.3 {
                c.push(j);
            }
        }
    }
    let mut injections = Vec::new();
    let mut inflow = vec![0.0; n];
    let mut edges = Vec::new();
    for i in 0..n {
        if i == 0 || rng.random::<f64>() < gen_share {
            nodes[i].has_generator = true;
            injections.push(Injection {
                node: i,
                generator: injections.len(),
                power: rng.random_range(1.0..100.0),
                intensity: rng.random_range(0.0..1.2),
            });
        }
        let local: f64 = injections.iter().filter(|g| g.node == i).map(|g| g.power).sum();
        let total = inflow[i] + local;
        // Split the throughput between local consumption and the out-edges.
        let mut weights: Vec<f64> = (0..=candidate[i].len()).map(|_| rng.random_range(0.1..1.0)).collect();
        if i == n - 1 || candidate[i].is_empty() || total == 0.0 {
            weights.truncate(1);
        }
        let wsum: f64 = weights.iter().sum();
        nodes[i].consumption = total * weights[0] / wsum;
        for (w, &j) in weights[1..].iter().zip(&candidate[i]) {
            let send = total * w / wsum;
            let loss = send * rng.random_range(0.0..0.05);
            inflow[j] += send - loss;
            edges.push(FlowEdge {
                branch: edges.len(),
                from: i,
                to: j,
                send,
                loss,
            });
        }
    }
    let ends = edges.iter().map(|e| (e.from, e.to)).collect();
    let orientation = vec![1; edges.len()];
    let gens = injections.len();
    FlowGraph::new(nodes, injections, edges, ends, orientation, gens)
}
