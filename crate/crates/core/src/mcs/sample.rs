use crate::network::{GeneratorKind, Network};
use crate::powerflow::ScenarioSample;
use crate::stochastic::{base_load_sample, ev_demand_sample, weibull_sample, RngStream};

/// One draw of every stochastic input from stream `(seed, index)`.
///
/// Draw order: wind speeds, DER capacity factors, base loads, EV demands,
/// each in network order.
pub fn sample_scenario(net: &Network, index: u64, seed: u64) -> ScenarioSample {
    let mut rng = RngStream::new(seed, index);
    let mut wind_speeds = Vec::new();
    for g in net.generators.iter().filter(|g| g.kind == GeneratorKind::Wind) {
        wind_speeds.push(g.weibull.map_or(0.0, |w| weibull_sample(&w, &mut rng)));
    }
    let mut der_factors = Vec::new();
    for g in net.generators.iter().filter(|g| g.kind == GeneratorKind::DerPv) {
        der_factors.push(g.beta.unwrap_or_default().sample(&mut rng));
    }
    let base_loads = net.loads.iter().map(|l| base_load_sample(&l.normal, &mut rng)).collect();
    let ev_demands = net
        .ev_stations
        .iter()
        .map(|e| ev_demand_sample(&e.weibull, &mut rng))
        .collect();
    ScenarioSample {
        index,
        wind_speeds,
        der_factors,
        base_loads,
        ev_demands,
    }
}

/// Every input at its mean: used to orient flows for inspection and to
/// build the cached partition.
pub fn reference_scenario(net: &Network) -> ScenarioSample {
    ScenarioSample {
        index: 0,
        wind_speeds: net
            .generators
            .iter()
            .filter(|g| g.kind == GeneratorKind::Wind)
            .map(|g| g.weibull.map_or(0.0, |w| w.mean()))
            .collect(),
        der_factors: net
            .generators
            .iter()
            .filter(|g| g.kind == GeneratorKind::DerPv)
            .map(|g| g.beta.unwrap_or_default().mean())
            .collect(),
        base_loads: net.loads.iter().map(|l| l.normal.mu.max(0.0)).collect(),
        ev_demands: net.ev_stations.iter().map(|e| e.weibull.mean()).collect(),
    }
}
