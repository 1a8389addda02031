//! Synthetic test systems: a meshed 16-bus transmission backbone with
//! replicated 33-bus radial feeders, and the nine-node feeder used to
//! illustrate virtual-bus decomposition.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::types::*;
use crate::error::{Error, Result};
use crate::stochastic::{BetaParams, MarginalCeiParams, NormalParams, WeibullParams, WindTurbineParams};

pub const BACKBONE_BUSES: u32 = 16;
pub const FEEDER_BUSES: u32 = 33;

/// Backbone branches: (from, to, reactance pu, resistance pu).
const BACKBONE_BRANCHES: [(u32, u32, f64, f64); 24] = [
    (1, 2, 0.040, 0.0050),
    (2, 3, 0.060, 0.0075),
    (3, 4, 0.050, 0.0060),
    (4, 5, 0.070, 0.0090),
    (5, 6, 0.055, 0.0070),
    (6, 7, 0.045, 0.0055),
    (7, 8, 0.050, 0.0060),
    (8, 9, 0.065, 0.0080),
    (9, 10, 0.060, 0.0075),
    (10, 11, 0.040, 0.0050),
    (11, 12, 0.070, 0.0090),
    (12, 13, 0.050, 0.0060),
    (13, 14, 0.060, 0.0075),
    (14, 15, 0.055, 0.0070),
    (15, 16, 0.045, 0.0055),
    (16, 1, 0.050, 0.0060),
    (1, 4, 0.080, 0.0100),
    (2, 7, 0.090, 0.0110),
    (3, 10, 0.100, 0.0125),
    (5, 12, 0.085, 0.0105),
    (6, 13, 0.075, 0.0095),
    (8, 15, 0.090, 0.0110),
    (9, 14, 0.080, 0.0100),
    (11, 16, 0.095, 0.0120),
];

/// Expected base load per backbone bus, MW (index 0 is bus 1).
const BACKBONE_LOAD_MW: [f64; 16] = [
    0.0, 40.0, 30.0, 60.0, 45.0, 35.0, 0.0, 0.0, 70.0, 65.0, 60.0, 50.0, 55.0, 40.0, 35.0, 45.0,
];

const EV_BUSES: [u32; 3] = [9, 10, 11];

/// 33-bus radial feeder: (from, to, r ohm, x ohm) on a 12.66 kV base.
const FEEDER_LINES: [(u32, u32, f64, f64); 32] = [
    (1, 2, 0.0922, 0.0470),
    (2, 3, 0.4930, 0.2511),
    (3, 4, 0.3660, 0.1864),
    (4, 5, 0.3811, 0.1941),
    (5, 6, 0.8190, 0.7070),
    (6, 7, 0.1872, 0.6188),
    (7, 8, 0.7114, 0.2351),
    (8, 9, 1.0300, 0.7400),
    (9, 10, 1.0440, 0.7400),
    (10, 11, 0.1966, 0.0650),
    (11, 12, 0.3744, 0.1238),
    (12, 13, 1.4680, 1.1550),
    (13, 14, 0.5416, 0.7129),
    (14, 15, 0.5910, 0.5260),
    (15, 16, 0.7463, 0.5450),
    (16, 17, 1.2890, 1.7210),
    (17, 18, 0.7320, 0.5740),
    (2, 19, 0.1640, 0.1565),
    (19, 20, 1.5042, 1.3554),
    (20, 21, 0.4095, 0.4784),
    (21, 22, 0.7089, 0.9373),
    (3, 23, 0.4512, 0.3083),
    (23, 24, 0.8980, 0.7091),
    (24, 25, 0.8960, 0.7011),
    (6, 26, 0.2030, 0.1034),
    (26, 27, 0.2842, 0.1447),
    (27, 28, 1.0590, 0.9337),
    (28, 29, 0.8042, 0.7006),
    (29, 30, 0.5075, 0.2585),
    (30, 31, 0.9744, 0.9630),
    (31, 32, 0.3105, 0.3619),
    (32, 33, 0.3410, 0.5302),
];

/// Feeder base load per local bus, kW (index 0 is the feeder head).
const FEEDER_LOAD_KW: [f64; 33] = [
    0.0, 100.0, 90.0, 120.0, 60.0, 60.0, 200.0, 200.0, 60.0, 60.0, 45.0, 60.0, 60.0, 120.0, 60.0,
    60.0, 60.0, 90.0, 90.0, 90.0, 90.0, 90.0, 90.0, 420.0, 420.0, 60.0, 60.0, 60.0, 120.0, 200.0,
    150.0, 210.0, 60.0,
];

const FEEDER_KV: f64 = 12.66;

/// Parameters for [`build_synthetic`].
#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub n_feeders: usize,
    pub der_per_feeder: usize,
    /// DER nameplate per feeder as a fraction of the feeder's expected load.
    pub der_capacity_fraction: f64,
    pub penetration: f64,
    pub seed: u64,
    /// Standard deviation of each base load as a fraction of its mean.
    pub load_sigma_fraction: f64,
    /// EV Weibull scale as a fraction of the local base load.
    pub ev_scale_fraction: f64,
    pub ev_shape: f64,
    /// Upper bound on total wind nameplate, as a multiple of expected load.
    pub res_capacity_cap: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_feeders: 30,
            der_per_feeder: 1,
            der_capacity_fraction: 0.2,
            penetration: 0.4,
            seed: 2024,
            load_sigma_fraction: 0.1,
            ev_scale_fraction: 0.3,
            ev_shape: 2.0,
            res_capacity_cap: 3.0,
        }
    }
}

fn feeder_bus_id(feeder: usize, local: u32) -> BusId {
    (feeder as u32 + 1) * 100 + local
}

fn conventional(id: &str, bus: BusId, cei: MarginalCeiParams, participation: f64) -> Generator {
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

fn der(id: String, bus: BusId, nominal: f64) -> Generator {
    Generator {
        id,
        bus,
        kind: GeneratorKind::DerPv,
        rated_output: nominal,
        max_output: None,
        cei: None,
        fixed_intensity: Some(0.0),
        weibull: None,
        turbine: None,
        beta: Some(BetaParams::default()),
        participation_factor: 0.0,
        nominal_output: Some(nominal),
    }
}

fn wind(id: &str, bus: BusId, weibull: WeibullParams) -> Generator {
    Generator {
        id: id.to_string(),
        bus,
        kind: GeneratorKind::Wind,
        rated_output: 0.0,
        max_output: None,
        cei: None,
        fixed_intensity: Some(0.0),
        weibull: Some(weibull),
        turbine: Some(WindTurbineParams::default()),
        beta: None,
        participation_factor: 0.0,
        nominal_output: Some(1.0),
    }
}

/// Expected load (kW) of the subtree rooted at each local feeder bus.
fn feeder_subtree_loads() -> [f64; 33] {
    let mut sub = FEEDER_LOAD_KW;
    // Lines are listed parent-first, so a reverse pass accumulates children.
    for &(from, to, _, _) in FEEDER_LINES.iter().rev() {
        sub[from as usize - 1] += sub[to as usize - 1];
    }
    sub
}

/// Builds the backbone-plus-feeders test system.
///
/// Feeders attach round-robin to the non-slack backbone buses. DERs are
/// placed at seeded-random feeder buses whose downstream expected load is
/// at least 1.25 times the feeder's DER nameplate, so feeder flows stay
/// directed away from the substation.
pub fn build_synthetic(cfg: &SyntheticConfig) -> Result<Network> {
    if cfg.n_feeders < 1 {
        return Err(Error::InvalidParameter("n_feeders must be >= 1".into()));
    }
    for (name, v) in [
        ("der_capacity_fraction", cfg.der_capacity_fraction),
        ("penetration", cfg.penetration),
    ] {
        if !(0.0..1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!("{name} must be in [0, 1), got {v}")));
        }
    }

    let base_mva = 100.0;
    let mut buses = Vec::new();
    let mut branches = Vec::new();
    let mut loads = Vec::new();
    let mut ev_stations = Vec::new();
    let mut next_branch: BranchId = 1;

    let push_load = |buses: &mut Vec<Bus>, loads: &mut Vec<LoadSpec>, bus: BusId, mu: f64| {
        if mu > 0.0 {
            buses.last_mut().expect("bus pushed").base_load_ref = Some(loads.len());
            loads.push(LoadSpec {
                bus,
                normal: NormalParams {
                    mu,
                    sigma: mu * cfg.load_sigma_fraction,
                },
            });
        }
    };

    for id in 1..=BACKBONE_BUSES {
        buses.push(Bus {
            id,
            kind: if id == 1 { BusKind::Slack } else { BusKind::Transmission },
            base_load_ref: None,
            ev_station_ref: None,
        });
        let mu = BACKBONE_LOAD_MW[id as usize - 1];
        push_load(&mut buses, &mut loads, id, mu);
        if EV_BUSES.contains(&id) {
            buses.last_mut().unwrap().ev_station_ref = Some(ev_stations.len());
            ev_stations.push(EvStationSpec {
                bus: id,
                weibull: WeibullParams::new(cfg.ev_scale_fraction * mu, cfg.ev_shape)?,
            });
        }
    }
    for &(from, to, x, r) in &BACKBONE_BRANCHES {
        branches.push(Branch {
            id: next_branch,
            from_bus: from,
            to_bus: to,
            susceptance: 1.0 / x,
            resistance: r,
            rating: None,
        });
        next_branch += 1;
    }

    let mut generators = vec![
        conventional(
            "G1",
            1,
            MarginalCeiParams {
                a_down: 1.05,
                b_down: 0.0004,
                a_over: 0.78,
                b_over: 0.0003,
                p_rate: 450.0,
                p_lim: 1000.0,
            },
            2.0,
        ),
        conventional(
            "G2",
            2,
            MarginalCeiParams {
                a_down: 0.52,
                b_down: 0.0005,
                a_over: 0.40,
                b_over: 0.0004,
                p_rate: 150.0,
                p_lim: 250.0,
            },
            1.0,
        ),
        conventional(
            "G3",
            3,
            MarginalCeiParams {
                a_down: 0.55,
                b_down: 0.0005,
                a_over: 0.42,
                b_over: 0.0004,
                p_rate: 150.0,
                p_lim: 250.0,
            },
            1.0,
        ),
        wind("W6", 6, WeibullParams::new(8.0, 2.0)?),
        wind("W8", 8, WeibullParams::new(7.0, 2.2)?),
    ];

    let z_base = FEEDER_KV * FEEDER_KV / base_mva;
    let feeder_load_mw: f64 = FEEDER_LOAD_KW.iter().sum::<f64>() / 1000.0;
    let der_total = cfg.der_capacity_fraction * feeder_load_mw;
    let subtree = feeder_subtree_loads();
    let candidates: Vec<u32> = (2..=FEEDER_BUSES)
        .filter(|&k| subtree[k as usize - 1] / 1000.0 >= 1.25 * der_total)
        .collect();
    if cfg.der_per_feeder > candidates.len() {
        return Err(Error::InvalidParameter(format!(
            "der_per_feeder {} exceeds the {} eligible buses per feeder",
            cfg.der_per_feeder,
            candidates.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let attach_points = BACKBONE_BUSES - 1;

    for f in 0..cfg.n_feeders {
        let attach = 2 + (f as u32 % attach_points);
        for k in 1..=FEEDER_BUSES {
            let id = feeder_bus_id(f, k);
            buses.push(Bus {
                id,
                kind: BusKind::Distribution,
                base_load_ref: None,
                ev_station_ref: None,
            });
            push_load(&mut buses, &mut loads, id, FEEDER_LOAD_KW[k as usize - 1] / 1000.0);
        }
        branches.push(Branch {
            id: next_branch,
            from_bus: attach,
            to_bus: feeder_bus_id(f, 1),
            susceptance: 1.0 / 0.05,
            resistance: 0.002,
            rating: None,
        });
        next_branch += 1;
        for &(from, to, r, x) in &FEEDER_LINES {
            branches.push(Branch {
                id: next_branch,
                from_bus: feeder_bus_id(f, from),
                to_bus: feeder_bus_id(f, to),
                susceptance: z_base / x,
                resistance: r / z_base,
                rating: None,
            });
            next_branch += 1;
        }
        if cfg.der_per_feeder > 0 {
            let mut picks: Vec<u32> = sample(&mut rng, candidates.len(), cfg.der_per_feeder)
                .into_iter()
                .map(|i| candidates[i])
                .collect();
            picks.sort_unstable();
            for (j, k) in picks.into_iter().enumerate() {
                generators.push(der(
                    format!("PV{}-{}", f + 1, j + 1),
                    feeder_bus_id(f, k),
                    der_total / cfg.der_per_feeder as f64,
                ));
            }
        }
    }

    let net = Network {
        base_mva,
        buses,
        branches,
        generators,
        loads,
        ev_stations,
        penetration_target: 0.0,
    };
    with_penetration(&net, cfg.penetration, cfg.res_capacity_cap)
}

/// Rescales renewable nameplates so that expected renewable energy equals
/// `penetration` times expected load.
///
/// DER units keep their nominal capacity unless that alone exceeds the
/// target, in which case they are scaled down and wind is zero. Otherwise
/// wind farms fill the remainder, split by their `nominal_output` weights.
/// `cap` bounds total wind nameplate as a multiple of expected load.
pub fn with_penetration(net: &Network, penetration: f64, cap: f64) -> Result<Network> {
    if !(0.0..1.0).contains(&penetration) {
        return Err(Error::InvalidParameter(format!(
            "penetration must be in [0, 1), got {penetration}"
        )));
    }
    let mut out = net.clone();
    out.penetration_target = penetration;
    let load = net.expected_load();
    let target = penetration * load;

    let der_energy: f64 = net
        .generators
        .iter()
        .filter(|g| g.kind == GeneratorKind::DerPv)
        .map(|g| g.nominal_output.unwrap_or(g.rated_output) * g.beta.unwrap_or_default().mean())
        .sum();

    let der_scale = if der_energy > 0.0 { (target / der_energy).min(1.0) } else { 0.0 };
    let residual = (target - der_energy * der_scale).max(0.0);

    let weight = |g: &Generator| g.nominal_output.filter(|w| *w > 0.0).unwrap_or(1.0);
    let per_weight_cf: f64 = net
        .generators
        .iter()
        .filter(|g| g.kind == GeneratorKind::Wind)
        .map(|g| match (&g.turbine, &g.weibull) {
            (Some(t), Some(w)) => weight(g) * t.expected_capacity_factor(w),
            _ => 0.0,
        })
        .sum();

    let wind_scale = if residual <= 1e-12 * load.max(1.0) {
        0.0
    } else if per_weight_cf > 0.0 {
        residual / per_weight_cf
    } else {
        return Err(Error::Infeasible(format!(
            "penetration {penetration} needs {residual:.3} MW of wind but the network has no wind farm"
        )));
    };

    let mut wind_total = 0.0;
    for g in &mut out.generators {
        match g.kind {
            GeneratorKind::DerPv => g.rated_output = g.nominal_output.unwrap_or(g.rated_output) * der_scale,
            GeneratorKind::Wind => {
                g.rated_output = weight(g) * wind_scale;
                wind_total += g.rated_output;
            }
            GeneratorKind::Conventional => {}
        }
    }
    if wind_total > cap * load {
        return Err(Error::Infeasible(format!(
            "penetration {penetration} needs {wind_total:.1} MW of wind nameplate, above the cap of {:.1} MW",
            cap * load
        )));
    }
    Ok(out)
}

/// Nine-node radial feeder fed from a slack source at node 1, with DERs at
/// nodes 3, 5 and 8. Decomposes into four virtual buses.
pub fn nine_node_feeder() -> Network {
    let lines = [(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (2, 8), (8, 9)];
    let load_mw = [0.0, 0.20, 0.15, 0.20, 0.10, 0.20, 0.15, 0.20, 0.25];
    let mut buses = Vec::new();
    let mut loads = Vec::new();
    for id in 1..=9u32 {
        let mu = load_mw[id as usize - 1];
        let base_load_ref = (mu > 0.0).then(|| {
            loads.push(LoadSpec {
                bus: id,
                normal: NormalParams { mu, sigma: 0.1 * mu },
            });
            loads.len() - 1
        });
        buses.push(Bus {
            id,
            kind: if id == 1 { BusKind::Slack } else { BusKind::Distribution },
            base_load_ref,
            ev_station_ref: None,
        });
    }
    let branches = lines
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| Branch {
            id: i as u32 + 1,
            from_bus: a,
            to_bus: b,
            susceptance: 50.0,
            resistance: 0.01,
            rating: None,
        })
        .collect();
    let mut generators = vec![conventional("G1", 1, MarginalCeiParams::flat(0.8, 2.0, 5.0), 1.0)];
    for (bus, cap) in [(3u32, 0.2), (5, 0.2), (8, 0.15)] {
        generators.push(der(format!("PV{bus}"), bus, cap));
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::validate;

    #[test]
    fn standard_fixture_counts() {
        let net = build_synthetic(&SyntheticConfig::default()).unwrap();
        assert_eq!(net.buses.len(), 16 + 30 * 33);
        assert_eq!(net.buses.len(), 1006);
        let ders = net.generators.iter().filter(|g| g.kind == GeneratorKind::DerPv).count();
        assert_eq!(ders, 30);
        assert_eq!(net.branches.len(), 24 + 30 * 33);
        assert!(validate(&net).is_empty(), "{:?}", validate(&net));
    }

    #[test]
    fn penetration_is_met_in_expectation() {
        for p in [0.0, 0.05, 0.2, 0.4, 0.8] {
            let cfg = SyntheticConfig { penetration: p, ..Default::default() };
            let net = build_synthetic(&cfg).unwrap();
            let share = net.expected_renewable() / net.expected_load();
            assert!((share - p).abs() < 1e-9, "p={p} share={share}");
        }
    }

    #[test]
    fn zero_penetration_zeroes_renewables() {
        let cfg = SyntheticConfig { penetration: 0.0, ..Default::default() };
        let net = build_synthetic(&cfg).unwrap();
        assert!(net
            .generators
            .iter()
            .filter(|g| g.kind.is_renewable())
            .all(|g| g.rated_output == 0.0));
    }

    #[test]
    fn penetration_rescale_recovers_ders_from_zero() {
        let cfg = SyntheticConfig { penetration: 0.0, ..Default::default() };
        let net = build_synthetic(&cfg).unwrap();
        let back = with_penetration(&net, 0.4, 3.0).unwrap();
        let direct = build_synthetic(&SyntheticConfig { penetration: 0.4, ..Default::default() }).unwrap();
        assert_eq!(back, direct);
    }

    #[test]
    fn same_seed_identical_other_seed_moves_ders() {
        let a = build_synthetic(&SyntheticConfig::default()).unwrap();
        let b = build_synthetic(&SyntheticConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = build_synthetic(&SyntheticConfig { seed: 99, ..Default::default() }).unwrap();
        assert_ne!(a, c);
        assert_eq!(a.branches, c.branches);
        assert_eq!(a.loads, c.loads);
    }

    #[test]
    fn excessive_penetration_is_infeasible() {
        let cfg = SyntheticConfig {
            penetration: 0.95,
            res_capacity_cap: 1.0,
            ..Default::default()
        };
        assert!(matches!(build_synthetic(&cfg), Err(Error::Infeasible(_))));
    }

    #[test]
    fn more_feeders_than_backbone_buses_round_robin() {
        let cfg = SyntheticConfig { n_feeders: 40, ..Default::default() };
        let net = build_synthetic(&cfg).unwrap();
        assert_eq!(net.buses.len(), 16 + 40 * 33);
        assert!(validate(&net).is_empty());
    }

    #[test]
    fn nine_node_feeder_is_valid() {
        let net = nine_node_feeder();
        assert!(validate(&net).is_empty(), "{:?}", validate(&net));
        assert_eq!(net.buses.len(), 9);
    }
}
