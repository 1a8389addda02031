mod common;

use carbontrace_core::cef::*;
use carbontrace_core::network::{BusKind, LoadSpec, Network, NetworkIndex};
use carbontrace_core::powerflow::{DispatchResult, FlowSolution};
use carbontrace_core::stochastic::{MarginalCeiParams, NormalParams};
use carbontrace_core::Error;
use common::{bus, conventional, line, random_dag};
use proptest::prelude::*;

fn two_bus() -> Network {
    Network {
        base_mva: 100.0,
        buses: vec![bus(1, BusKind::Slack), bus(2, BusKind::Transmission)],
        branches: vec![line(1, 1, 2, 10.0, 0.0)],
        generators: vec![conventional("G1", 1, MarginalCeiParams::flat(0.8, 100.0, 200.0), 1.0)],
        loads: vec![LoadSpec {
            bus: 2,
            normal: NormalParams { mu: 100.0, sigma: 0.0 },
        }],
        ev_stations: vec![],
        penetration_target: 0.0,
    }
}

fn flow(p: f64, loss: f64) -> FlowSolution {
    FlowSolution {
        p_send: vec![p],
        loss: vec![loss],
        injection: vec![p.abs(), -(p.abs() - loss)],
        slack_residual: 0.0,
    }
}

fn one_unit(output: f64) -> DispatchResult {
    DispatchResult {
        output: vec![output],
        intensity: vec![0.8],
        curtailment: vec![0.0],
        slack_residual: 0.0,
    }
}

#[test]
fn two_bus_gives_one_edge_with_the_load() {
    let net = two_bus();
    let idx = NetworkIndex::new(&net).unwrap();
    let g = build_flow_graph(&idx, &flow(100.0, 0.0), &one_unit(100.0), &[0.0, 100.0]).unwrap();
    assert_eq!(g.edges.len(), 1);
    assert_eq!((g.edges[0].from, g.edges[0].to), (0, 1));
    assert_eq!(g.edges[0].recv(), 100.0);
    let s = allocate_emissions(solve_intensities(&g).unwrap(), &g);
    assert!((s.load_rate[1] - 80.0).abs() < 1e-12);
    assert!((s.generator_rate[0] - 80.0).abs() < 1e-12);
}

#[test]
fn negative_flow_reverses_the_edge() {
    // Generation sits at the to-bus: swap roles by putting the slack load on bus 1.
    let mut net = two_bus();
    net.generators[0].bus = 2;
    net.buses[0].kind = BusKind::Transmission;
    net.buses[1].kind = BusKind::Slack;
    net.loads[0].bus = 1;
    let idx = NetworkIndex::new(&net).unwrap();
    let f = FlowSolution {
        p_send: vec![-100.0],
        loss: vec![0.0],
        injection: vec![-100.0, 100.0],
        slack_residual: 0.0,
    };
    let g = build_flow_graph(&idx, &f, &one_unit(100.0), &[100.0, 0.0]).unwrap();
    assert_eq!((g.edges[0].from, g.edges[0].to), (1, 0));
    assert_eq!(g.orientation, vec![-1]);
}

#[test]
fn sub_threshold_flow_is_omitted() {
    let net = two_bus();
    let idx = NetworkIndex::new(&net).unwrap();
    let tiny = FLOW_EPSILON / 2.0;
    let g = build_flow_graph(&idx, &flow(tiny, 0.0), &one_unit(tiny), &[0.0, tiny]).unwrap();
    assert!(g.edges.is_empty());
    assert_eq!(g.orientation, vec![0]);
    g.check_balance().unwrap();
}

#[test]
fn imbalanced_flows_are_rejected() {
    let net = two_bus();
    let idx = NetworkIndex::new(&net).unwrap();
    let r = build_flow_graph(&idx, &flow(100.0, 0.0), &one_unit(100.0), &[0.0, 90.0]);
    match r {
        Err(Error::Numerical(m)) => assert!(m.contains("bus 2"), "{m}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn branch_fed_from_both_ends_charges_each_end() {
    let mut net = two_bus();
    net.generators.push(common::der("PV2", 2, 10.0));
    net.loads[0].normal.mu = 0.0;
    let idx = NetworkIndex::new(&net).unwrap();
    let f = FlowSolution {
        p_send: vec![20.0],
        loss: vec![30.0],
        injection: vec![20.0, 10.0],
        slack_residual: 0.0,
    };
    let d = DispatchResult {
        output: vec![20.0, 10.0],
        intensity: vec![0.8, 0.0],
        curtailment: vec![0.0, 0.0],
        slack_residual: 0.0,
    };
    let g = build_flow_graph(&idx, &f, &d, &[0.0, 0.0]).unwrap();
    assert!(g.edges.is_empty());
    assert_eq!(g.orientation, vec![0]);
    assert_eq!(g.fed_losses.len(), 2);
    assert!((g.total_loss() - 30.0).abs() < 1e-12);
    let s = allocate_emissions(solve_intensities(&g).unwrap(), &g);
    assert!((s.branch_loss_rate[0] - 16.0).abs() < 1e-12);
    assert!(s.conservation_error() < 1e-15);
    let r = trace_generator_responsibility(&g, 0).unwrap();
    assert!((r.branch_loss[0] - 16.0).abs() < 1e-12);
}

fn intensity_bounds(g: &FlowGraph) -> (f64, f64) {
    g.injections
        .iter()
        .filter(|i| i.power > 0.0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
            (lo.min(i.intensity), hi.max(i.intensity))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sweep_equals_linear_system(seed in any::<u64>(), n in 2usize..=20, share in 0.0f64..0.6) {
        let g = random_dag(n, seed, share);
        g.check_balance().unwrap();
        let a = solve_intensities_with(&g, CefSolver::Sweep).unwrap();
        let b = solve_intensities_with(&g, CefSolver::Matrix).unwrap();
        for (x, y) in a.bus_intensity.iter().zip(&b.bus_intensity) {
            prop_assert!((x - y).abs() <= 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn intensities_are_convex_and_emissions_conserved(seed in any::<u64>(), n in 2usize..=20) {
        let g = random_dag(n, seed, 0.4);
        let s = allocate_emissions(solve_intensities(&g).unwrap(), &g);
        let (lo, hi) = intensity_bounds(&g);
        let t = g.throughput();
        for (i, &e) in s.bus_intensity.iter().enumerate() {
            if t[i] > 0.0 {
                prop_assert!(e >= lo - 1e-12 && e <= hi + 1e-12);
            }
        }
        prop_assert!(s.load_rate.iter().chain(&s.branch_loss_rate).all(|&r| r >= 0.0));
        prop_assert!(s.conservation_error() <= 1e-9);
    }

    #[test]
    fn scaling_all_powers_leaves_intensities(seed in any::<u64>(), alpha in 0.01f64..100.0) {
        let g = random_dag(12, seed, 0.3);
        let mut scaled = g.clone();
        for n in &mut scaled.nodes {
            n.consumption *= alpha;
        }
        for i in &mut scaled.injections {
            i.power *= alpha;
        }
        for e in &mut scaled.edges {
            e.send *= alpha;
            e.loss *= alpha;
        }
        let a = solve_intensities(&g).unwrap();
        let b = solve_intensities(&scaled).unwrap();
        for (x, y) in a.bus_intensity.iter().zip(&b.bus_intensity) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn traced_shares_are_complete(seed in any::<u64>(), n in 2usize..=16) {
        let g = random_dag(n, seed, 0.5);
        let s = allocate_emissions(solve_intensities(&g).unwrap(), &g);
        let t = g.throughput();
        let mut sum = vec![0.0; g.node_count()];
        for gen in 0..g.generator_count {
            let r = trace_generator_responsibility(&g, gen).unwrap();
            let rate = s.generator_rate[gen];
            prop_assert!((r.total() - rate).abs() <= 1e-9 * rate.max(1e-12));
            for (acc, f) in sum.iter_mut().zip(&r.fraction) {
                *acc += f;
            }
        }
        for (i, f) in sum.iter().enumerate() {
            if t[i] > 0.0 {
                prop_assert!((f - 1.0).abs() <= 1e-9);
            }
        }
    }
}
