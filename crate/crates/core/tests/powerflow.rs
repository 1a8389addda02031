mod common;

use carbontrace_core::cef::CefSolver;
use carbontrace_core::mcs::{sample_scenario, Mode, ScenarioContext, Tracked};
use carbontrace_core::network::{build_synthetic, GeneratorKind, NetworkIndex, SyntheticConfig};
use carbontrace_core::powerflow::{dispatch, read_flow_file, DcPowerFlow, ScenarioSample};
use common::random_radial;
use proptest::prelude::*;

fn meshed() -> DcPowerFlow {
    let br = [
        (0, 1, 8.0, 0.01),
        (1, 2, 6.0, 0.02),
        (2, 3, 9.0, 0.01),
        (3, 0, 4.0, 0.015),
        (1, 3, 5.0, 0.01),
        (3, 4, 7.0, 0.01),
    ];
    DcPowerFlow::from_branches(5, 0, &br, 100.0).unwrap()
}

proptest! {
    #[test]
    fn dc_flow_is_linear(
        inj in proptest::collection::vec(-100.0f64..100.0, 4),
        alpha in -10.0f64..10.0,
    ) {
        let dc = meshed();
        let mut base = vec![0.0];
        base.extend(&inj);
        let scaled: Vec<f64> = base.iter().map(|x| alpha * x).collect();
        let a = dc.solve(&base).unwrap();
        let b = dc.solve(&scaled).unwrap();
        for (x, y) in a.p_send.iter().zip(&b.p_send) {
            prop_assert!((alpha * x - y).abs() <= 1e-9 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn dispatch_respects_limits_and_separates_surplus_from_deficit(
        seed in any::<u64>(),
        index in 0u64..10_000,
        load_scale in 0.2f64..1.6,
    ) {
        let net = build_synthetic(&SyntheticConfig { penetration: 0.6, ..Default::default() }).unwrap();
        let idx = NetworkIndex::new(&net).unwrap();
        let mut s = sample_scenario(&net, index, seed);
        for v in &mut s.base_loads {
            *v *= load_scale;
        }
        let d = dispatch(&net, &idx, &s).unwrap();
        let mut conventional = 0.0;
        let mut curtailed = 0.0;
        for (g, gen) in net.generators.iter().enumerate() {
            if gen.kind == GeneratorKind::Conventional {
                prop_assert!(d.output[g] >= 0.0 && d.output[g] <= gen.p_lim() + 1e-9);
                conventional += d.output[g];
            } else {
                curtailed += d.curtailment[g];
            }
        }
        prop_assert!(!(conventional > 1e-9 && curtailed > 1e-9));
        let load: f64 = s.base_loads.iter().chain(&s.ev_demands).sum();
        prop_assert!((d.total_output() - load).abs() <= 1e-6);
        let clamped = net
            .generators
            .iter()
            .enumerate()
            .any(|(g, gen)| gen.kind == GeneratorKind::Conventional && d.output[g] >= gen.p_lim() - 1e-9);
        if !clamped {
            prop_assert!(d.slack_residual.abs() <= 1e-9);
        }
    }
}

#[test]
fn energy_balance_after_losses_on_every_scenario() {
    let net = build_synthetic(&SyntheticConfig::default()).unwrap();
    let ctx = ScenarioContext::new(net, CefSolver::Auto, Tracked::default()).unwrap();
    for i in 0..200 {
        let s = sample_scenario(&ctx.net, i, 2024);
        let p = ctx.operating_point(&s).unwrap();
        let load: f64 = p.consumption.iter().sum();
        let gap = p.dispatch.total_output() - load - p.flow.total_loss();
        assert!(gap.abs() <= 1e-6, "scenario {i}: {gap:e}");
        assert!(p.flow.max_balance_error(&ctx.idx.branch_ends) <= 1e-8);
        assert!(p.flow.loss.iter().all(|&l| l >= 0.0));
    }
}

#[test]
fn flow_file_drives_the_kernel() {
    let ctx = ScenarioContext::new(random_radial(30, 9, 0.2), CefSolver::Auto, Tracked::default()).unwrap();
    let s: ScenarioSample = sample_scenario(&ctx.net, 4, 1);
    let p = ctx.operating_point(&s).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flows.csv");
    let mut text = String::from("branch_id,p_send_mw,p_recv_mw\n");
    for (k, b) in ctx.net.branches.iter().enumerate() {
        text.push_str(&format!("{},{},{}\n", b.id, p.flow.p_send[k], p.flow.p_recv(k)));
    }
    std::fs::write(&path, text).unwrap();
    let read = read_flow_file(&path, &ctx.net, &ctx.idx).unwrap();
    for k in 0..read.p_send.len() {
        assert!((read.p_send[k] - p.flow.p_send[k]).abs() < 1e-9);
        assert!((read.loss[k] - p.flow.loss[k]).abs() < 1e-9);
    }
    let direct = ctx.solve(p, Mode::Full).unwrap();
    let via_file = ctx.solve(ctx.operating_point_with_flow(&s, read).unwrap(), Mode::Full).unwrap();
    for (a, b) in direct.solution.bus_intensity.iter().zip(&via_file.solution.bus_intensity) {
        assert!((a - b).abs() < 1e-9);
    }
}
