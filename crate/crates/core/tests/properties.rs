//! Invariants of the optimisation studies beyond the numbered acceptance list.

use std::sync::{Mutex, MutexGuard};

use fcopf::fcopf::{solve_fcopf, solve_fcopf_with, FcopfOptions, Weights};
use fcopf::netmodel::random::{random_radial_network, RandomNetworkOptions};
use fcopf::netmodel::{build_cigre_lv_fixture, Network};
use fcopf::nlp::{SolveStatus, SolverOptions};
use fcopf::opf::{solve_opf, OpfSolution};
use fcopf::phasor::line_impedance;
use fcopf::powerflow::run_power_flow;
use fcopf::shortcircuit::no_dg_study;

static LOCK: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

/// Re-checks an OPF optimum with code the solver never touches: a power flow at
/// the optimal dispatch, Ohm's law on every line and the generator limits.
fn check_opf_point(net: &Network, sol: &OpfSolution) {
    let tol = SolverOptions::default();
    let d = &sol.diagnostics;
    assert_eq!(d.status, SolveStatus::Optimal, "{}", net.name);
    assert!(d.primal_feasibility <= tol.feas_tol && d.stationarity <= tol.grad_tol && d.complementarity <= tol.comp_tol);

    let pf = run_power_flow(net, &sol.dispatch).unwrap();
    let dv = pf.v.iter().zip(&sol.state.v).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(dv < 1e-6, "{}: power flow differs by {dv:e}", net.name);

    for (k, line) in net.lines.iter().enumerate() {
        let z = line_impedance(net, k);
        let f = net.bus_index(&line.from).unwrap();
        let t = net.bus_index(&line.to).unwrap();
        for (a, &pa) in line.phases.iter().enumerate() {
            let drop = sol.state.v[sol.state.nodes.node(f, pa).unwrap()] - sol.state.v[sol.state.nodes.node(t, pa).unwrap()];
            let zi: num_complex::Complex64 = (0..line.phases.len()).map(|b| z[(a, b)] * sol.state.line_currents[k][b]).sum();
            assert!((drop - zi).norm() < 1e-6, "{} line {}", net.name, line.id);
            assert!(sol.state.line_currents[k][a].norm() <= line.ampacity + 1e-6);
        }
    }
    for (b, bus) in net.buses.iter().enumerate() {
        for v in sol.state.bus_voltages(b) {
            assert!(v.norm() >= bus.vmin_pu - 1e-6 && v.norm() <= bus.vmax_pu + 1e-6, "bus {}", bus.id);
        }
    }
    for (g, gen) in net.dispatchable_generators() {
        let p = &sol.dispatch.p[g];
        let q = &sol.dispatch.q[g];
        for k in 0..p.len() {
            assert!(p[k] >= -1e-8 && p[k] <= gen.pmax[k] + 1e-8);
            assert!(q[k].abs() <= gen.q_ratio() * p[k] + 1e-8, "{} power factor", gen.id);
        }
        if p.len() > 1 {
            let mean = p.iter().sum::<f64>() / p.len() as f64;
            let spread = p.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
            assert!(spread <= 0.05 * mean + 1e-8, "{} balance {spread} vs mean {mean}", gen.id);
        }
    }
}

#[test]
fn fixture_opf_optimum_satisfies_network_physics() {
    let _g = serial();
    let net = build_cigre_lv_fixture();
    check_opf_point(&net, &solve_opf(&net).unwrap());
}

#[test]
fn random_network_opf_optima_satisfy_network_physics() {
    let _g = serial();
    for seed in 0..6u64 {
        let net = random_radial_network(
            seed,
            &RandomNetworkOptions {
                buses: 6 + seed as usize,
                ..Default::default()
            },
        );
        check_opf_point(&net, &solve_opf(&net).unwrap());
    }
}

#[test]
fn cost_only_fcopf_reproduces_opf_dispatch() {
    let _g = serial();
    let net = build_cigre_lv_fixture();
    let opf = solve_opf(&net).unwrap();
    let fc = solve_fcopf(&net, Weights { cost: 1.0, fault: 0.0 }).unwrap();
    assert_eq!(fc.diagnostics.status, SolveStatus::Optimal);
    for (g, _) in net.dispatchable_generators() {
        for k in 0..3 {
            assert!((opf.dispatch.p[g][k] - fc.dispatch.p[g][k]).abs() < 1e-4);
            assert!((opf.dispatch.q[g][k] - fc.dispatch.q[g][k]).abs() < 1e-4);
        }
    }
}

#[test]
fn fault_term_never_grows_with_its_weight() {
    let _g = serial();
    let net = build_cigre_lv_fixture();
    let mut prev = f64::INFINITY;
    for w in [0.0, 0.5, 1.0, 2.0] {
        let fc = solve_fcopf(&net, Weights { cost: 1.0, fault: w }).unwrap();
        assert_eq!(fc.diagnostics.status, SolveStatus::Optimal, "w_fault = {w}");
        assert!(fc.fault_term <= prev * (1.0 + 1e-9), "w_fault = {w}: {} after {prev}", fc.fault_term);
        prev = fc.fault_term;
    }
}

#[test]
fn hard_cap_is_respected_or_reported_infeasible() {
    let _g = serial();
    let net = build_cigre_lv_fixture();
    let (_, lo) = no_dg_study(&net).unwrap();
    let floor = lo.headline_amps()[0];

    let cap = floor + 20.0;
    let fc = solve_fcopf_with(
        &net,
        &FcopfOptions {
            hard_cap_amps: Some(cap),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(fc.diagnostics.status, SolveStatus::Optimal);
    for s in &fc.scenarios {
        for f in &s.faults {
            assert!(f.current_a.iter().all(|&i| i <= cap * (1.0 + 1e-6)), "{:?}", f.current_a);
        }
    }
    assert!(fc.state.min_voltage().1 >= 0.9 - 1e-6);

    let impossible = solve_fcopf_with(
        &net,
        &FcopfOptions {
            hard_cap_amps: Some(0.5 * floor),
            ..Default::default()
        },
    )
    .unwrap();
    assert_ne!(impossible.diagnostics.status, SolveStatus::Optimal);
}
