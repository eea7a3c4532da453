//! Fault-current-constrained dispatch of the benchmark feeder.
//!
//! Usage: `cargo run --release --example fcopf -- [w_cost] [w_fault]`

use fcopf::fcopf::{solve_fcopf, Weights};
use fcopf::netmodel::build_cigre_lv_fixture;

fn main() -> fcopf::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1).map(|a| a.parse::<f64>().expect("weights are numbers"));
    let weights = Weights {
        cost: args.next().unwrap_or(1.0),
        fault: args.next().unwrap_or(1.0),
    };
    let net = build_cigre_lv_fixture();
    let sol = solve_fcopf(&net, weights)?;
    println!(
        "{:?}: objective {:.4} = {:.3} x {:.3}/{:.2} + {:.3} x {:.2}/{:.2}",
        sol.diagnostics.status,
        sol.objective,
        weights.cost,
        sol.cost,
        sol.scaling.cost_max,
        weights.fault,
        sol.fault_term,
        sol.scaling.fault_max
    );
    for (g, gen) in net.dispatchable_generators() {
        let s = sol.dispatch.generator_total(g) * net.bases(0).s_phase_kva;
        println!("  {:<12} {:>7.3} kW {:>7.3} kvar", gen.id, s.re, s.im);
    }
    for (s, amps) in sol.scenarios.iter().zip(sol.headline_amps()) {
        println!("  fault at {:<4} {amps:>7.0} A", s.faults[0].bus);
    }
    Ok(())
}
