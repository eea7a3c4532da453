//! Minimum-cost dispatch of the benchmark feeder under the 0.9 pu voltage floor.

use fcopf::netmodel::build_cigre_lv_fixture;
use fcopf::opf::solve_opf;

fn main() -> fcopf::Result<()> {
    env_logger::init();
    let net = build_cigre_lv_fixture();
    let sol = solve_opf(&net)?;
    let d = &sol.diagnostics;
    println!(
        "{:?} after {} iterations ({:.2} s), cost {:.3} per hour",
        d.status, d.iterations, d.solve_seconds, sol.cost
    );
    for (g, gen) in net.dispatchable_generators() {
        let s = sol.dispatch.generator_total(g) * net.bases(0).s_phase_kva;
        println!("  {:<12} {:>7.3} kW {:>7.3} kvar", gen.id, s.re, s.im);
    }
    println!("min |V| {:.4} pu", sol.state.min_voltage().1);
    Ok(())
}
