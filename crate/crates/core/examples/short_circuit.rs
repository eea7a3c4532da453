//! The two boundary fault studies of the benchmark feeder: substation only, and
//! every unit at capacity.

use fcopf::netmodel::build_cigre_lv_fixture;
use fcopf::shortcircuit::{max_dg_study, no_dg_study};

fn main() -> fcopf::Result<()> {
    let net = build_cigre_lv_fixture();
    let (_, lo) = no_dg_study(&net)?;
    let (_, hi) = max_dg_study(&net)?;
    println!("{:<6} {:>10} {:>10}", "bus", "no DG (A)", "max DG (A)");
    for (a, b) in lo.scenarios.iter().zip(&hi.scenarios) {
        println!("{:<6} {:>10.0} {:>10.0}", a.faults[0].bus, a.headline_amps(), b.headline_amps());
    }
    println!("{:<6} {:>10.0} {:>10.0}", "total", lo.total_amps(), hi.total_amps());

    // what each unit feeds into the first fault at full output
    let s = &hi.scenarios[0];
    for (g, gen) in net.dispatchable_generators() {
        let b = net.bus_index(&gen.bus).unwrap();
        let i_a: f64 = s.generator_currents[g][0].norm() * net.bases(b).i_amp;
        println!("{:<12} contributes {i_a:.1} A on phase A", gen.id);
    }
    Ok(())
}
