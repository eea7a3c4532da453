//! Power flow on the benchmark feeder with every unit off and every unit at capacity.

use fcopf::netmodel::build_cigre_lv_fixture;
use fcopf::powerflow::{run_power_flow, Dispatch};

fn main() -> fcopf::Result<()> {
    let net = build_cigre_lv_fixture();
    let cases = [("no DG", Dispatch::zero(&net)), ("all DG at capacity", Dispatch::at_pmax(&net))];
    for (name, d) in cases {
        let state = run_power_flow(&net, &d)?;
        let (node, vmin) = state.min_voltage();
        let losses = state.series_losses(&net) * net.bases(0).s_phase_kva;
        println!("{name}: min |V| {vmin:.4} pu at {}, losses {:.2} kW", state.nodes.label(node), losses.re);
        for (b, bus) in net.buses.iter().enumerate() {
            let v = state.bus_voltages(b)[0];
            println!("  {:<6} {:.4} pu {:>7.2} deg", bus.id, v.norm(), v.arg().to_degrees());
        }
    }
    Ok(())
}
