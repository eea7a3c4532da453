//! Network documents: write a random feeder as JSON, read it back and check the
//! per-unit conversion round trip.

use fcopf::netmodel::random::{random_radial_network, RandomNetworkOptions};
use fcopf::netmodel::{from_per_unit, network_to_json, parse_network, parse_network_physical, to_per_unit};

fn main() -> fcopf::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let net = random_radial_network(seed, &RandomNetworkOptions::default());
    let doc = network_to_json(&net)?;
    println!("{doc}");

    // the document is in physical units; parsing converts to per-unit again
    let back = parse_network(&doc)?;
    assert_eq!(back.buses, net.buses);
    let physical = parse_network_physical(&doc)?;
    let again = to_per_unit(&from_per_unit(&to_per_unit(&physical)?)?)?;
    eprintln!(
        "{} buses, {} lines, {} transformers, {} generators, {} scenarios; round trip ok: {}",
        net.buses.len(),
        net.lines.len(),
        net.transformers.len(),
        net.generators.len(),
        net.fault_scenarios.len(),
        again.lines.len() == net.lines.len()
    );
    Ok(())
}
