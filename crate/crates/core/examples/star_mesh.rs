//! Fault conductance matrices for every fault type, built through the star-mesh
//! transformation.

use fcopf::netmodel::{FaultSpec, FaultType, Phase};
use fcopf::phasor::{build_fault_admittance, star_to_mesh, C64};

fn main() -> fcopf::Result<()> {
    let mesh = star_to_mesh(&[C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(4.0, 0.0)])?;
    println!("star 1-2-4 ohm as a mesh (S):");
    for row in &mesh {
        let r: Vec<String> = row.iter().map(|y| format!("{:.4}", y.re)).collect();
        println!("  {}", r.join("  "));
    }

    use Phase::*;
    let cases = [
        (FaultType::LG, vec![A]),
        (FaultType::LL, vec![B, C]),
        (FaultType::LLG, vec![A, B]),
        (FaultType::ThreePhase, vec![A, B, C]),
        (FaultType::ThreePhaseGround, vec![A, B, C]),
    ];
    for (kind, phases) in cases {
        let fault = FaultSpec {
            id: format!("{kind:?}"),
            bus: "b".into(),
            kind,
            phases,
            r_phase: 0.5,
            r_ground: kind.is_grounded().then_some(1.0),
        };
        let g = build_fault_admittance(&fault, 1e-4)?;
        println!("{kind:?} (row sums {:?})", g.row_sums());
        for row in &g.g {
            println!("  {row:?}");
        }
    }
    Ok(())
}
