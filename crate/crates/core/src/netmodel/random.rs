//! Seeded random radial feeders for property tests and the `--fixture random` CLI mode.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    to_per_unit, BaseData, Bus, FaultSpec, FaultType, Generator, GeneratorKind, Grounding, Line,
    Load, LoadModel, Network, Phase, Transformer, VectorGroup, VoltageBase,
};

#[derive(Debug, Clone)]
pub struct RandomNetworkOptions {
    pub buses: usize,
    pub dispatchable: usize,
    pub scenarios: usize,
    /// Insert a Dyn transformer between the source and the feeder.
    pub transformer: bool,
    /// Allow one- and two-phase laterals.
    pub laterals: bool,
}

impl Default for RandomNetworkOptions {
    fn default() -> Self {
        RandomNetworkOptions {
            buses: 10,
            dispatchable: 2,
            scenarios: 4,
            transformer: true,
            laterals: true,
        }
    }
}

/// Random radial network in per-unit. Same seed, same network.
pub fn random_radial_network(seed: u64, opts: &RandomNetworkOptions) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = opts.buses.max(2);
    let abc = Phase::ALL.to_vec();

    let mut buses = Vec::new();
    let mut lines = Vec::new();
    let mut transformers = Vec::new();
    let mut bases = vec![VoltageBase {
        zone: "b0".into(),
        kv_ll: 0.4,
    }];
    let source_bus = if opts.transformer {
        buses.push(Bus {
            id: "mv".into(),
            phases: abc.clone(),
            vmin_pu: 0.5,
            vmax_pu: 1.5,
            grounding: None,
        });
        bases.push(VoltageBase {
            zone: "mv".into(),
            kv_ll: 11.0,
        });
        transformers.push(Transformer {
            id: "t0".into(),
            from: "mv".into(),
            to: "b0".into(),
            vector_group: *[VectorGroup::Dyn1, VectorGroup::Dyn11, VectorGroup::Yy0]
                .choose(&mut rng)
                .unwrap(),
            tap: rng.gen_range(0.97..1.03),
            r_pu: rng.gen_range(0.005..0.015),
            x_pu: rng.gen_range(0.03..0.06),
            rating_kva: 400.0,
        });
        "mv"
    } else {
        "b0"
    };
    buses.push(Bus {
        id: "b0".into(),
        phases: abc.clone(),
        vmin_pu: 0.5,
        vmax_pu: 1.5,
        grounding: rng.gen_bool(0.3).then(|| Grounding {
            r: rng.gen_range(0.0..2.0),
            x: 0.0,
        }),
    });

    let feeder = n.saturating_sub(buses.len());
    for k in 1..=feeder {
        let parent = rng.gen_range(0..k);
        let parent_id = format!("b{parent}");
        let parent_phases = buses
            .iter()
            .find(|b| b.id == parent_id)
            .unwrap()
            .phases
            .clone();
        let phases = if opts.laterals && parent_phases.len() > 1 && rng.gen_bool(0.2) {
            let keep = rng.gen_range(1..parent_phases.len());
            let mut p: Vec<Phase> = parent_phases
                .choose_multiple(&mut rng, keep)
                .copied()
                .collect();
            p.sort();
            p
        } else {
            parent_phases
        };
        let id = format!("b{k}");
        buses.push(Bus {
            id: id.clone(),
            phases: phases.clone(),
            vmin_pu: 0.5,
            vmax_pu: 1.5,
            grounding: None,
        });
        let km = rng.gen_range(0.02..0.15);
        let (r1, x1) = (rng.gen_range(0.1..0.6), rng.gen_range(0.05..0.3));
        let (r0, x0) = (r1 * rng.gen_range(2.0..4.0), x1 * rng.gen_range(2.0..4.0));
        let np = phases.len();
        let entry = |s: f64, m: f64, i: usize, j: usize| if i == j { s } else { m };
        let (sr, mr) = ((r0 + 2.0 * r1) / 3.0 * km, (r0 - r1) / 3.0 * km);
        let (sx, mx) = ((x0 + 2.0 * x1) / 3.0 * km, (x0 - x1) / 3.0 * km);
        lines.push(Line {
            id: format!("l{k}"),
            from: parent_id,
            to: id,
            phases,
            r: (0..np)
                .map(|i| (0..np).map(|j| entry(sr, mr, i, j)).collect())
                .collect(),
            x: (0..np)
                .map(|i| (0..np).map(|j| entry(sx, mx, i, j)).collect())
                .collect(),
            ampacity: 400.0,
        });
    }

    let sc3 = rng.gen_range(5.0..50.0);
    let mut generators = vec![Generator {
        id: "source".into(),
        bus: source_bus.into(),
        kind: GeneratorKind::Reference,
        cost_per_kwh: rng.gen_range(0.0..0.5),
        pmax: vec![0.0; 3],
        pf_min: 1.0,
        kf: 1.0,
        z_r_pu: 0.0,
        z_i_pu: 0.0,
        vset_pu: rng.gen_range(0.98..1.04),
        theta_deg: 0.0,
        sc3_mva: Some(sc3),
        sc1_mva: Some(sc3 * rng.gen_range(0.5..1.4)),
    }];
    let feeder_buses: Vec<&Bus> = buses.iter().filter(|b| b.id != "mv").collect();
    for d in 0..opts.dispatchable {
        let bus = feeder_buses.choose(&mut rng).unwrap();
        generators.push(Generator {
            id: format!("dg{d}"),
            bus: bus.id.clone(),
            kind: GeneratorKind::Dispatchable,
            cost_per_kwh: rng.gen_range(0.2..1.0),
            pmax: bus.phases.iter().map(|_| rng.gen_range(3.0..12.0)).collect(),
            pf_min: rng.gen_range(0.85..1.0),
            kf: rng.gen_range(1.5..6.0),
            z_r_pu: 0.0,
            z_i_pu: 0.2,
            vset_pu: 1.0,
            theta_deg: 0.0,
            sc3_mva: None,
            sc1_mva: None,
        });
    }

    let mut loads = Vec::new();
    for (k, bus) in feeder_buses.iter().enumerate().skip(1) {
        if !rng.gen_bool(0.6) {
            continue;
        }
        let p: Vec<f64> = bus.phases.iter().map(|_| rng.gen_range(1.0..8.0)).collect();
        let q = p.iter().map(|p| p * rng.gen_range(0.1..0.5)).collect();
        loads.push(Load {
            id: format!("ld{k}"),
            bus: bus.id.clone(),
            p,
            q,
            model: if rng.gen_bool(0.3) {
                LoadModel::ConstantImpedance
            } else {
                LoadModel::ConstantPower
            },
        });
    }

    let mut scenarios = Vec::new();
    for s in 0..opts.scenarios {
        let bus = feeder_buses.choose(&mut rng).unwrap();
        let mut kinds = vec![FaultType::LG];
        if bus.phases.len() >= 2 {
            kinds.extend([FaultType::LL, FaultType::LLG]);
        }
        if bus.phases.len() == 3 {
            kinds.extend([FaultType::ThreePhase, FaultType::ThreePhaseGround]);
        }
        let kind = *kinds.choose(&mut rng).unwrap();
        let mut phases: Vec<Phase> = bus
            .phases
            .choose_multiple(&mut rng, kind.phase_count())
            .copied()
            .collect();
        phases.sort();
        let r = |rng: &mut ChaCha8Rng| {
            if rng.gen_bool(0.3) {
                0.0
            } else {
                rng.gen_range(0.0..0.5)
            }
        };
        scenarios.push(vec![FaultSpec {
            id: format!("f{s}"),
            bus: bus.id.clone(),
            kind,
            phases,
            r_phase: r(&mut rng),
            r_ground: kind.is_grounded().then(|| r(&mut rng)),
        }]);
    }

    let net = Network::new(
        format!("random-{seed}"),
        BaseData {
            frequency_hz: 50.0,
            power_base_kva: 100.0,
            voltage_bases: bases,
        },
        buses,
        lines,
        transformers,
        generators,
        loads,
        scenarios,
    )
    .expect("generated network is valid");
    to_per_unit(&net).expect("generated network converts")
}
