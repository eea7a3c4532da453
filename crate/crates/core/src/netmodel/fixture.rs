//! Bundled benchmark: a modified CIGRE low-voltage residential microgrid.
//!
//! 20/0.4 kV Dyn1 substation transformer feeding a 400 V underground cable feeder
//! with six service connections. Every distributed unit is a synchronous machine
//! capped at five times its operating current.

use super::{
    to_per_unit, BaseData, Bus, FaultSpec, FaultType, Generator, GeneratorKind, Line, Load,
    LoadModel, Network, Phase, Transformer, VectorGroup, VoltageBase,
};

/// Descriptive data of the bundled benchmark that is not part of the network model.
#[derive(Debug, Clone, Copy)]
pub struct FixtureInfo {
    pub name: &'static str,
    /// Route length of every line (m), in line order.
    pub line_lengths_m: &'static [(&'static str, f64)],
    /// Faulted buses, one three-phase grounded fault scenario each.
    pub fault_buses: &'static [&'static str],
    pub load_power_factor: f64,
    pub dg_cost_per_kwh: f64,
    pub kf: f64,
}

pub const CIGRE_LV_INFO: FixtureInfo = FixtureInfo {
    name: "cigre-lv",
    line_lengths_m: &[
        ("L100-101", 35.0),
        ("L101-102", 35.0),
        ("L102-103", 35.0),
        ("L103-104", 35.0),
        ("L104-105", 35.0),
        ("L105-106", 35.0),
        ("L103-107", 35.0),
        ("L107-108", 35.0),
        ("L108-109", 35.0),
        ("L109-110", 35.0),
        ("L110-111", 35.0),
        ("L111-112", 35.0),
        ("LSvc1", 30.0),
        ("LSvc2", 30.0),
        ("LSvc3", 30.0),
        ("LSvc4", 70.0),
        ("LSvc5", 30.0),
        ("LSvc6", 30.0),
    ],
    fault_buses: &["102", "103", "107", "108", "109", "110", "111", "112"],
    load_power_factor: 0.90,
    dg_cost_per_kwh: 0.80,
    kf: 5.0,
};

// Sequence impedances (ohm/km) of the feeder and service cables.
const MAIN_Z1: (f64, f64) = (0.284, 0.083);
const MAIN_Z0: (f64, f64) = (1.136, 0.417);
const SERVICE_Z1: (f64, f64) = (0.871, 0.081);
const SERVICE_Z0: (f64, f64) = (3.480, 0.340);
const MAIN_AMPACITY_A: f64 = 400.0;
const SERVICE_AMPACITY_A: f64 = 200.0;

// (line id, from, to, service cable?)
const TOPOLOGY: [(&str, &str, &str, bool); 18] = [
    ("L100-101", "100", "101", false),
    ("L101-102", "101", "102", false),
    ("L102-103", "102", "103", false),
    ("L103-104", "103", "104", false),
    ("L104-105", "104", "105", false),
    ("L105-106", "105", "106", false),
    ("L103-107", "103", "107", false),
    ("L107-108", "107", "108", false),
    ("L108-109", "108", "109", false),
    ("L109-110", "109", "110", false),
    ("L110-111", "110", "111", false),
    ("L111-112", "111", "112", false),
    ("LSvc1", "106", "Svc1", true),
    ("LSvc2", "109", "Svc2", true),
    ("LSvc3", "111", "Svc3", true),
    ("LSvc4", "112", "Svc4", true),
    ("LSvc5", "104", "Svc5", true),
    ("LSvc6", "101", "Svc6", true),
];

// (load id, bus, apparent power kVA, phase split)
const LOADS: [(&str, &str, f64, [f64; 3]); 5] = [
    ("Load1", "Svc1", 40.0, [0.34, 0.33, 0.33]),
    ("Load2", "Svc2", 35.0, [0.36, 0.33, 0.31]),
    ("Load3", "Svc3", 47.0, [0.33, 0.34, 0.33]),
    ("Load4", "Svc4", 22.0, [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]),
    ("Load5", "Svc5", 55.0, [0.35, 0.33, 0.32]),
];

// (generator id, bus, capacity kW); fixture order is the reporting order.
const DGS: [(&str, &str, f64); 6] = [
    ("Microturbine", "Svc1", 30.0),
    ("Wind", "Svc2", 10.0),
    ("Battery", "Svc6", 30.0),
    ("PV1", "Svc3", 3.0),
    ("FuelCell", "Svc4", 10.0),
    ("PV2", "Svc5", 10.0),
];

const FAULT_SCENARIO_BUSES: [&str; 8] = ["102", "103", "107", "108", "109", "110", "111", "112"];

fn phase_matrix(z1: (f64, f64), z0: (f64, f64), km: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let self_r = (z0.0 + 2.0 * z1.0) / 3.0 * km;
    let self_x = (z0.1 + 2.0 * z1.1) / 3.0 * km;
    let mut_r = (z0.0 - z1.0) / 3.0 * km;
    let mut_x = (z0.1 - z1.1) / 3.0 * km;
    let build = |s: f64, m: f64| {
        (0..3)
            .map(|i| (0..3).map(|j| if i == j { s } else { m }).collect())
            .collect()
    };
    (build(self_r, mut_r), build(self_x, mut_x))
}

/// Benchmark network in physical units.
pub(crate) fn cigre_lv_physical() -> Network {
    let abc = Phase::ALL.to_vec();
    let bus = |id: &str| Bus {
        id: id.to_string(),
        phases: abc.clone(),
        vmin_pu: 0.9,
        vmax_pu: 1.1,
        grounding: None,
    };
    let mut buses = vec![bus("11")];
    buses.extend((100..=112).map(|n| bus(&n.to_string())));
    buses.extend((1..=6).map(|n| bus(&format!("Svc{n}"))));

    let lines = TOPOLOGY
        .iter()
        .map(|&(id, from, to, service)| {
            let length_m = CIGRE_LV_INFO
                .line_lengths_m
                .iter()
                .find(|(l, _)| *l == id)
                .map(|(_, m)| *m)
                .expect("every line has a length");
            let (z1, z0, amp) = if service {
                (SERVICE_Z1, SERVICE_Z0, SERVICE_AMPACITY_A)
            } else {
                (MAIN_Z1, MAIN_Z0, MAIN_AMPACITY_A)
            };
            let (r, x) = phase_matrix(z1, z0, length_m / 1000.0);
            Line {
                id: id.to_string(),
                from: from.to_string(),
                to: to.to_string(),
                phases: abc.clone(),
                r,
                x,
                ampacity: amp,
            }
        })
        .collect();

    let transformers = vec![Transformer {
        id: "T1".into(),
        from: "11".into(),
        to: "100".into(),
        vector_group: VectorGroup::Dyn1,
        tap: 1.0,
        r_pu: 0.013,
        x_pu: 0.052,
        rating_kva: 400.0,
    }];

    let mut generators = vec![Generator {
        id: "Substation".into(),
        bus: "11".into(),
        kind: GeneratorKind::Reference,
        cost_per_kwh: 0.0,
        pmax: vec![0.0; 3],
        pf_min: 1.0,
        kf: 1.0,
        z_r_pu: 0.0,
        z_i_pu: 0.0,
        vset_pu: 1.0,
        theta_deg: 0.0,
        sc3_mva: Some(100.0),
        sc1_mva: Some(100.0),
    }];
    generators.extend(DGS.iter().map(|&(id, bus, kw)| Generator {
        id: id.to_string(),
        bus: bus.to_string(),
        kind: GeneratorKind::Dispatchable,
        cost_per_kwh: CIGRE_LV_INFO.dg_cost_per_kwh,
        pmax: vec![kw / 3.0; 3],
        pf_min: 0.9,
        kf: CIGRE_LV_INFO.kf,
        z_r_pu: 0.0,
        z_i_pu: 0.2,
        vset_pu: 1.0,
        theta_deg: 0.0,
        sc3_mva: None,
        sc1_mva: None,
    }));

    let pf = CIGRE_LV_INFO.load_power_factor;
    let qf = (1.0 - pf * pf).sqrt();
    let loads = LOADS
        .iter()
        .map(|&(id, bus, kva, split)| Load {
            id: id.to_string(),
            bus: bus.to_string(),
            p: split.iter().map(|s| kva * s * pf).collect(),
            q: split.iter().map(|s| kva * s * qf).collect(),
            model: LoadModel::ConstantPower,
        })
        .collect();

    let fault_scenarios = FAULT_SCENARIO_BUSES
        .iter()
        .map(|&b| {
            vec![FaultSpec {
                id: format!("F{b}"),
                bus: b.to_string(),
                kind: FaultType::ThreePhaseGround,
                phases: abc.clone(),
                r_phase: 0.0,
                r_ground: Some(0.0),
            }]
        })
        .collect();

    Network::new(
        CIGRE_LV_INFO.name,
        BaseData {
            frequency_hz: 50.0,
            power_base_kva: 100.0,
            voltage_bases: vec![
                VoltageBase {
                    zone: "11".into(),
                    kv_ll: 20.0,
                },
                VoltageBase {
                    zone: "100".into(),
                    kv_ll: 0.4,
                },
            ],
        },
        buses,
        lines,
        transformers,
        generators,
        loads,
        fault_scenarios,
    )
    .expect("bundled fixture is valid")
}

/// The bundled benchmark network, in per-unit.
pub fn build_cigre_lv_fixture() -> Network {
    to_per_unit(&cigre_lv_physical()).expect("bundled fixture converts to per-unit")
}
