//! Fixed-dispatch short-circuit studies.
//!
//! Every source is a voltage behind an impedance. Reference sources use their
//! short-circuit impedance and set-point voltage; dispatchable units keep their
//! pre-fault terminal voltage as internal EMF behind an admittance sized so that a
//! bolted terminal fault draws `kf` times the operating current.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{FaultSpec, Generator, Network, Phase};
use crate::phasor::{
    assemble_admittance, build_fault_admittance, invert, reference_emf, reference_fault_impedance,
    solve_dense, C64, ZERO,
};
use crate::powerflow::{run_power_flow, Dispatch, PhasorState};

/// Voltage-behind-admittance model of a dispatchable unit, per bus phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorScModel {
    pub emf: Vec<C64>,
    pub admittance: Vec<C64>,
}

impl GeneratorScModel {
    /// Internal impedance of phase `k`; `None` when the phase is unenergised.
    pub fn impedance(&self, k: usize) -> Option<C64> {
        let y = self.admittance[k];
        (y != ZERO).then(|| y.inv())
    }

    /// Current delivered for terminal voltage `v`.
    pub fn current(&self, k: usize, v: C64) -> C64 {
        self.admittance[k] * (self.emf[k] - v)
    }
}

/// Fault model of a dispatchable unit at an operating point: `E = V`,
/// `y = kf * conj(S) / |V|^2`, so `|y E| = kf |S| / |V|`.
pub fn generator_sc_model(gen: &Generator, v: &[C64], s: &[C64]) -> GeneratorScModel {
    let admittance = v
        .iter()
        .zip(s)
        .map(|(v, s)| {
            let m = v.norm_sqr();
            if *s == ZERO || m == 0.0 {
                ZERO
            } else {
                s.conj() * gen.kf / m
            }
        })
        .collect();
    GeneratorScModel {
        emf: v.to_vec(),
        admittance,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultCurrent {
    pub fault_id: String,
    pub bus: String,
    pub phases: Vec<Phase>,
    pub current_pu: Vec<C64>,
    pub current_a: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: usize,
    pub faults: Vec<FaultCurrent>,
    /// Faulted node voltages, indexed like the network nodes.
    pub voltages: Vec<C64>,
    /// Current delivered by each generator per bus phase.
    pub generator_currents: Vec<Vec<C64>>,
    pub residual: f64,
}

impl ScenarioResult {
    /// Magnitude (A) of the first fault's current on phase A, or on its first
    /// phase when A is not involved.
    pub fn headline_amps(&self) -> f64 {
        let f = &self.faults[0];
        let k = f.phases.iter().position(|&p| p == Phase::A).unwrap_or(0);
        f.current_a[k]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultStudyResult {
    pub scenarios: Vec<ScenarioResult>,
    /// Generator fault models used, per generator (empty for reference sources).
    pub generator_models: Vec<Option<GeneratorScModel>>,
}

impl FaultStudyResult {
    pub fn headline_amps(&self) -> Vec<f64> {
        self.scenarios.iter().map(|s| s.headline_amps()).collect()
    }

    pub fn total_amps(&self) -> f64 {
        self.headline_amps().iter().sum()
    }

    /// Sum of squared fault current magnitudes over every fault and phase (pu^2).
    pub fn squared_sum_pu(&self) -> f64 {
        self.scenarios
            .iter()
            .flat_map(|s| &s.faults)
            .flat_map(|f| &f.current_pu)
            .map(|i| i.norm_sqr())
            .sum()
    }
}

/// Fault models of every dispatchable generator at the operating point.
pub fn generator_models(net: &Network, op: &PhasorState) -> Vec<Option<GeneratorScModel>> {
    net.generators
        .iter()
        .enumerate()
        .map(|(g, gen)| {
            if gen.is_reference() {
                return None;
            }
            let b = net.bus_index(&gen.bus).unwrap();
            Some(generator_sc_model(gen, op.bus_voltages(b), &op.generator_power[g]))
        })
        .collect()
}

/// Solves one fault scenario at the operating point `op`.
pub fn solve_short_circuit(
    net: &Network,
    op: &PhasorState,
    scenario: &[FaultSpec],
) -> Result<ScenarioResult> {
    solve_with_models(net, &generator_models(net, op), scenario, 0)
}

fn solve_with_models(
    net: &Network,
    models: &[Option<GeneratorScModel>],
    scenario: &[FaultSpec],
    index: usize,
) -> Result<ScenarioResult> {
    let mut y = assemble_admittance(net, Some(scenario))?;
    let nodes = y.nodes.clone();
    let mut j = vec![ZERO; nodes.len()];
    let mut source_z = Vec::new();
    for (g, gen) in net.generators.iter().enumerate() {
        let b = net.bus_index(&gen.bus).unwrap();
        let bn: Vec<usize> = nodes.bus_nodes(b).collect();
        if gen.is_reference() {
            let e = reference_emf(net, gen);
            let z = reference_fault_impedance(net, gen)?.ok_or_else(|| {
                Error::invalid(
                    format!("generator `{}`", gen.id),
                    "an ideal source cannot feed a fault; give sc3_mva or an internal impedance",
                )
            })?;
            let ys = invert(&z, &gen.id)?;
            for (a, &i) in bn.iter().enumerate() {
                for (c, _) in bn.iter().enumerate() {
                    j[i] += ys[(a, c)] * e[c];
                }
            }
            source_z.push(Some((ys, e)));
        } else {
            let m = models[g].as_ref().expect("model per dispatchable generator");
            for (k, &i) in bn.iter().enumerate() {
                y.add(i, i, m.admittance[k]);
                j[i] += m.admittance[k] * m.emf[k];
            }
            source_z.push(None);
        }
    }
    let context = format!("fault scenario {index}");
    let v = solve_dense(y.to_dense(), &j, &context)?;
    let yv = y.mul(&v);
    let residual = yv
        .iter()
        .zip(&j)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);

    let mut faults = Vec::new();
    for fault in scenario {
        let b = net.bus_index(&fault.bus).unwrap();
        let fa = build_fault_admittance(fault, net.fault_resistance_floor(b))?;
        let vf: Vec<C64> = fault
            .phases
            .iter()
            .map(|&p| v[nodes.node(b, p).unwrap()])
            .collect();
        let current_pu = fa.currents(&vf);
        let i_base = net.bases(b).i_amp;
        faults.push(FaultCurrent {
            fault_id: fault.id.clone(),
            bus: fault.bus.clone(),
            phases: fault.phases.clone(),
            current_a: current_pu.iter().map(|i| i.norm() * i_base).collect(),
            current_pu,
        });
    }

    let generator_currents = net
        .generators
        .iter()
        .enumerate()
        .map(|(g, gen)| {
            let b = net.bus_index(&gen.bus).unwrap();
            let vb: Vec<C64> = nodes.bus_nodes(b).map(|i| v[i]).collect();
            match (&source_z[g], &models[g]) {
                (Some((ys, e)), _) => (0..vb.len())
                    .map(|a| (0..vb.len()).map(|c| ys[(a, c)] * (e[c] - vb[c])).sum())
                    .collect(),
                (None, Some(m)) => (0..vb.len()).map(|k| m.current(k, vb[k])).collect(),
                (None, None) => vec![ZERO; vb.len()],
            }
        })
        .collect();

    Ok(ScenarioResult {
        scenario: index,
        faults,
        voltages: v,
        generator_currents,
        residual,
    })
}

/// Solves every fault scenario of the network at the operating point `op`.
pub fn run_fault_study(net: &Network, op: &PhasorState) -> Result<FaultStudyResult> {
    let models = generator_models(net, op);
    let scenarios = net
        .fault_scenarios
        .iter()
        .enumerate()
        .map(|(i, s)| solve_with_models(net, &models, s, i))
        .collect::<Result<_>>()?;
    Ok(FaultStudyResult {
        scenarios,
        generator_models: models,
    })
}

/// Fault study at a given dispatch, operating point from a power flow.
pub fn fault_study_at(net: &Network, dispatch: &Dispatch) -> Result<(PhasorState, FaultStudyResult)> {
    let op = run_power_flow(net, dispatch)?;
    let study = run_fault_study(net, &op)?;
    Ok((op, study))
}

/// Lower boundary: the substation is the only source.
pub fn no_dg_study(net: &Network) -> Result<(PhasorState, FaultStudyResult)> {
    fault_study_at(net, &Dispatch::zero(net))
}

/// Upper boundary: every unit at its active power limit.
pub fn max_dg_study(net: &Network) -> Result<(PhasorState, FaultStudyResult)> {
    fault_study_at(net, &Dispatch::at_pmax(net))
}
