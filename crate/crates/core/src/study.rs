//! Study results in report form: dispatch, bus voltages and fault currents, with
//! JSON and CSV output.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fcopf::{solve_fcopf_with, FcopfOptions, ObjectiveScaling, Weights};
use crate::netmodel::{Network, Phase};
use crate::nlp::{SolveDiagnostics, SolveStatus};
use crate::opf::{solve_opf_with, OpfOptions};
use crate::powerflow::{run_power_flow_with, Dispatch, PhasorState, PowerFlowOptions};
use crate::shortcircuit::{run_fault_study, FaultCurrent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StudyKind {
    PowerFlow,
    ShortCircuit,
    Opf,
    Fcopf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchRow {
    pub generator: String,
    pub bus: String,
    pub reference: bool,
    pub phases: Vec<Phase>,
    pub p_kw: Vec<f64>,
    pub q_kvar: Vec<f64>,
    pub total_kw: f64,
    pub total_kvar: f64,
    /// Currency per hour.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageRow {
    pub bus: String,
    pub phases: Vec<Phase>,
    pub magnitude_pu: Vec<f64>,
    pub angle_deg: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultRow {
    pub scenario: usize,
    pub fault_id: String,
    pub bus: String,
    pub phases: Vec<Phase>,
    pub current_pu: Vec<f64>,
    pub current_a: Vec<f64>,
    /// Phase-A current (or the first faulted phase), as tabulated.
    pub headline_a: f64,
}

impl FaultRow {
    fn new(scenario: usize, f: &FaultCurrent) -> Self {
        let k = f.phases.iter().position(|&p| p == Phase::A).unwrap_or(0);
        FaultRow {
            scenario,
            fault_id: f.fault_id.clone(),
            bus: f.bus.clone(),
            phases: f.phases.clone(),
            current_pu: f.current_pu.iter().map(|i| i.norm()).collect(),
            current_a: f.current_a.clone(),
            headline_a: f.current_a[k],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    /// Generation cost (currency per hour).
    pub cost: f64,
    /// Sum of squared fault-current magnitudes (pu^2), FC-OPF only.
    pub fault_term_pu2: Option<f64>,
    pub weights: Option<Weights>,
    pub scaling: Option<ObjectiveScaling>,
    /// Value of the minimised objective.
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyDiagnostics {
    /// `Converged`, or the optimiser status.
    pub status: String,
    pub iterations: usize,
    pub residual: f64,
    pub solver: Option<SolveDiagnostics>,
}

impl StudyDiagnostics {
    pub fn succeeded(&self) -> bool {
        self.status == "Converged" || self.status == "Optimal"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub kind: StudyKind,
    pub network: String,
    /// Every bus id of the network, for compatibility checks.
    pub buses: Vec<String>,
    pub dispatch: Vec<DispatchRow>,
    pub dispatch_total_kw: f64,
    pub total_cost: f64,
    pub voltages: Vec<VoltageRow>,
    pub faults: Vec<FaultRow>,
    pub fault_total_a: f64,
    pub objective: ObjectiveBreakdown,
    pub diagnostics: StudyDiagnostics,
}

/// Flags shared by the four studies.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StudyOptions {
    /// Keep every dispatchable unit off.
    pub no_dg: bool,
    pub weights: Weights,
    pub hard_cap_amps: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

impl StudyOptions {
    fn pf(&self) -> PowerFlowOptions {
        let mut o = PowerFlowOptions::default();
        if let Some(t) = self.tol {
            o.tol = t;
        }
        if let Some(m) = self.max_iter {
            o.max_iter = m;
        }
        o
    }

    fn solver(&self) -> crate::nlp::SolverOptions {
        let mut o = crate::nlp::SolverOptions::default();
        if let Some(t) = self.tol {
            o.feas_tol = t;
            o.grad_tol = t;
            o.comp_tol = t;
        }
        if let Some(m) = self.max_iter {
            o.max_iter = m;
        }
        o
    }

    /// Operating dispatch for the fixed-dispatch studies.
    fn fixed_dispatch(&self, net: &Network) -> Dispatch {
        if self.no_dg {
            Dispatch::zero(net)
        } else {
            Dispatch::at_pmax(net)
        }
    }
}

fn dispatch_rows(net: &Network, d: &Dispatch, state: &PhasorState) -> Vec<DispatchRow> {
    net.generators
        .iter()
        .enumerate()
        .map(|(g, gen)| {
            let b = net.bus_index(&gen.bus).unwrap();
            let s = net.bases(b).s_phase_kva;
            let (p, q): (Vec<f64>, Vec<f64>) = if gen.is_reference() {
                state.generator_power[g].iter().map(|x| (x.re * s, x.im * s)).unzip()
            } else {
                (d.p[g].iter().map(|x| x * s).collect(), d.q[g].iter().map(|x| x * s).collect())
            };
            let total_kw: f64 = p.iter().sum();
            DispatchRow {
                generator: gen.id.clone(),
                bus: gen.bus.clone(),
                reference: gen.is_reference(),
                phases: net.buses[b].phases.clone(),
                total_kvar: q.iter().sum(),
                cost: gen.cost_per_kwh * total_kw,
                p_kw: p,
                q_kvar: q,
                total_kw,
            }
        })
        .collect()
}

fn voltage_rows(net: &Network, state: &PhasorState) -> Vec<VoltageRow> {
    let mut rows: Vec<VoltageRow> = net
        .buses
        .iter()
        .enumerate()
        .map(|(b, bus)| {
            let v = state.bus_voltages(b);
            VoltageRow {
                bus: bus.id.clone(),
                phases: bus.phases.clone(),
                magnitude_pu: v.iter().map(|x| x.norm()).collect(),
                angle_deg: v.iter().map(|x| x.arg().to_degrees()).collect(),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.bus.cmp(&b.bus));
    rows
}

fn assemble(
    kind: StudyKind,
    net: &Network,
    d: &Dispatch,
    state: &PhasorState,
    faults: Vec<FaultRow>,
    objective: ObjectiveBreakdown,
    diagnostics: StudyDiagnostics,
) -> StudyResult {
    let dispatch = dispatch_rows(net, d, state);
    let mut buses: Vec<String> = net.buses.iter().map(|b| b.id.clone()).collect();
    buses.sort();
    StudyResult {
        kind,
        network: net.name.clone(),
        buses,
        dispatch_total_kw: dispatch.iter().filter(|r| !r.reference).map(|r| r.total_kw).sum(),
        total_cost: dispatch.iter().map(|r| r.cost).sum(),
        dispatch,
        voltages: voltage_rows(net, state),
        fault_total_a: faults.iter().map(|f| f.headline_a).sum(),
        faults,
        objective,
        diagnostics,
    }
}

fn plain_objective(cost: f64) -> ObjectiveBreakdown {
    ObjectiveBreakdown {
        cost,
        fault_term_pu2: None,
        weights: None,
        scaling: None,
        total: cost,
    }
}

fn pf_state(net: &Network, d: &Dispatch, opts: &StudyOptions) -> Result<(PhasorState, StudyDiagnostics)> {
    let sol = run_power_flow_with(net, d, &opts.pf())?;
    let diag = StudyDiagnostics {
        status: "Converged".into(),
        iterations: sol.iterations,
        residual: sol.residual,
        solver: None,
    };
    Ok((sol.state, diag))
}

fn cost_of(net: &Network, d: &Dispatch, state: &PhasorState) -> f64 {
    dispatch_rows(net, d, state).iter().map(|r| r.cost).sum()
}

pub fn study_power_flow(net: &Network, opts: &StudyOptions) -> Result<StudyResult> {
    let d = opts.fixed_dispatch(net);
    let (state, diag) = pf_state(net, &d, opts)?;
    let cost = cost_of(net, &d, &state);
    Ok(assemble(StudyKind::PowerFlow, net, &d, &state, Vec::new(), plain_objective(cost), diag))
}

fn fault_rows(net: &Network, state: &PhasorState) -> Result<Vec<FaultRow>> {
    let study = run_fault_study(net, state)?;
    Ok(study
        .scenarios
        .iter()
        .flat_map(|s| s.faults.iter().map(move |f| FaultRow::new(s.scenario, f)))
        .collect())
}

pub fn study_short_circuit(net: &Network, opts: &StudyOptions) -> Result<StudyResult> {
    let d = opts.fixed_dispatch(net);
    let (state, diag) = pf_state(net, &d, opts)?;
    let faults = fault_rows(net, &state)?;
    let cost = cost_of(net, &d, &state);
    Ok(assemble(StudyKind::ShortCircuit, net, &d, &state, faults, plain_objective(cost), diag))
}

fn solver_diag(d: SolveDiagnostics) -> StudyDiagnostics {
    StudyDiagnostics {
        status: format!("{:?}", d.status),
        iterations: d.iterations,
        residual: d.primal_feasibility,
        solver: Some(d),
    }
}

/// Minimum-cost dispatch; fault currents are those of a fault study at that
/// dispatch (empty when the network declares no scenario or the solve failed).
pub fn study_opf(net: &Network, opts: &StudyOptions) -> Result<StudyResult> {
    let net = if opts.no_dg { net.without_dispatchable() } else { net.clone() };
    let sol = solve_opf_with(&net, &OpfOptions { solver: opts.solver() })?;
    let faults = if sol.diagnostics.status == SolveStatus::Optimal && !net.fault_scenarios.is_empty() {
        fault_rows(&net, &sol.state)?
    } else {
        Vec::new()
    };
    let obj = plain_objective(sol.cost);
    Ok(assemble(StudyKind::Opf, &net, &sol.dispatch, &sol.state, faults, obj, solver_diag(sol.diagnostics)))
}

pub fn study_fcopf(net: &Network, opts: &StudyOptions) -> Result<StudyResult> {
    let net = if opts.no_dg { net.without_dispatchable() } else { net.clone() };
    let fo = FcopfOptions {
        weights: opts.weights,
        hard_cap_amps: opts.hard_cap_amps,
        solver: opts.solver(),
    };
    let sol = solve_fcopf_with(&net, &fo)?;
    let faults = sol
        .scenarios
        .iter()
        .flat_map(|s| s.faults.iter().map(move |f| FaultRow::new(s.scenario, f)))
        .collect();
    let obj = ObjectiveBreakdown {
        cost: sol.cost,
        fault_term_pu2: Some(sol.fault_term),
        weights: Some(sol.weights),
        scaling: Some(sol.scaling),
        total: sol.objective,
    };
    Ok(assemble(StudyKind::Fcopf, &net, &sol.dispatch, &sol.state, faults, obj, solver_diag(sol.diagnostics)))
}

pub fn run_study(kind: StudyKind, net: &Network, opts: &StudyOptions) -> Result<StudyResult> {
    match kind {
        StudyKind::PowerFlow => study_power_flow(net, opts),
        StudyKind::ShortCircuit => study_short_circuit(net, opts),
        StudyKind::Opf => study_opf(net, opts),
        StudyKind::Fcopf => study_fcopf(net, opts),
    }
}

impl StudyResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Writes `dispatch.csv`, `voltages.csv` and `faults.csv` into `dir`, one row per
    /// phase.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut w = csv::Writer::from_path(dir.join("dispatch.csv"))?;
        w.write_record(["generator", "bus", "phase", "p_kw", "q_kvar", "cost"])?;
        for r in &self.dispatch {
            for (k, ph) in r.phases.iter().enumerate() {
                let cost = r.cost * if r.total_kw != 0.0 { r.p_kw[k] / r.total_kw } else { 0.0 };
                w.write_record([
                    r.generator.clone(),
                    r.bus.clone(),
                    ph.to_string(),
                    r.p_kw[k].to_string(),
                    r.q_kvar[k].to_string(),
                    cost.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|source| Error::Io { path: dir.join("dispatch.csv"), source })?;

        let mut w = csv::Writer::from_path(dir.join("voltages.csv"))?;
        w.write_record(["bus", "phase", "magnitude_pu", "angle_deg"])?;
        for r in &self.voltages {
            for (k, ph) in r.phases.iter().enumerate() {
                w.write_record([
                    r.bus.clone(),
                    ph.to_string(),
                    r.magnitude_pu[k].to_string(),
                    r.angle_deg[k].to_string(),
                ])?;
            }
        }
        w.flush().map_err(|source| Error::Io { path: dir.join("voltages.csv"), source })?;

        let mut w = csv::Writer::from_path(dir.join("faults.csv"))?;
        w.write_record(["scenario", "fault", "bus", "phase", "current_pu", "current_a"])?;
        for r in &self.faults {
            for (k, ph) in r.phases.iter().enumerate() {
                w.write_record([
                    r.scenario.to_string(),
                    r.fault_id.clone(),
                    r.bus.clone(),
                    ph.to_string(),
                    r.current_pu[k].to_string(),
                    r.current_a[k].to_string(),
                ])?;
            }
        }
        w.flush().map_err(|source| Error::Io { path: dir.join("faults.csv"), source })?;
        Ok(())
    }

    /// Human-readable tables.
    pub fn render(&self) -> String {
        let mut s = format!("{:?} study of `{}`: {}\n", self.kind, self.network, self.diagnostics.status);
        s.push_str("\nGenerator        Bus      P (kW)    Q (kvar)  Cost\n");
        for r in &self.dispatch {
            s.push_str(&format!(
                "{:<16} {:<8} {:>8.3} {:>10.3} {:>7.3}\n",
                r.generator, r.bus, r.total_kw, r.total_kvar, r.cost
            ));
        }
        s.push_str(&format!("Total cost {:.3}\n", self.total_cost));
        s.push_str("\nBus      |V| (pu) by phase          angle (deg) by phase\n");
        for r in &self.voltages {
            let m: Vec<String> = r.magnitude_pu.iter().map(|x| format!("{x:.4}")).collect();
            let a: Vec<String> = r.angle_deg.iter().map(|x| format!("{x:8.2}")).collect();
            s.push_str(&format!("{:<8} {:<26} {}\n", r.bus, m.join(" "), a.join(" ")));
        }
        if !self.faults.is_empty() {
            s.push_str("\nFault    Bus      Current (A) by phase\n");
            for r in &self.faults {
                let c: Vec<String> = r.current_a.iter().map(|x| format!("{x:9.1}")).collect();
                s.push_str(&format!("{:<8} {:<8} {}\n", r.fault_id, r.bus, c.join(" ")));
            }
            s.push_str(&format!("Total (phase A) {:.1} A\n", self.fault_total_a));
        }
        s
    }
}
