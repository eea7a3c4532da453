//! Fault-current-constrained OPF: the operating network and one faulted copy per
//! scenario in a single program, coupled through the dispatch variables and the
//! operating-point terminal voltages of the dispatchable units.

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::Network;
use crate::nlp::{solve_nlp, Family, NlpProblem, QuadExpr, SolveDiagnostics, SolverOptions};
use crate::opf::{add_block, cost_expr, extract_dispatch, extract_state, BlockKind, BlockVars, DispatchVars};
use crate::phasor::{NodeIndex, C64};
use crate::powerflow::{run_power_flow, Dispatch, PhasorState};
use crate::shortcircuit::{max_dg_study, run_fault_study, FaultCurrent};

/// Weights of the cost and fault-current terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub cost: f64,
    pub fault: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights { cost: 1.0, fault: 1.0 }
    }
}

/// Denominators that bring both objective terms to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveScaling {
    /// Cost with every unit at capacity (currency per hour).
    pub cost_max: f64,
    /// Sum of squared fault-current magnitudes at full dispatch (pu^2).
    pub fault_max: f64,
    /// Sum of headline fault currents at full dispatch (A), for reporting.
    pub fault_max_amps: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FcopfOptions {
    pub weights: Weights,
    /// Optional upper bound on every fault-current magnitude (A).
    pub hard_cap_amps: Option<f64>,
    pub solver: SolverOptions,
}

/// The coupled program and its layout.
#[derive(Debug, Clone)]
pub struct MultiNetworkProblem {
    pub nlp: NlpProblem,
    pub nodes: NodeIndex,
    /// Block 0 (operating network).
    pub operating: BlockVars,
    /// One block per fault scenario.
    pub fault_blocks: Vec<BlockVars>,
    pub dispatch: DispatchVars,
    pub weights: Weights,
    pub scaling: ObjectiveScaling,
    pub cost: QuadExpr,
    /// Sum of squared fault-current magnitudes over all blocks (pu^2).
    pub fault_term: QuadExpr,
}

impl MultiNetworkProblem {
    /// Variables of block 0 that fault blocks read: dispatch and the terminal
    /// voltages of dispatchable units.
    pub fn shared_variables(&self, net: &Network) -> Vec<usize> {
        let mut out = Vec::new();
        for (g, gen) in net.dispatchable_generators() {
            let b = net.bus_index(&gen.bus).unwrap();
            out.extend(&self.dispatch.p[g]);
            out.extend(&self.dispatch.q[g]);
            for node in self.nodes.bus_nodes(b) {
                out.extend(self.operating.v[node]);
            }
        }
        out
    }
}

/// Cost at full dispatch and the fault-current total of the full-dispatch study.
pub fn compute_objective_scaling(net: &Network) -> Result<ObjectiveScaling> {
    let mut cost_max = 0.0;
    for (_, gen) in net.dispatchable_generators() {
        let b = net.bus_index(&gen.bus).unwrap();
        cost_max += gen.cost_per_kwh * gen.pmax.iter().sum::<f64>() * net.bases(b).s_phase_kva;
    }
    let (_, study) = max_dg_study(net)?;
    Ok(ObjectiveScaling {
        cost_max,
        fault_max: study.squared_sum_pu(),
        fault_max_amps: study.total_amps(),
    })
}

pub fn build_fcopf(net: &Network, weights: Weights) -> Result<MultiNetworkProblem> {
    build_fcopf_with(net, &FcopfOptions { weights, ..Default::default() })
}

pub fn build_fcopf_with(net: &Network, opts: &FcopfOptions) -> Result<MultiNetworkProblem> {
    if net.fault_scenarios.is_empty() {
        return Err(Error::invalid("fault_scenarios", "at least one fault scenario is required"));
    }
    if net.reference_generators().next().is_none() {
        return Err(Error::invalid("generators", "at least one reference source is required"));
    }
    let scaling = compute_objective_scaling(net)?;
    let d0 = Dispatch::zero(net);
    let op = run_power_flow(net, &d0)?;
    let seed = run_fault_study(net, &op)?;

    let mut nlp = NlpProblem::new();
    let (operating, dispatch) = add_block(&mut nlp, net, "n0", BlockKind::Operating, &op.v, &d0, &op.v)?;
    let dispatch = dispatch.expect("operating block");
    let mut fault_blocks = Vec::with_capacity(net.fault_scenarios.len());
    for (s, scenario) in net.fault_scenarios.iter().enumerate() {
        let kind = BlockKind::Fault {
            scenario,
            shared_v: &operating.v,
            dispatch: &dispatch,
        };
        let tag = format!("n{}", s + 1);
        let (block, _) = add_block(&mut nlp, net, &tag, kind, &seed.scenarios[s].voltages, &d0, &op.v)?;
        fault_blocks.push(block);
    }

    let nodes = op.nodes.clone();
    let mut fault_term = QuadExpr::new();
    for (s, block) in fault_blocks.iter().enumerate() {
        for (f, fault) in net.fault_scenarios[s].iter().enumerate() {
            let b = net.bus_index(&fault.bus).unwrap();
            let i_base = net.bases(b).i_amp;
            for (k, &var) in block.fault_sq[f].iter().enumerate() {
                fault_term.add_lin(var, 1.0);
                if let Some(cap) = opts.hard_cap_amps {
                    let c = cap / i_base;
                    nlp.add_le(
                        Family::FaultCap,
                        format!("{}/fault {}/{}", block.tag, fault.id, fault.phases[k]),
                        QuadExpr::new().lin(var, 1.0).constant(-c * c),
                    );
                }
            }
        }
    }

    let cost = cost_expr(net, &operating, &dispatch);
    let mut objective = QuadExpr::new();
    if scaling.cost_max > 0.0 {
        objective = objective + cost.clone() * (opts.weights.cost / scaling.cost_max);
    } else {
        warn!("no dispatchable capacity; the cost term is dropped from the objective");
    }
    objective = objective + fault_term.clone() * (opts.weights.fault / scaling.fault_max);
    nlp.objective = objective;

    Ok(MultiNetworkProblem {
        nlp,
        nodes,
        operating,
        fault_blocks,
        dispatch,
        weights: opts.weights,
        scaling,
        cost,
        fault_term,
    })
}

/// Fault currents of one block as read from the solution vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFaults {
    pub scenario: usize,
    pub faults: Vec<FaultCurrent>,
}

#[derive(Debug, Clone)]
pub struct FcopfSolution {
    pub state: PhasorState,
    pub dispatch: Dispatch,
    pub cost: f64,
    /// Sum of squared fault currents (pu^2).
    pub fault_term: f64,
    /// `w_cost * cost / cost_max + w_fault * fault_term / fault_max`.
    pub objective: f64,
    pub scaling: ObjectiveScaling,
    pub weights: Weights,
    pub scenarios: Vec<ScenarioFaults>,
    pub diagnostics: SolveDiagnostics,
    pub x: Vec<f64>,
}

impl FcopfSolution {
    /// Phase-A current (A) of the first fault of every scenario.
    pub fn headline_amps(&self) -> Vec<f64> {
        self.scenarios
            .iter()
            .map(|s| {
                let f = &s.faults[0];
                let k = f.phases.iter().position(|&p| p == crate::netmodel::Phase::A).unwrap_or(0);
                f.current_a[k]
            })
            .collect()
    }
}

pub fn solve_fcopf(net: &Network, weights: Weights) -> Result<FcopfSolution> {
    solve_fcopf_with(net, &FcopfOptions { weights, ..Default::default() })
}

pub fn solve_fcopf_with(net: &Network, opts: &FcopfOptions) -> Result<FcopfSolution> {
    let problem = build_fcopf_with(net, opts)?;
    info!(
        "fcopf: {} networks, {} variables, {} equalities, {} inequalities",
        problem.fault_blocks.len() + 1,
        problem.nlp.num_vars(),
        problem.nlp.equalities.len(),
        problem.nlp.inequalities.len()
    );
    let sol = solve_nlp(&problem.nlp, &opts.solver);
    let x = sol.x;
    let scenarios = problem
        .fault_blocks
        .iter()
        .enumerate()
        .map(|(s, block)| ScenarioFaults {
            scenario: s,
            faults: net.fault_scenarios[s]
                .iter()
                .enumerate()
                .map(|(f, fault)| {
                    let b = net.bus_index(&fault.bus).unwrap();
                    let i_base = net.bases(b).i_amp;
                    let current_pu: Vec<C64> = block.fault_i[f].iter().map(|v| C64::new(x[v[0]], x[v[1]])).collect();
                    FaultCurrent {
                        fault_id: fault.id.clone(),
                        bus: fault.bus.clone(),
                        phases: fault.phases.clone(),
                        current_a: current_pu.iter().map(|i| i.norm() * i_base).collect(),
                        current_pu,
                    }
                })
                .collect(),
        })
        .collect();
    Ok(FcopfSolution {
        state: extract_state(net, &problem.nodes, &problem.operating, &x),
        dispatch: extract_dispatch(net, &problem.dispatch, &x),
        cost: problem.cost.eval(&x),
        fault_term: problem.fault_term.eval(&x),
        objective: problem.nlp.objective.eval(&x),
        scaling: problem.scaling,
        weights: opts.weights,
        scenarios,
        diagnostics: sol.diagnostics,
        x,
    })
}

/// Scaled objective of a fixed dispatch, evaluated with a power flow and a fault
/// study. Lets callers compare an FC-OPF optimum against any other dispatch.
pub fn scaled_objective_at(net: &Network, dispatch: &Dispatch, weights: Weights, scaling: &ObjectiveScaling) -> Result<f64> {
    let op = run_power_flow(net, dispatch)?;
    let study = run_fault_study(net, &op)?;
    let mut cost = 0.0;
    for (g, gen) in net.generators.iter().enumerate() {
        let b = net.bus_index(&gen.bus).unwrap();
        let p: f64 = if gen.is_reference() {
            op.generator_power[g].iter().map(|s| s.re).sum()
        } else {
            dispatch.p[g].iter().sum()
        };
        cost += gen.cost_per_kwh * p * net.bases(b).s_phase_kva;
    }
    let mut obj = weights.fault * study.squared_sum_pu() / scaling.fault_max;
    if scaling.cost_max > 0.0 {
        obj += weights.cost * cost / scaling.cost_max;
    }
    Ok(obj)
}
