//! Optimal power flow in rectangular current-voltage form.
//!
//! Every network copy ("block") gets its own voltage and branch-current variables.
//! Block 0 is the operating network and carries the dispatch variables, the
//! operating limits and the cost; fault blocks are added by [`crate::fcopf`] on top
//! of the same builder.

use log::info;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{FaultSpec, LoadModel, Network};
use crate::nlp::{solve_nlp, Family, NlpProblem, QuadExpr, SolveDiagnostics, SolverOptions};
use crate::phasor::{
    build_fault_admittance, invert, line_impedance, load_admittance, reference_emf,
    reference_fault_impedance, transformer_stamp, NodeIndex, C64, ZERO,
};
use crate::powerflow::{run_power_flow, Dispatch, PhasorState};

/// Relative spread allowed between the phases of a multi-phase generator.
pub const PHASE_BALANCE_TOLERANCE: f64 = 0.05;

/// Index pair of the real and imaginary part of a complex variable.
pub type CVar = [usize; 2];

/// Variable layout of one network copy.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVars {
    pub tag: String,
    /// Per node, indexed by [`NodeIndex`].
    pub v: Vec<CVar>,
    /// Per line phase, from `from` towards `to`.
    pub line_i: Vec<Vec<CVar>>,
    /// Secondary current per transformer phase, flowing into `to`.
    pub tr_secondary: Vec<Vec<CVar>>,
    /// Primary current per transformer phase, flowing out of `from`.
    pub tr_primary: Vec<Vec<CVar>>,
    /// Current injected by each generator per bus phase.
    pub gen_i: Vec<Vec<CVar>>,
    /// Current drawn by constant-power loads (operating block only).
    pub load_i: Vec<Vec<CVar>>,
    /// Per fault of the scenario and faulted phase (fault blocks only).
    pub fault_i: Vec<Vec<CVar>>,
    /// Squared fault-current magnitude per fault and phase (fault blocks only).
    pub fault_sq: Vec<Vec<usize>>,
}

/// Dispatch variables, per generator and bus phase; empty for reference sources.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchVars {
    pub p: Vec<Vec<usize>>,
    pub q: Vec<Vec<usize>>,
}

/// Assembled OPF program with its variable layout.
#[derive(Debug, Clone)]
pub struct OpfProblem {
    pub nlp: NlpProblem,
    pub nodes: NodeIndex,
    pub operating: BlockVars,
    pub dispatch: DispatchVars,
    /// Generation cost as a function of the variables (currency per hour).
    pub cost: QuadExpr,
}

#[derive(Debug, Clone)]
pub struct OpfSolution {
    pub state: PhasorState,
    pub dispatch: Dispatch,
    /// Generation cost (currency per hour).
    pub cost: f64,
    pub diagnostics: SolveDiagnostics,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OpfOptions {
    pub solver: SolverOptions,
}

fn cvar(p: &mut NlpProblem, name: &str, x0: C64) -> CVar {
    [
        p.free_var(format!("{name}.re"), x0.re),
        p.free_var(format!("{name}.im"), x0.im),
    ]
}

/// Complex linear combination kept as a pair of real expressions.
#[derive(Debug, Clone, Default)]
struct CExpr {
    re: QuadExpr,
    im: QuadExpr,
}

impl CExpr {
    /// Adds `c * x`.
    fn add(&mut self, c: C64, x: CVar) {
        self.re.add_lin(x[0], c.re);
        self.re.add_lin(x[1], -c.im);
        self.im.add_lin(x[0], c.im);
        self.im.add_lin(x[1], c.re);
    }

    fn add_const(&mut self, c: C64) {
        self.re.constant += c.re;
        self.im.constant += c.im;
    }

    /// Adds `y * (a - b)` for complex variables `y`, `a` and `b`.
    fn add_product_diff(&mut self, y: CVar, a: CVar, b: CVar) {
        let [yr, yi] = y;
        self.re.add_quad(yr, a[0], 1.0);
        self.re.add_quad(yr, b[0], -1.0);
        self.re.add_quad(yi, a[1], -1.0);
        self.re.add_quad(yi, b[1], 1.0);
        self.im.add_quad(yr, a[1], 1.0);
        self.im.add_quad(yr, b[1], -1.0);
        self.im.add_quad(yi, a[0], 1.0);
        self.im.add_quad(yi, b[0], -1.0);
    }

    fn push_eq(self, p: &mut NlpProblem, family: Family, element: &str) {
        p.add_eq(family, format!("{element}.re"), self.re);
        p.add_eq(family, format!("{element}.im"), self.im);
    }
}

fn re_im_sq(x: CVar) -> QuadExpr {
    QuadExpr::new().quad(x[0], x[0], 1.0).quad(x[1], x[1], 1.0)
}

/// `Re(V conj(I))` and `Im(V conj(I))`.
fn complex_power(v: CVar, i: CVar) -> (QuadExpr, QuadExpr) {
    let p = QuadExpr::new().quad(v[0], i[0], 1.0).quad(v[1], i[1], 1.0);
    let q = QuadExpr::new().quad(v[1], i[0], 1.0).quad(v[0], i[1], -1.0);
    (p, q)
}

/// What a network copy represents.
pub(crate) enum BlockKind<'a> {
    Operating,
    Fault {
        scenario: &'a [FaultSpec],
        shared_v: &'a [CVar],
        dispatch: &'a DispatchVars,
    },
}

/// Adds one network copy to `p`. `v0` and `dispatch0` seed the initial point.
pub(crate) fn add_block(
    p: &mut NlpProblem,
    net: &Network,
    tag: &str,
    kind: BlockKind<'_>,
    v0: &[C64],
    dispatch0: &Dispatch,
    shared_v0: &[C64],
) -> Result<(BlockVars, Option<DispatchVars>)> {
    let nodes = NodeIndex::new(net);
    let operating = matches!(kind, BlockKind::Operating);
    let n = nodes.len();
    let bus = |id: &str| net.bus_index(id).expect("validated network");

    let v: Vec<CVar> = (0..n)
        .map(|i| cvar(p, &format!("{tag}.V.{}", nodes.label(i)), v0[i]))
        .collect();
    let mut kcl: Vec<CExpr> = vec![CExpr::default(); n];

    // lines: V_f - V_t - Z I = 0
    let mut line_i = Vec::with_capacity(net.lines.len());
    for (k, line) in net.lines.iter().enumerate() {
        let (f, t) = (bus(&line.from), bus(&line.to));
        let z = line_impedance(net, k);
        let yl = invert(&z, &format!("impedance of line `{}`", line.id))?;
        let fr: Vec<usize> = line.phases.iter().map(|&ph| nodes.node(f, ph).unwrap()).collect();
        let to: Vec<usize> = line.phases.iter().map(|&ph| nodes.node(t, ph).unwrap()).collect();
        let dv: Vec<C64> = fr.iter().zip(&to).map(|(&a, &b)| v0[a] - v0[b]).collect();
        let m = line.phases.len();
        let cur: Vec<CVar> = (0..m)
            .map(|a| {
                let i0: C64 = (0..m).map(|b| yl[(a, b)] * dv[b]).sum();
                cvar(p, &format!("{tag}.I.{}.{}", line.id, line.phases[a]), i0)
            })
            .collect();
        for a in 0..m {
            let mut e = CExpr::default();
            e.add(C64::new(1.0, 0.0), v[fr[a]]);
            e.add(C64::new(-1.0, 0.0), v[to[a]]);
            for b in 0..m {
                e.add(-z[(a, b)], cur[b]);
            }
            e.push_eq(p, Family::VoltageDrop, &format!("{tag}/line {}/{}", line.id, line.phases[a]));
            kcl[fr[a]].add(C64::new(-1.0, 0.0), cur[a]);
            kcl[to[a]].add(C64::new(1.0, 0.0), cur[a]);
        }
        line_i.push(cur);
    }

    // transformers: I_s = y (a V_f - V_t), I_p = conj(a) I_s
    let mut tr_secondary = Vec::with_capacity(net.transformers.len());
    let mut tr_primary = Vec::with_capacity(net.transformers.len());
    for (k, tr) in net.transformers.iter().enumerate() {
        let (f, t) = (bus(&tr.from), bus(&tr.to));
        let (a, y) = transformer_stamp(net, k);
        let mut sec = Vec::new();
        let mut pri = Vec::new();
        for &ph in &net.buses[f].phases {
            let (nf, nt) = (nodes.node(f, ph).unwrap(), nodes.node(t, ph).unwrap());
            let is0 = y * (a * v0[nf] - v0[nt]);
            let is = cvar(p, &format!("{tag}.Is.{}.{ph}", tr.id), is0);
            let ip = cvar(p, &format!("{tag}.Ip.{}.{ph}", tr.id), a.conj() * is0);
            let el = format!("{tag}/transformer {}/{ph}", tr.id);
            let mut e = CExpr::default();
            e.add(C64::new(1.0, 0.0), is);
            e.add(-y * a, v[nf]);
            e.add(y, v[nt]);
            e.push_eq(p, Family::TransformerVoltage, &el);
            let mut e = CExpr::default();
            e.add(C64::new(1.0, 0.0), ip);
            e.add(-a.conj(), is);
            e.push_eq(p, Family::TransformerCurrent, &el);
            kcl[nf].add(C64::new(-1.0, 0.0), ip);
            kcl[nt].add(C64::new(1.0, 0.0), is);
            sec.push(is);
            pri.push(ip);
        }
        tr_secondary.push(sec);
        tr_primary.push(pri);
    }

    // loads
    let mut load_i = Vec::with_capacity(net.loads.len());
    for load in &net.loads {
        let b = bus(&load.bus);
        let mut cur = Vec::new();
        for k in 0..load.p.len() {
            let node = nodes.node_at(b, k);
            let s = load.power(k);
            if operating && load.model == LoadModel::ConstantPower {
                let ph = net.buses[b].phases[k];
                let i = cvar(p, &format!("{tag}.IL.{}.{ph}", load.id), (s / v0[node]).conj());
                let (pe, qe) = complex_power(v[node], i);
                let el = format!("{tag}/load {}/{ph}", load.id);
                p.add_eq(Family::LoadPowerDef, format!("{el}.p"), pe.constant(-s.re));
                p.add_eq(Family::LoadPowerDef, format!("{el}.q"), qe.constant(-s.im));
                kcl[node].add(C64::new(-1.0, 0.0), i);
                cur.push(i);
            } else {
                kcl[node].add(-load_admittance(s), v[node]);
            }
        }
        load_i.push(cur);
    }

    // faults: I_f = G V and F = |I_f|^2
    let mut fault_i = Vec::new();
    let mut fault_sq = Vec::new();
    if let BlockKind::Fault { scenario, .. } = &kind {
        for fault in scenario.iter() {
            let b = net.bus_index(&fault.bus).ok_or_else(|| Error::DanglingReference {
                path: format!("fault `{}`", fault.id),
                kind: "bus",
                id: fault.bus.clone(),
            })?;
            let fa = build_fault_admittance(fault, net.fault_resistance_floor(b))?;
            let fnodes: Vec<usize> = fa
                .phases
                .iter()
                .map(|&ph| {
                    nodes.node(b, ph).ok_or_else(|| Error::PhaseMismatch {
                        path: format!("fault `{}`", fault.id),
                        message: format!("phase {ph} missing on bus `{}`", fault.bus),
                    })
                })
                .collect::<Result<_>>()?;
            let vf: Vec<C64> = fnodes.iter().map(|&i| v0[i]).collect();
            let i0 = fa.currents(&vf);
            let mut cur = Vec::new();
            let mut sq = Vec::new();
            for (a, &ph) in fa.phases.iter().enumerate() {
                let el = format!("{tag}/fault {}/{ph}", fault.id);
                let i = cvar(p, &format!("{tag}.If.{}.{ph}", fault.id), i0[a]);
                let mut e = CExpr::default();
                e.add(C64::new(1.0, 0.0), i);
                for (c, &node) in fnodes.iter().enumerate() {
                    e.add(C64::new(-fa.g[a][c], 0.0), v[node]);
                }
                e.push_eq(p, Family::FaultCurrent, &el);
                let f = p.add_var(format!("{tag}.F.{}.{ph}", fault.id), 0.0, f64::INFINITY, i0[a].norm_sqr());
                p.add_eq(Family::FaultMagnitude, &el, QuadExpr::new().lin(f, 1.0) + re_im_sq(i) * -1.0);
                kcl[fnodes[a]].add(C64::new(-1.0, 0.0), i);
                cur.push(i);
                sq.push(f);
            }
            fault_i.push(cur);
            fault_sq.push(sq);
        }
    }

    // generators
    let mut gen_i = Vec::with_capacity(net.generators.len());
    let mut dvars = DispatchVars {
        p: vec![Vec::new(); net.generators.len()],
        q: vec![Vec::new(); net.generators.len()],
    };
    let mut source_rows: Vec<(usize, CVar)> = Vec::new();
    for (g, gen) in net.generators.iter().enumerate() {
        let b = bus(&gen.bus);
        let bn: Vec<usize> = nodes.bus_nodes(b).collect();
        let phases = &net.buses[b].phases;
        let mut cur = Vec::with_capacity(bn.len());
        if gen.is_reference() {
            let e = reference_emf(net, gen);
            let z = if operating {
                let zi = gen.internal_impedance();
                (zi.norm() > 0.0).then(|| DMatrix::from_fn(bn.len(), bn.len(), |i, j| if i == j { zi } else { ZERO }))
            } else {
                Some(reference_fault_impedance(net, gen)?.ok_or_else(|| {
                    Error::invalid(
                        format!("generator `{}`", gen.id),
                        "an ideal source cannot feed a fault; give sc3_mva or an internal impedance",
                    )
                })?)
            };
            for (k, &node) in bn.iter().enumerate() {
                cur.push(cvar(p, &format!("{tag}.Ig.{}.{}", gen.id, phases[k]), ZERO));
                kcl[node].add(C64::new(1.0, 0.0), cur[k]);
                source_rows.push((node, cur[k]));
            }
            for (k, &node) in bn.iter().enumerate() {
                let mut r = CExpr::default();
                match &z {
                    // E - V - Z I = 0
                    Some(z) => {
                        r.add_const(e[k]);
                        r.add(C64::new(-1.0, 0.0), v[node]);
                        for c in 0..bn.len() {
                            r.add(-z[(k, c)], cur[c]);
                        }
                    }
                    None => {
                        r.add(C64::new(1.0, 0.0), v[node]);
                        r.add_const(-e[k]);
                    }
                }
                r.push_eq(p, Family::RefSource, &format!("{tag}/source {}/{}", gen.id, phases[k]));
            }
        } else {
            match &kind {
                BlockKind::Operating => {
                    let tanphi = gen.q_ratio();
                    for (k, &node) in bn.iter().enumerate() {
                        let ph = phases[k];
                        let s0 = dispatch0.power(g, k);
                        let pv = p.add_var(format!("{tag}.P.{}.{ph}", gen.id), 0.0, gen.pmax[k], s0.re);
                        let qv = p.free_var(format!("{tag}.Q.{}.{ph}", gen.id), s0.im);
                        let i = cvar(p, &format!("{tag}.Ig.{}.{ph}", gen.id), (s0 / v0[node]).conj());
                        let el = format!("{tag}/generator {}/{ph}", gen.id);
                        let (pe, qe) = complex_power(v[node], i);
                        p.add_eq(Family::GenPowerDef, format!("{el}.p"), pe.lin(pv, -1.0));
                        p.add_eq(Family::GenPowerDef, format!("{el}.q"), qe.lin(qv, -1.0));
                        p.add_le(Family::GenPowerFactor, format!("{el}.lead"), QuadExpr::new().lin(qv, 1.0).lin(pv, -tanphi));
                        p.add_le(Family::GenPowerFactor, format!("{el}.lag"), QuadExpr::new().lin(qv, -1.0).lin(pv, -tanphi));
                        kcl[node].add(C64::new(1.0, 0.0), i);
                        cur.push(i);
                        dvars.p[g].push(pv);
                        dvars.q[g].push(qv);
                    }
                    add_balance_rows(p, tag, &gen.id, &dvars.p[g], &dvars.q[g]);
                }
                BlockKind::Fault { shared_v, dispatch, .. } => {
                    // y = kf conj(S) / |V0|^2 through m = |V0|^2, I = y (V0 - V)
                    for (k, &node) in bn.iter().enumerate() {
                        let ph = phases[k];
                        let el = format!("{tag}/generator {}/{ph}", gen.id);
                        let v0s = shared_v[node];
                        let m0 = shared_v0[node].norm_sqr();
                        let y0 = dispatch0.power(g, k).conj() * gen.kf / m0;
                        let m = p.free_var(format!("{tag}.m.{}.{ph}", gen.id), m0);
                        let y = cvar(p, &format!("{tag}.y.{}.{ph}", gen.id), y0);
                        let (pv, qv) = (dispatch.p[g][k], dispatch.q[g][k]);
                        p.add_eq(Family::GenFaultModel, format!("{el}.m"), QuadExpr::new().lin(m, 1.0) + re_im_sq(v0s) * -1.0);
                        p.add_eq(Family::GenFaultModel, format!("{el}.yr"), QuadExpr::new().quad(m, y[0], 1.0).lin(pv, -gen.kf));
                        p.add_eq(Family::GenFaultModel, format!("{el}.yi"), QuadExpr::new().quad(m, y[1], 1.0).lin(qv, gen.kf));
                        let i = cvar(p, &format!("{tag}.Ig.{}.{ph}", gen.id), y0 * (shared_v0[node] - v0[node]));
                        let mut e = CExpr::default();
                        e.add(C64::new(1.0, 0.0), i);
                        let mut prod = CExpr::default();
                        prod.add_product_diff(y, v0s, v[node]);
                        e.re = e.re + prod.re * -1.0;
                        e.im = e.im + prod.im * -1.0;
                        e.push_eq(p, Family::GenFaultModel, &el);
                        kcl[node].add(C64::new(1.0, 0.0), i);
                        cur.push(i);
                    }
                }
            }
        }
        gen_i.push(cur);
    }

    // Reference currents start at whatever closes the current balance.
    let mut seeded = vec![false; n];
    for &(node, i) in &source_rows {
        if !seeded[node] {
            seeded[node] = true;
            p.x0[i[0]] = -kcl[node].re.eval(&p.x0);
            p.x0[i[1]] = -kcl[node].im.eval(&p.x0);
        }
    }
    for (i, e) in kcl.into_iter().enumerate() {
        e.push_eq(p, Family::Kcl, &format!("{tag}/node {}", nodes.label(i)));
    }

    if operating {
        for (b, busd) in net.buses.iter().enumerate() {
            for node in nodes.bus_nodes(b) {
                let el = format!("{tag}/node {}", nodes.label(node));
                let sq = re_im_sq(v[node]);
                p.add_le(Family::VoltageBound, format!("{el}.max"), sq.clone().constant(-busd.vmax_pu * busd.vmax_pu));
                p.add_le(Family::VoltageBound, format!("{el}.min"), (sq * -1.0).constant(busd.vmin_pu * busd.vmin_pu));
            }
        }
        for (k, line) in net.lines.iter().enumerate() {
            for (a, &ph) in line.phases.iter().enumerate() {
                p.add_le(
                    Family::LineThermal,
                    format!("{tag}/line {}/{ph}", line.id),
                    re_im_sq(line_i[k][a]).constant(-line.ampacity * line.ampacity),
                );
            }
        }
        for (k, tr) in net.transformers.iter().enumerate() {
            let t = bus(&tr.to);
            let limit = tr.rating_kva / (3.0 * net.bases(t).s_phase_kva);
            for (a, i) in tr_secondary[k].iter().enumerate() {
                p.add_le(
                    Family::TransformerThermal,
                    format!("{tag}/transformer {}/{}", tr.id, net.buses[t].phases[a]),
                    re_im_sq(*i).constant(-limit * limit),
                );
            }
        }
    }

    let vars = BlockVars {
        tag: tag.to_string(),
        v,
        line_i,
        tr_secondary,
        tr_primary,
        gen_i,
        load_i,
        fault_i,
        fault_sq,
    };
    Ok((vars, operating.then_some(dvars)))
}

/// `|x_k - mean| <= tol * mean` for P, and against the mean P for Q.
fn add_balance_rows(p: &mut NlpProblem, tag: &str, id: &str, pv: &[usize], qv: &[usize]) {
    let m = pv.len();
    if m < 2 {
        return;
    }
    let w = 1.0 / m as f64;
    let tol = PHASE_BALANCE_TOLERANCE;
    for k in 0..m {
        // x_k - mean - tol * pmean <= 0 and mean - x_k - tol * pmean <= 0
        for (label, xs) in [("p", pv), ("q", qv)] {
            let mut up = QuadExpr::new().lin(xs[k], 1.0);
            let mut dn = QuadExpr::new().lin(xs[k], -1.0);
            for j in 0..m {
                up.add_lin(xs[j], -w);
                dn.add_lin(xs[j], w);
                up.add_lin(pv[j], -tol * w);
                dn.add_lin(pv[j], -tol * w);
            }
            let el = format!("{tag}/generator {id}/{k}.{label}");
            p.add_le(Family::GenBalance, format!("{el}.up"), up);
            p.add_le(Family::GenBalance, format!("{el}.down"), dn);
        }
    }
}

/// Generation cost (currency per hour): dispatchable units on their P variables,
/// reference sources on the power they deliver.
pub(crate) fn cost_expr(net: &Network, block: &BlockVars, dispatch: &DispatchVars) -> QuadExpr {
    let nodes = NodeIndex::new(net);
    let mut cost = QuadExpr::new();
    for (g, gen) in net.generators.iter().enumerate() {
        if gen.cost_per_kwh == 0.0 {
            continue;
        }
        let b = net.bus_index(&gen.bus).unwrap();
        let scale = gen.cost_per_kwh * net.bases(b).s_phase_kva;
        if gen.is_reference() {
            for (k, node) in nodes.bus_nodes(b).enumerate() {
                let (pe, _) = complex_power(block.v[node], block.gen_i[g][k]);
                cost = cost + pe * scale;
            }
        } else {
            for &pv in &dispatch.p[g] {
                cost.add_lin(pv, scale);
            }
        }
    }
    cost
}

/// Builds the OPF of a per-unit network, seeded with a zero-DG power flow.
pub fn build_opf(net: &Network) -> Result<OpfProblem> {
    if net.reference_generators().next().is_none() {
        return Err(Error::invalid("generators", "at least one reference source is required"));
    }
    for b in &net.buses {
        if b.vmin_pu > b.vmax_pu {
            return Err(Error::invalid(format!("bus `{}`", b.id), "vmin_pu above vmax_pu"));
        }
    }
    let d0 = Dispatch::zero(net);
    let op = run_power_flow(net, &d0)?;
    let mut nlp = NlpProblem::new();
    let (operating, dispatch) = add_block(&mut nlp, net, "n0", BlockKind::Operating, &op.v, &d0, &op.v)?;
    let dispatch = dispatch.expect("operating block");
    let cost = cost_expr(net, &operating, &dispatch);
    nlp.objective = cost.clone();
    Ok(OpfProblem {
        nlp,
        nodes: op.nodes,
        operating,
        dispatch,
        cost,
    })
}

/// Reads the operating-block state out of a solution vector.
pub fn extract_state(net: &Network, nodes: &NodeIndex, block: &BlockVars, x: &[f64]) -> PhasorState {
    let c = |v: CVar| C64::new(x[v[0]], x[v[1]]);
    let v: Vec<C64> = block.v.iter().map(|&i| c(i)).collect();
    let generator_power = net
        .generators
        .iter()
        .enumerate()
        .map(|(g, gen)| {
            let b = net.bus_index(&gen.bus).unwrap();
            nodes
                .bus_nodes(b)
                .enumerate()
                .map(|(k, node)| v[node] * c(block.gen_i[g][k]).conj())
                .collect()
        })
        .collect();
    PhasorState {
        nodes: nodes.clone(),
        line_currents: block.line_i.iter().map(|l| l.iter().map(|&i| c(i)).collect()).collect(),
        transformer_currents: block.tr_secondary.iter().map(|l| l.iter().map(|&i| c(i)).collect()).collect(),
        generator_power,
        v,
    }
}

pub fn extract_dispatch(net: &Network, dispatch: &DispatchVars, x: &[f64]) -> Dispatch {
    let mut d = Dispatch::zero(net);
    for g in 0..net.generators.len() {
        for (k, (&pv, &qv)) in dispatch.p[g].iter().zip(&dispatch.q[g]).enumerate() {
            d.p[g][k] = x[pv];
            d.q[g][k] = x[qv];
        }
    }
    d
}

/// Minimum-cost dispatch of the network.
pub fn solve_opf(net: &Network) -> Result<OpfSolution> {
    solve_opf_with(net, &OpfOptions::default())
}

pub fn solve_opf_with(net: &Network, opts: &OpfOptions) -> Result<OpfSolution> {
    let problem = build_opf(net)?;
    info!(
        "opf: {} variables, {} equalities, {} inequalities",
        problem.nlp.num_vars(),
        problem.nlp.equalities.len(),
        problem.nlp.inequalities.len()
    );
    let sol = solve_nlp(&problem.nlp, &opts.solver);
    Ok(OpfSolution {
        state: extract_state(net, &problem.nodes, &problem.operating, &sol.x),
        dispatch: extract_dispatch(net, &problem.dispatch, &sol.x),
        cost: problem.cost.eval(&sol.x),
        diagnostics: sol.diagnostics,
        x: sol.x,
    })
}
