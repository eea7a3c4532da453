//! Newton current-injection power flow in rectangular coordinates.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{Generator, LoadModel, Network};
use crate::phasor::{
    assemble_admittance, invert, line_impedance, reference_emf, transformer_stamp, AdmittanceMatrix,
    NodeIndex, C64, ZERO,
};

/// Active and reactive set-points per generator and bus phase (pu). Entries of
/// reference generators are ignored by the studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dispatch {
    pub p: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
}

impl Dispatch {
    pub fn zero(net: &Network) -> Self {
        let p: Vec<Vec<f64>> = net.generators.iter().map(|g| vec![0.0; g.pmax.len()]).collect();
        Dispatch { q: p.clone(), p }
    }

    /// Every dispatchable unit at its active power limit with unity power factor.
    pub fn at_pmax(net: &Network) -> Self {
        let mut d = Dispatch::zero(net);
        for (g, gen) in net.dispatchable_generators() {
            d.p[g] = gen.pmax.clone();
        }
        d
    }

    pub fn power(&self, g: usize, k: usize) -> C64 {
        C64::new(self.p[g][k], self.q[g][k])
    }

    pub fn generator_total(&self, g: usize) -> C64 {
        (0..self.p[g].len()).map(|k| self.power(g, k)).sum()
    }

    /// Checks dimensions and limits against the network.
    pub fn check(&self, net: &Network) -> Result<()> {
        if self.p.len() != net.generators.len() || self.q.len() != net.generators.len() {
            return Err(Error::invalid("dispatch", "one entry per generator required"));
        }
        for (g, gen) in net.dispatchable_generators() {
            let path = format!("dispatch[{}]", gen.id);
            if self.p[g].len() != gen.pmax.len() || self.q[g].len() != gen.pmax.len() {
                return Err(Error::invalid(path, "one entry per bus phase required"));
            }
            let tol = 1e-9;
            for k in 0..gen.pmax.len() {
                let (p, q) = (self.p[g][k], self.q[g][k]);
                if p < -tol || p > gen.pmax[k] + tol {
                    return Err(Error::invalid(&path, format!("P = {p} outside [0, {}]", gen.pmax[k])));
                }
                if q.abs() > p.max(0.0) * gen.q_ratio() + tol {
                    return Err(Error::invalid(&path, format!("Q = {q} violates the power-factor limit")));
                }
            }
        }
        Ok(())
    }
}

/// Voltages and currents of a solved network.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasorState {
    pub nodes: NodeIndex,
    /// Node voltages, indexed by [`NodeIndex`].
    pub v: Vec<C64>,
    /// Current per line phase, flowing from `from` to `to`.
    pub line_currents: Vec<Vec<C64>>,
    /// Secondary-side current per transformer phase, flowing into `to`.
    pub transformer_currents: Vec<Vec<C64>>,
    /// Complex power injected by each generator per bus phase.
    pub generator_power: Vec<Vec<C64>>,
}

impl PhasorState {
    pub fn bus_voltages(&self, bus: usize) -> &[C64] {
        &self.v[self.nodes.bus_nodes(bus)]
    }

    pub fn min_voltage(&self) -> (usize, f64) {
        self.v
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.norm()))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    }

    /// Complex losses in lines and transformers.
    pub fn series_losses(&self, net: &Network) -> C64 {
        let mut s = ZERO;
        for (k, line) in net.lines.iter().enumerate() {
            let f = net.bus_index(&line.from).unwrap();
            let t = net.bus_index(&line.to).unwrap();
            for (m, &p) in line.phases.iter().enumerate() {
                let dv = self.v[self.nodes.node(f, p).unwrap()] - self.v[self.nodes.node(t, p).unwrap()];
                s += dv * self.line_currents[k][m].conj();
            }
        }
        for (k, _) in net.transformers.iter().enumerate() {
            let (_, y) = transformer_stamp(net, k);
            for i in &self.transformer_currents[k] {
                s += i.norm_sqr() / y;
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Re-solve with out-of-band generators converted to constant impedance.
    pub revert_generators: bool,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        PowerFlowOptions {
            tol: 1e-10,
            max_iter: 50,
            revert_generators: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution {
    pub state: PhasorState,
    pub iterations: usize,
    pub residual: f64,
    /// Dispatchable generators whose terminal voltage left the bus voltage band;
    /// such a unit would fall back to a constant-impedance characteristic.
    pub out_of_band: Vec<String>,
    /// Generators solved as constant impedance after reversion.
    pub reverted: Vec<String>,
}

/// Solves the pre-fault network with the given dispatch.
pub fn run_power_flow(net: &Network, dispatch: &Dispatch) -> Result<PhasorState> {
    run_power_flow_with(net, dispatch, &PowerFlowOptions::default()).map(|s| s.state)
}

pub fn run_power_flow_with(
    net: &Network,
    dispatch: &Dispatch,
    opts: &PowerFlowOptions,
) -> Result<PowerFlowSolution> {
    dispatch.check(net)?;
    let mut sol = newton(net, dispatch, opts, &[])?;
    if opts.revert_generators && !sol.out_of_band.is_empty() {
        let fixed: Vec<(usize, Vec<C64>)> = sol
            .out_of_band
            .iter()
            .map(|id| {
                let g = net.generators.iter().position(|g| &g.id == id).unwrap();
                let b = net.bus_index(&net.generators[g].bus).unwrap();
                let v = sol.state.bus_voltages(b);
                let y = (0..v.len())
                    .map(|k| -dispatch.power(g, k).conj() / v[k].norm_sqr())
                    .collect();
                (g, y)
            })
            .collect();
        let out = sol.out_of_band.clone();
        sol = newton(net, dispatch, opts, &fixed)?;
        sol.reverted = out;
    }
    Ok(sol)
}

struct Injections {
    /// Constant-power injection per node.
    s: Vec<C64>,
    /// Constant current injection per node (Thevenin sources).
    j: Vec<C64>,
    pinned: Vec<Option<C64>>,
}

fn injections(net: &Network, y: &mut AdmittanceMatrix, dispatch: &Dispatch, reverted: &[(usize, Vec<C64>)]) -> Result<Injections> {
    let nodes = y.nodes.clone();
    let n = nodes.len();
    let mut s = vec![ZERO; n];
    let mut j = vec![ZERO; n];
    let mut pinned = vec![None; n];
    for load in &net.loads {
        if load.model == LoadModel::ConstantPower {
            let b = net.bus_index(&load.bus).unwrap();
            for k in 0..load.p.len() {
                s[nodes.node_at(b, k)] -= load.power(k);
            }
        }
    }
    for (g, gen) in net.generators.iter().enumerate() {
        let b = net.bus_index(&gen.bus).unwrap();
        if gen.is_reference() {
            let e = reference_emf(net, gen);
            let z = gen.internal_impedance();
            for (k, node) in nodes.bus_nodes(b).enumerate() {
                if z.norm() == 0.0 {
                    pinned[node].get_or_insert(e[k]);
                } else {
                    // admittance already stamped by assemble_admittance
                    j[node] += e[k] / z;
                }
            }
        } else if let Some((_, ys)) = reverted.iter().find(|(r, _)| *r == g) {
            for (k, node) in nodes.bus_nodes(b).enumerate() {
                y.add(node, node, ys[k]);
            }
        } else {
            for (k, node) in nodes.bus_nodes(b).enumerate() {
                s[node] += dispatch.power(g, k);
            }
        }
    }
    Ok(Injections { s, j, pinned })
}

fn flat_start(net: &Network, nodes: &NodeIndex) -> Vec<C64> {
    let offsets = net.angle_offsets_deg();
    let vset = net
        .reference_generators()
        .map(|(_, g)| g.vset_pu)
        .next()
        .unwrap_or(1.0);
    let mut v = vec![ZERO; nodes.len()];
    for (b, bus) in net.buses.iter().enumerate() {
        for (k, p) in bus.phases.iter().enumerate() {
            v[nodes.node_at(b, k)] = C64::from_polar(vset, (offsets[b] + p.nominal_angle_deg()).to_radians());
        }
    }
    v
}

/// Current injected by constant-power sources at node voltage `v`: conj(S / v).
fn pq_current(s: C64, v: C64) -> C64 {
    (s / v).conj()
}

fn newton(
    net: &Network,
    dispatch: &Dispatch,
    opts: &PowerFlowOptions,
    reverted: &[(usize, Vec<C64>)],
) -> Result<PowerFlowSolution> {
    let mut y = assemble_admittance(net, None)?;
    let inj = injections(net, &mut y, dispatch, reverted)?;
    let nodes = y.nodes.clone();
    let n = nodes.len();
    let mut v = flat_start(net, &nodes);
    for (i, p) in inj.pinned.iter().enumerate() {
        if let Some(e) = p {
            v[i] = *e;
        }
    }
    // unknown index of every free node
    let mut free = vec![usize::MAX; n];
    let mut nfree = 0;
    for i in 0..n {
        if inj.pinned[i].is_none() {
            free[i] = nfree;
            nfree += 1;
        }
    }
    let ydense = y.to_dense();

    let mismatch = |v: &[C64]| -> Vec<C64> {
        let yv = y.mul(v);
        (0..n)
            .map(|i| {
                if inj.pinned[i].is_some() {
                    ZERO
                } else {
                    yv[i] - inj.j[i] - pq_current(inj.s[i], v[i])
                }
            })
            .collect()
    };

    let mut iterations = 0;
    let mut f = mismatch(&v);
    let mut residual = max_norm(&f);
    while residual > opts.tol {
        if iterations >= opts.max_iter {
            let worst = (0..n).max_by(|&a, &b| f[a].norm().total_cmp(&f[b].norm())).unwrap();
            return Err(Error::NonConvergence {
                iterations,
                residual,
                node: nodes.label(worst).to_string(),
            });
        }
        iterations += 1;
        // real Jacobian over [e_free, f_free]
        let mut jac = DMatrix::<f64>::zeros(2 * nfree, 2 * nfree);
        let mut rhs = DVector::<f64>::zeros(2 * nfree);
        for i in 0..n {
            let r = free[i];
            if r == usize::MAX {
                continue;
            }
            rhs[2 * r] = -f[i].re;
            rhs[2 * r + 1] = -f[i].im;
            for jn in 0..n {
                let c = free[jn];
                if c == usize::MAX {
                    continue;
                }
                let yij = ydense[(i, jn)];
                if yij == ZERO {
                    continue;
                }
                jac[(2 * r, 2 * c)] += yij.re;
                jac[(2 * r, 2 * c + 1)] -= yij.im;
                jac[(2 * r + 1, 2 * c)] += yij.im;
                jac[(2 * r + 1, 2 * c + 1)] += yij.re;
            }
            let s = inj.s[i];
            if s != ZERO {
                let (e, fi) = (v[i].re, v[i].im);
                let m = e * e + fi * fi;
                let (p, q) = (s.re, s.im);
                let ir = p * e + q * fi;
                let ii = p * fi - q * e;
                let dir_de = (p * m - 2.0 * e * ir) / (m * m);
                let dir_df = (q * m - 2.0 * fi * ir) / (m * m);
                let dii_de = (-q * m - 2.0 * e * ii) / (m * m);
                let dii_df = (p * m - 2.0 * fi * ii) / (m * m);
                jac[(2 * r, 2 * r)] -= dir_de;
                jac[(2 * r, 2 * r + 1)] -= dir_df;
                jac[(2 * r + 1, 2 * r)] -= dii_de;
                jac[(2 * r + 1, 2 * r + 1)] -= dii_df;
            }
        }
        let dx = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("power flow Jacobian".into()))?;
        for i in 0..n {
            let r = free[i];
            if r != usize::MAX {
                v[i] += C64::new(dx[2 * r], dx[2 * r + 1]);
            }
        }
        f = mismatch(&v);
        residual = max_norm(&f);
        if !residual.is_finite() {
            return Err(Error::NonConvergence {
                iterations,
                residual,
                node: "diverged".into(),
            });
        }
    }

    let state = finish_state(net, &y, &v, &inj, dispatch, reverted)?;
    let out_of_band = net
        .dispatchable_generators()
        .filter(|(g, gen)| {
            !reverted.iter().any(|(r, _)| r == g) && outside_band(net, &state, gen) && dispatch.generator_total(*g) != ZERO
        })
        .map(|(_, gen)| gen.id.clone())
        .collect();
    Ok(PowerFlowSolution {
        state,
        iterations,
        residual,
        out_of_band,
        reverted: Vec::new(),
    })
}

fn outside_band(net: &Network, state: &PhasorState, gen: &Generator) -> bool {
    let b = net.bus_index(&gen.bus).unwrap();
    let bus = &net.buses[b];
    state
        .bus_voltages(b)
        .iter()
        .any(|v| v.norm() < bus.vmin_pu || v.norm() > bus.vmax_pu)
}

fn max_norm(f: &[C64]) -> f64 {
    f.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn finish_state(
    net: &Network,
    y: &AdmittanceMatrix,
    v: &[C64],
    inj: &Injections,
    dispatch: &Dispatch,
    reverted: &[(usize, Vec<C64>)],
) -> Result<PhasorState> {
    let nodes = y.nodes.clone();
    let mut line_currents = Vec::with_capacity(net.lines.len());
    for (k, line) in net.lines.iter().enumerate() {
        let f = net.bus_index(&line.from).unwrap();
        let t = net.bus_index(&line.to).unwrap();
        let yl = invert(&line_impedance(net, k), &line.id)?;
        let dv: Vec<C64> = line
            .phases
            .iter()
            .map(|&p| v[nodes.node(f, p).unwrap()] - v[nodes.node(t, p).unwrap()])
            .collect();
        line_currents.push(
            (0..dv.len())
                .map(|a| (0..dv.len()).map(|b| yl[(a, b)] * dv[b]).sum())
                .collect(),
        );
    }
    let mut transformer_currents = Vec::with_capacity(net.transformers.len());
    for (k, tr) in net.transformers.iter().enumerate() {
        let f = net.bus_index(&tr.from).unwrap();
        let t = net.bus_index(&tr.to).unwrap();
        let (a, yt) = transformer_stamp(net, k);
        transformer_currents.push(
            net.buses[f]
                .phases
                .iter()
                .map(|&p| yt * (a * v[nodes.node(f, p).unwrap()] - v[nodes.node(t, p).unwrap()]))
                .collect(),
        );
    }

    // Current delivered by pinned sources is whatever the network draws there.
    let yv = y.mul(v);
    let mut generator_power = Vec::with_capacity(net.generators.len());
    let mut pinned_taken = vec![false; nodes.len()];
    for (g, gen) in net.generators.iter().enumerate() {
        let b = net.bus_index(&gen.bus).unwrap();
        let powers = nodes
            .bus_nodes(b)
            .enumerate()
            .map(|(k, node)| {
                if gen.is_reference() {
                    let z = gen.internal_impedance();
                    if z.norm() > 0.0 {
                        let e = reference_emf(net, gen)[k];
                        v[node] * ((e - v[node]) / z).conj()
                    } else if !pinned_taken[node] {
                        pinned_taken[node] = true;
                        let other = inj.s[node];
                        v[node] * (yv[node] - inj.j[node]).conj() - other
                    } else {
                        ZERO
                    }
                } else if let Some((_, ys)) = reverted.iter().find(|(r, _)| *r == g) {
                    -v[node].norm_sqr() * ys[k].conj()
                } else {
                    dispatch.power(g, k)
                }
            })
            .collect();
        generator_power.push(powers);
    }
    Ok(PhasorState {
        nodes,
        v: v.to_vec(),
        line_currents,
        transformer_currents,
        generator_power,
    })
}
