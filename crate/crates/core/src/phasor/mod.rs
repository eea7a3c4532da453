//! Complex phasor algebra: node indexing, nodal admittance assembly, dense complex
//! solves, fault admittance matrices and the star-mesh transformation.

mod fault;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::netmodel::{FaultSpec, Generator, LoadModel, Network, Phase};

pub use fault::{build_fault_admittance, star_to_mesh, FaultAdmittance};

pub type C64 = Complex64;

pub const ZERO: C64 = Complex64::new(0.0, 0.0);

/// X/R ratio assumed for a reference source impedance derived from short-circuit
/// powers when the generator carries no internal impedance of its own.
pub const DEFAULT_SOURCE_X_OVER_R: f64 = 1.0;

/// Maps every (bus, phase) pair to a dense node number, bus-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeIndex {
    offsets: Vec<usize>,
    phases: Vec<Vec<Phase>>,
    labels: Vec<String>,
    len: usize,
}

impl NodeIndex {
    pub fn new(net: &Network) -> Self {
        let mut offsets = Vec::with_capacity(net.buses.len());
        let mut labels = Vec::new();
        let mut len = 0;
        for bus in &net.buses {
            offsets.push(len);
            for p in &bus.phases {
                labels.push(format!("{}.{}", bus.id, p));
            }
            len += bus.phases.len();
        }
        NodeIndex {
            offsets,
            phases: net.buses.iter().map(|b| b.phases.clone()).collect(),
            labels,
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn node(&self, bus: usize, phase: Phase) -> Option<usize> {
        self.phases[bus]
            .iter()
            .position(|&p| p == phase)
            .map(|k| self.offsets[bus] + k)
    }

    /// Node of the `k`-th phase of bus `bus`.
    pub fn node_at(&self, bus: usize, k: usize) -> usize {
        debug_assert!(k < self.phases[bus].len());
        self.offsets[bus] + k
    }

    pub fn bus_nodes(&self, bus: usize) -> std::ops::Range<usize> {
        self.offsets[bus]..self.offsets[bus] + self.phases[bus].len()
    }

    pub fn label(&self, node: usize) -> &str {
        &self.labels[node]
    }
}

/// Sparse complex nodal admittance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    pub nodes: NodeIndex,
    entries: BTreeMap<(usize, usize), C64>,
}

impl AdmittanceMatrix {
    pub fn new(nodes: NodeIndex) -> Self {
        AdmittanceMatrix {
            nodes,
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        *self.entries.entry((i, j)).or_insert(ZERO) += v;
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries.get(&(i, j)).copied().unwrap_or(ZERO)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.entries.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    /// Adds `block` between the node lists `rows` and `cols`.
    pub fn add_block(&mut self, rows: &[usize], cols: &[usize], block: &DMatrix<C64>) {
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                let v = block[(a, b)];
                if v != ZERO {
                    self.add(i, j, v);
                }
            }
        }
    }

    pub fn mul(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim()];
        for (&(i, j), y) in &self.entries {
            out[i] += y * v[j];
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.dim();
        let mut m = DMatrix::from_element(n, n, ZERO);
        for (&(i, j), &y) in &self.entries {
            m[(i, j)] += y;
        }
        m
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.entries
            .iter()
            .all(|(&(i, j), y)| (y - self.get(j, i)).norm() <= tol * (1.0 + y.norm()))
    }
}

/// Solves `a x = b` by LU with partial pivoting.
pub fn solve_dense(a: DMatrix<C64>, b: &[C64], context: &str) -> Result<Vec<C64>> {
    let lu = a.lu();
    let x = lu
        .solve(&DVector::from_column_slice(b))
        .ok_or_else(|| Error::Singular(context.to_string()))?;
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Singular(context.to_string()));
    }
    Ok(x.as_slice().to_vec())
}

pub fn invert(m: &DMatrix<C64>, context: &str) -> Result<DMatrix<C64>> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular(context.to_string()))
}

/// Complex phase-domain impedance matrix of a line.
pub fn line_impedance(net: &Network, line: usize) -> DMatrix<C64> {
    let l = &net.lines[line];
    let n = l.phases.len();
    DMatrix::from_fn(n, n, |i, j| l.impedance(i, j))
}

/// Per-phase transformer stamp parameters: complex ratio `a = W / tap` and series
/// admittance on system base. Primary current is `conj(a) * I_s`, secondary
/// current `I_s = y * (a * V_from - V_to)`.
pub fn transformer_stamp(net: &Network, k: usize) -> (C64, C64) {
    let t = &net.transformers[k];
    let a = t.vector_group.rotation() / t.tap;
    let y = C64::new(t.r_pu, t.x_pu).inv();
    (a, y)
}

/// Internal EMF of a reference source per bus phase.
pub fn reference_emf(net: &Network, gen: &Generator) -> Vec<C64> {
    let bus = net.bus(&gen.bus).expect("validated network");
    bus.phases
        .iter()
        .map(|p| {
            C64::from_polar(
                gen.vset_pu,
                (gen.theta_deg + p.nominal_angle_deg()).to_radians(),
            )
        })
        .collect()
}

/// Phase-domain impedance of a reference source during faults.
///
/// Positive-sequence magnitude follows from the three-phase short-circuit power,
/// zero-sequence from the single-phase one (`S1 = 3 V^2 / (2 Z1 + Z0)`). Without
/// short-circuit data the internal impedance is used on every phase. A grounding
/// impedance at the source bus adds to every entry. Returns `None` for an ideal
/// source.
pub fn reference_fault_impedance(net: &Network, gen: &Generator) -> Result<Option<DMatrix<C64>>> {
    let b = net.bus_index(&gen.bus).expect("validated network");
    let bus = &net.buses[b];
    let n = bus.phases.len();
    let zint = gen.internal_impedance();
    let mut z = match gen.sc3_mva {
        Some(sc3) => {
            let s_base_mva = net.base.power_base_kva / 1000.0;
            let angle = if zint.norm() > 0.0 {
                zint.arg()
            } else {
                DEFAULT_SOURCE_X_OVER_R.atan()
            };
            let z1 = C64::from_polar(s_base_mva / sc3, angle);
            let z0 = match gen.sc1_mva {
                Some(sc1) => {
                    let m = 3.0 * s_base_mva / sc1 - 2.0 * (s_base_mva / sc3);
                    if m <= 0.0 {
                        return Err(Error::invalid(
                            format!("generator `{}`", gen.id),
                            "single-phase short-circuit power exceeds 1.5x the three-phase value",
                        ));
                    }
                    C64::from_polar(m, angle)
                }
                None => z1,
            };
            let zs = (z0 + z1 * 2.0) / 3.0;
            let zm = (z0 - z1) / 3.0;
            DMatrix::from_fn(n, n, |i, j| if i == j { zs } else { zm })
        }
        None if zint.norm() > 0.0 => DMatrix::from_fn(n, n, |i, j| if i == j { zint } else { ZERO }),
        None => return Ok(None),
    };
    if let Some(g) = bus.grounding {
        z.add_scalar_mut(g.impedance());
    }
    Ok(Some(z))
}

/// Nominal-voltage admittance of a load phase, `conj(S) / 1 pu^2`.
pub fn load_admittance(s: C64) -> C64 {
    s.conj()
}

/// Nodal admittance of the passive network.
///
/// Without a scenario: lines, transformers, constant-impedance loads and the
/// pre-fault internal impedance of non-ideal reference sources. With a scenario:
/// lines, transformers, every load at its nominal-voltage impedance, the fault
/// impedance of every reference source and the fault conductances. Dispatchable
/// generators depend on the operating point and are stamped by the callers.
pub fn assemble_admittance(
    network: &Network,
    scenario: Option<&[FaultSpec]>,
) -> Result<AdmittanceMatrix> {
    let nodes = NodeIndex::new(network);
    let mut y = AdmittanceMatrix::new(nodes.clone());

    for (k, line) in network.lines.iter().enumerate() {
        let f = network.bus_index(&line.from).unwrap();
        let t = network.bus_index(&line.to).unwrap();
        let yl = invert(&line_impedance(network, k), &format!("impedance of line `{}`", line.id))?;
        let fr: Vec<usize> = line.phases.iter().map(|&p| nodes.node(f, p).unwrap()).collect();
        let to: Vec<usize> = line.phases.iter().map(|&p| nodes.node(t, p).unwrap()).collect();
        y.add_block(&fr, &fr, &yl);
        y.add_block(&to, &to, &yl);
        y.add_block(&fr, &to, &(-&yl));
        y.add_block(&to, &fr, &(-&yl));
    }

    for (k, tr) in network.transformers.iter().enumerate() {
        let f = network.bus_index(&tr.from).unwrap();
        let t = network.bus_index(&tr.to).unwrap();
        let (a, yt) = transformer_stamp(network, k);
        for &p in &network.buses[f].phases {
            let (i, j) = (nodes.node(f, p).unwrap(), nodes.node(t, p).unwrap());
            y.add(i, i, yt * a.norm_sqr());
            y.add(i, j, -yt * a.conj());
            y.add(j, i, -yt * a);
            y.add(j, j, yt);
        }
    }

    for load in &network.loads {
        if scenario.is_none() && load.model == LoadModel::ConstantPower {
            continue;
        }
        let b = network.bus_index(&load.bus).unwrap();
        for k in 0..load.p.len() {
            let n = nodes.node_at(b, k);
            y.add(n, n, load_admittance(load.power(k)));
        }
    }

    for (_, gen) in network.reference_generators() {
        let b = network.bus_index(&gen.bus).unwrap();
        let z = if scenario.is_some() {
            reference_fault_impedance(network, gen)?
        } else {
            let zi = gen.internal_impedance();
            (zi.norm() > 0.0).then(|| {
                let n = network.buses[b].phases.len();
                DMatrix::from_fn(n, n, |i, j| if i == j { zi } else { ZERO })
            })
        };
        if let Some(z) = z {
            let ys = invert(&z, &format!("source impedance of `{}`", gen.id))?;
            let bn: Vec<usize> = nodes.bus_nodes(b).collect();
            y.add_block(&bn, &bn, &ys);
        }
    }

    if let Some(faults) = scenario {
        for fault in faults {
            let b = network.bus_index(&fault.bus).ok_or_else(|| Error::DanglingReference {
                path: format!("fault `{}`", fault.id),
                kind: "bus",
                id: fault.bus.clone(),
            })?;
            let fa = build_fault_admittance(fault, network.fault_resistance_floor(b))?;
            let fnodes: Vec<usize> = fa
                .phases
                .iter()
                .map(|&p| {
                    nodes.node(b, p).ok_or_else(|| Error::PhaseMismatch {
                        path: format!("fault `{}`", fault.id),
                        message: format!("phase {p} missing on bus `{}`", fault.bus),
                    })
                })
                .collect::<Result<_>>()?;
            for (a, &i) in fnodes.iter().enumerate() {
                for (c, &j) in fnodes.iter().enumerate() {
                    y.add(i, j, C64::new(fa.g[a][c], 0.0));
                }
            }
        }
    }
    Ok(y)
}
