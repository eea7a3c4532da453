use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};

use super::{Branch, Network, UnitSystem};

/// Per-phase bases of one voltage zone. Powers are per phase, voltages line-to-neutral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bases {
    pub s_phase_kva: f64,
    pub v_ln_kv: f64,
    pub z_ohm: f64,
    pub i_amp: f64,
}

impl Bases {
    pub fn new(power_base_kva: f64, kv_ll: f64) -> Self {
        let s_phase_kva = power_base_kva / 3.0;
        let v_ln_kv = kv_ll / 3f64.sqrt();
        Bases {
            s_phase_kva,
            v_ln_kv,
            z_ohm: kv_ll * kv_ll * 1000.0 / power_base_kva,
            i_amp: s_phase_kva / v_ln_kv,
        }
    }
}

/// Assigns a line-to-line voltage base to every bus.
///
/// Zones are the connected components of the line graph. A zone takes the base whose
/// `zone` names one of its buses; zones without one inherit the base of a
/// transformer-connected neighbour.
pub(super) fn zone_voltage_bases(net: &Network) -> Result<Vec<f64>> {
    let n = net.buses.len();
    let adj = net.adjacency();
    let mut zone = vec![usize::MAX; n];
    let mut zones = 0;
    for start in 0..n {
        if zone[start] != usize::MAX {
            continue;
        }
        zone[start] = zones;
        let mut queue = VecDeque::from([start]);
        while let Some(b) = queue.pop_front() {
            for &(m, br) in &adj[b] {
                if matches!(br, Branch::Line(_)) && zone[m] == usize::MAX {
                    zone[m] = zones;
                    queue.push_back(m);
                }
            }
        }
        zones += 1;
    }

    let mut kv: Vec<Option<f64>> = vec![None; zones];
    for (i, vb) in net.base.voltage_bases.iter().enumerate() {
        let path = format!("base.voltage_bases[{i}]");
        let b = net.bus_index(&vb.zone).ok_or_else(|| Error::DanglingReference {
            path: format!("{path}.zone"),
            kind: "bus",
            id: vb.zone.clone(),
        })?;
        if vb.kv_ll <= 0.0 {
            return Err(Error::invalid(format!("{path}.kv_ll"), "must be positive"));
        }
        match kv[zone[b]] {
            Some(prev) if (prev - vb.kv_ll).abs() > 1e-12 * prev => {
                return Err(Error::invalid(path, "conflicting voltage bases for one zone"));
            }
            _ => kv[zone[b]] = Some(vb.kv_ll),
        }
    }

    let mut zone_adj: HashMap<usize, Vec<usize>> = HashMap::new();
    for tr in &net.transformers {
        let (f, t) = (zone[net.bus_index(&tr.from).unwrap()], zone[net.bus_index(&tr.to).unwrap()]);
        zone_adj.entry(f).or_default().push(t);
        zone_adj.entry(t).or_default().push(f);
    }
    let mut queue: VecDeque<usize> = (0..zones).filter(|&z| kv[z].is_some()).collect();
    while let Some(z) = queue.pop_front() {
        for &m in zone_adj.get(&z).map(Vec::as_slice).unwrap_or(&[]) {
            if kv[m].is_none() {
                kv[m] = kv[z];
                queue.push_back(m);
            }
        }
    }

    (0..n)
        .map(|b| {
            kv[zone[b]].ok_or_else(|| Error::MissingVoltageBase {
                bus: net.buses[b].id.clone(),
            })
        })
        .collect()
}

/// Converts every impedance, power and current to per-unit on the network bases.
/// A network already in per-unit is returned unchanged.
pub fn to_per_unit(network: &Network) -> Result<Network> {
    scale(network, UnitSystem::PerUnit)
}

/// Inverse of [`to_per_unit`].
pub fn from_per_unit(network: &Network) -> Result<Network> {
    scale(network, UnitSystem::Physical)
}

fn scale(network: &Network, target: UnitSystem) -> Result<Network> {
    let mut net = network.clone();
    if net.units == target {
        return Ok(net);
    }
    // Factor that maps physical -> pu; inverted for the reverse direction.
    let inv = target == UnitSystem::Physical;
    let f = |x: f64| if inv { 1.0 / x } else { x };
    let s_base = net.base.power_base_kva;
    let bases: Vec<Bases> = (0..net.buses.len()).map(|b| network.bases(b)).collect();
    let bus = |id: &str| network.bus_index(id).expect("validated network");

    for (b, bus) in net.buses.iter_mut().enumerate() {
        if let Some(g) = bus.grounding.as_mut() {
            let z = f(bases[b].z_ohm);
            g.r /= z;
            g.x /= z;
        }
    }
    for line in &mut net.lines {
        let base = bases[bus(&line.from)];
        let z = f(base.z_ohm);
        for row in line.r.iter_mut().chain(line.x.iter_mut()) {
            for v in row.iter_mut() {
                *v /= z;
            }
        }
        line.ampacity /= f(base.i_amp);
    }
    for tr in &mut net.transformers {
        // rating base -> system base
        let k = f(tr.rating_kva / s_base);
        tr.r_pu /= k;
        tr.x_pu /= k;
    }
    for g in &mut net.generators {
        let s = f(bases[bus(&g.bus)].s_phase_kva);
        for p in &mut g.pmax {
            *p /= s;
        }
    }
    for load in &mut net.loads {
        let s = f(bases[bus(&load.bus)].s_phase_kva);
        for v in load.p.iter_mut().chain(load.q.iter_mut()) {
            *v /= s;
        }
    }
    for fault in net.fault_scenarios.iter_mut().flatten() {
        let z = f(bases[bus(&fault.bus)].z_ohm);
        fault.r_phase /= z;
        if let Some(r) = fault.r_ground.as_mut() {
            *r /= z;
        }
    }
    net.units = target;
    net.validate()?;
    Ok(net)
}

impl Network {
    /// Fault resistance floor expressed in the network's units at bus `bus`.
    pub fn fault_resistance_floor(&self, bus: usize) -> f64 {
        match self.units {
            UnitSystem::Physical => self.min_fault_resistance_ohm,
            UnitSystem::PerUnit => self.min_fault_resistance_ohm / self.bases(bus).z_ohm,
        }
    }
}
