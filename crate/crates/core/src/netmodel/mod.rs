//! Network description for unbalanced three-phase distribution feeders.
//!
//! A [`Network`] is built either from the JSON document format ([`parse_network`]),
//! from the bundled benchmark ([`build_cigre_lv_fixture`]) or programmatically and
//! then checked with [`Network::validate`]. Studies expect a per-unit network; see
//! [`to_per_unit`].

mod fixture;
mod json;
pub mod random;
mod units;

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fixture::{build_cigre_lv_fixture, FixtureInfo, CIGRE_LV_INFO};
pub use json::{network_to_json, parse_network, parse_network_physical, NetworkDocument};
pub use units::{from_per_unit, to_per_unit, Bases};

/// Floor applied to every fault resistance (ohm). Bolted faults use this value.
pub const DEFAULT_MIN_FAULT_RESISTANCE_OHM: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    /// Nominal angle of the phase in a positive-sequence set, in degrees.
    pub fn nominal_angle_deg(self) -> f64 {
        match self {
            Phase::A => 0.0,
            Phase::B => -120.0,
            Phase::C => 120.0,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::A => "A",
            Phase::B => "B",
            Phase::C => "C",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnitSystem {
    Physical,
    PerUnit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grounding {
    pub r: f64,
    pub x: f64,
}

impl Grounding {
    pub fn impedance(&self) -> Complex64 {
        Complex64::new(self.r, self.x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    pub phases: Vec<Phase>,
    pub vmin_pu: f64,
    pub vmax_pu: f64,
    /// Neutral grounding impedance (ohm, or pu once converted).
    pub grounding: Option<Grounding>,
}

/// Series element with a full phase-domain impedance matrix (Kron-reduced, no shunt).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: String,
    pub from: String,
    pub to: String,
    pub phases: Vec<Phase>,
    pub r: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    /// Thermal limit (A, or pu).
    pub ampacity: f64,
}

impl Line {
    pub fn impedance(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.r[i][j], self.x[i][j])
    }
}

/// Winding connection; the trailing clock number fixes the phase displacement of the
/// low-voltage side in multiples of 30 degrees (lagging).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VectorGroup {
    Yy0,
    Yyn0,
    YNyn0,
    Dd0,
    Dyn1,
    Dyn5,
    Dyn11,
    Yd1,
    Yd11,
    YNd1,
    YNd11,
    Dy1,
    Dy11,
}

impl VectorGroup {
    pub fn clock(self) -> u8 {
        use VectorGroup::*;
        match self {
            Yy0 | Yyn0 | YNyn0 | Dd0 => 0,
            Dyn1 | Yd1 | YNd1 | Dy1 => 1,
            Dyn5 => 5,
            Dyn11 | Yd11 | YNd11 | Dy11 => 11,
        }
    }

    /// Unit rotation `W` applied to the primary voltage: `W * V_from = tap * V_internal`.
    pub fn rotation(self) -> Complex64 {
        let deg = -30.0 * f64::from(self.clock());
        Complex64::from_polar(1.0, deg.to_radians())
    }
}

impl FromStr for VectorGroup {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        use VectorGroup::*;
        Ok(match s {
            "Yy0" => Yy0,
            "Yyn0" => Yyn0,
            "YNyn0" => YNyn0,
            "Dd0" => Dd0,
            "Dyn1" => Dyn1,
            "Dyn5" => Dyn5,
            "Dyn11" => Dyn11,
            "Yd1" => Yd1,
            "Yd11" => Yd11,
            "YNd1" => YNd1,
            "YNd11" => YNd11,
            "Dy1" => Dy1,
            "Dy11" => Dy11,
            other => return Err(format!("unknown vector group `{other}`")),
        })
    }
}

impl fmt::Display for VectorGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transformer {
    pub id: String,
    pub from: String,
    pub to: String,
    pub vector_group: VectorGroup,
    /// Off-nominal turns ratio.
    pub tap: f64,
    /// Series impedance on the transformer rating (converted to system base by
    /// [`to_per_unit`]).
    pub r_pu: f64,
    pub x_pu: f64,
    pub rating_kva: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeneratorKind {
    Reference,
    Dispatchable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: String,
    pub bus: String,
    pub kind: GeneratorKind,
    pub cost_per_kwh: f64,
    /// Active power limit per bus phase (kW, or pu).
    pub pmax: Vec<f64>,
    pub pf_min: f64,
    pub kf: f64,
    pub z_r_pu: f64,
    pub z_i_pu: f64,
    pub vset_pu: f64,
    pub theta_deg: f64,
    pub sc3_mva: Option<f64>,
    pub sc1_mva: Option<f64>,
}

impl Generator {
    pub fn is_reference(&self) -> bool {
        self.kind == GeneratorKind::Reference
    }

    pub fn internal_impedance(&self) -> Complex64 {
        Complex64::new(self.z_r_pu, self.z_i_pu)
    }

    /// `tan(acos(pf))`, the reactive-to-active ratio at the power-factor limit.
    pub fn q_ratio(&self) -> f64 {
        (1.0 - self.pf_min * self.pf_min).max(0.0).sqrt() / self.pf_min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoadModel {
    ConstantPower,
    ConstantImpedance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub id: String,
    pub bus: String,
    /// Per bus phase (kW / kvar, or pu).
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub model: LoadModel,
}

impl Load {
    pub fn power(&self, k: usize) -> Complex64 {
        Complex64::new(self.p[k], self.q[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaultType {
    LG,
    LL,
    LLG,
    ThreePhase,
    ThreePhaseGround,
}

impl FaultType {
    pub fn phase_count(self) -> usize {
        match self {
            FaultType::LG => 1,
            FaultType::LL | FaultType::LLG => 2,
            FaultType::ThreePhase | FaultType::ThreePhaseGround => 3,
        }
    }

    pub fn is_grounded(self) -> bool {
        matches!(
            self,
            FaultType::LG | FaultType::LLG | FaultType::ThreePhaseGround
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub id: String,
    pub bus: String,
    pub kind: FaultType,
    pub phases: Vec<Phase>,
    /// Phase resistance (ohm, or pu).
    pub r_phase: f64,
    /// Ground resistance for grounded faults.
    pub r_ground: Option<f64>,
}

/// One fault scenario, usually a single fault.
pub type FaultScenario = Vec<FaultSpec>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageBase {
    /// Id of a bus inside the zone.
    pub zone: String,
    pub kv_ll: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseData {
    pub frequency_hz: f64,
    pub power_base_kva: f64,
    pub voltage_bases: Vec<VoltageBase>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub name: String,
    pub base: BaseData,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub transformers: Vec<Transformer>,
    pub generators: Vec<Generator>,
    pub loads: Vec<Load>,
    pub fault_scenarios: Vec<FaultScenario>,
    pub units: UnitSystem,
    /// Floor for fault resistances in ohm.
    pub min_fault_resistance_ohm: f64,
    bus_lookup: HashMap<String, usize>,
    bus_kv_ll: Vec<f64>,
}

impl Network {
    /// Assembles and validates a network given in physical units.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        base: BaseData,
        buses: Vec<Bus>,
        lines: Vec<Line>,
        transformers: Vec<Transformer>,
        generators: Vec<Generator>,
        loads: Vec<Load>,
        fault_scenarios: Vec<FaultScenario>,
    ) -> Result<Self> {
        let mut net = Network {
            name: name.into(),
            base,
            buses,
            lines,
            transformers,
            generators,
            loads,
            fault_scenarios,
            units: UnitSystem::Physical,
            min_fault_resistance_ohm: DEFAULT_MIN_FAULT_RESISTANCE_OHM,
            bus_lookup: HashMap::new(),
            bus_kv_ll: Vec::new(),
        };
        net.validate()?;
        Ok(net)
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.bus_lookup.get(id).copied()
    }

    pub fn bus(&self, id: &str) -> Option<&Bus> {
        self.bus_index(id).map(|i| &self.buses[i])
    }

    /// Position of `phase` inside the phase list of bus `bus`.
    pub fn phase_position(&self, bus: usize, phase: Phase) -> Option<usize> {
        self.buses[bus].phases.iter().position(|&p| p == phase)
    }

    /// Line-to-line voltage base of the zone holding bus `bus` (kV).
    pub fn bus_kv_ll(&self, bus: usize) -> f64 {
        self.bus_kv_ll[bus]
    }

    pub fn bases(&self, bus: usize) -> Bases {
        Bases::new(self.base.power_base_kva, self.bus_kv_ll[bus])
    }

    pub fn reference_generators(&self) -> impl Iterator<Item = (usize, &Generator)> {
        self.generators
            .iter()
            .enumerate()
            .filter(|(_, g)| g.is_reference())
    }

    pub fn dispatchable_generators(&self) -> impl Iterator<Item = (usize, &Generator)> {
        self.generators
            .iter()
            .enumerate()
            .filter(|(_, g)| !g.is_reference())
    }

    /// Copy of the network with every dispatchable generator removed.
    pub fn without_dispatchable(&self) -> Network {
        let mut net = self.clone();
        net.generators.retain(|g| g.is_reference());
        net
    }

    /// Checks every type and reference invariant and rebuilds the derived indices.
    pub fn validate(&mut self) -> Result<()> {
        let mut lookup = HashMap::new();
        for (i, bus) in self.buses.iter().enumerate() {
            let path = format!("buses[{i}]");
            if lookup.insert(bus.id.clone(), i).is_some() {
                return Err(Error::invalid(path, format!("duplicate bus id `{}`", bus.id)));
            }
            check_phase_list(&bus.phases, &format!("{path}.phases"))?;
            if !(bus.vmin_pu > 0.0 && bus.vmin_pu < bus.vmax_pu) {
                return Err(Error::invalid(
                    path,
                    format!("need 0 < vmin_pu < vmax_pu, got {} / {}", bus.vmin_pu, bus.vmax_pu),
                ));
            }
            if let Some(g) = bus.grounding {
                if !(g.r >= 0.0 && g.x >= 0.0) {
                    return Err(Error::invalid(
                        format!("{path}.grounding"),
                        "grounding impedance must be nonnegative",
                    ));
                }
            }
        }
        self.bus_lookup = lookup;

        if !(self.base.frequency_hz > 0.0 && self.base.power_base_kva > 0.0) {
            return Err(Error::invalid("base", "frequency and power base must be positive"));
        }

        for (i, line) in self.lines.iter().enumerate() {
            let path = format!("lines[{i}]");
            let (f, t) = self.endpoints(&path, &line.from, &line.to)?;
            check_phase_list(&line.phases, &format!("{path}.phases"))?;
            self.check_phases_on_bus(&path, &line.phases, f)?;
            self.check_phases_on_bus(&path, &line.phases, t)?;
            let n = line.phases.len();
            for (name, m) in [("r_ohm", &line.r), ("x_ohm", &line.x)] {
                if m.len() != n || m.iter().any(|row| row.len() != n) {
                    return Err(Error::invalid(
                        format!("{path}.{name}"),
                        format!("expected a {n}x{n} matrix"),
                    ));
                }
                for a in 0..n {
                    for b in 0..n {
                        let (u, v) = (m[a][b], m[b][a]);
                        if (u - v).abs() > 1e-12 * (1.0 + u.abs().max(v.abs())) {
                            return Err(Error::invalid(
                                format!("{path}.{name}"),
                                "impedance matrix must be symmetric",
                            ));
                        }
                    }
                }
            }
            if line.r.iter().enumerate().any(|(k, row)| row[k] <= 0.0) {
                return Err(Error::invalid(
                    format!("{path}.r_ohm"),
                    "diagonal resistances must be positive",
                ));
            }
            if line.ampacity <= 0.0 {
                return Err(Error::invalid(format!("{path}.ampacity_a"), "must be positive"));
            }
        }

        for (i, tr) in self.transformers.iter().enumerate() {
            let path = format!("transformers[{i}]");
            let (f, t) = self.endpoints(&path, &tr.from, &tr.to)?;
            if self.buses[f].phases != self.buses[t].phases {
                return Err(Error::PhaseMismatch {
                    path,
                    message: "transformer terminals must carry the same phases".into(),
                });
            }
            if tr.tap <= 0.0 || tr.rating_kva <= 0.0 {
                return Err(Error::invalid(path, "tap and rating must be positive"));
            }
            if tr.r_pu < 0.0 || Complex64::new(tr.r_pu, tr.x_pu).norm() == 0.0 {
                return Err(Error::invalid(path, "series impedance must be nonzero with r >= 0"));
            }
        }

        let mut n_ref = 0;
        for (i, g) in self.generators.iter().enumerate() {
            let path = format!("generators[{i}]");
            let b = self.resolve_bus(&format!("{path}.bus"), &g.bus)?;
            let nph = self.buses[b].phases.len();
            if g.pmax.len() != nph {
                return Err(Error::PhaseMismatch {
                    path: format!("{path}.pmax_kw"),
                    message: format!("expected {nph} entries, one per bus phase"),
                });
            }
            if g.cost_per_kwh < 0.0 {
                return Err(Error::invalid(format!("{path}.cost_per_kwh"), "must be >= 0"));
            }
            if !(g.pf_min > 0.0 && g.pf_min <= 1.0) {
                return Err(Error::invalid(format!("{path}.pf_min"), "must lie in (0, 1]"));
            }
            if g.kf < 1.0 {
                return Err(Error::invalid(format!("{path}.kf"), "must be >= 1"));
            }
            if g.z_r_pu < 0.0 {
                return Err(Error::invalid(format!("{path}.z_r_pu"), "must be >= 0"));
            }
            if g.pmax.iter().any(|&p| p < 0.0) {
                return Err(Error::invalid(format!("{path}.pmax_kw"), "must be >= 0"));
            }
            match g.kind {
                GeneratorKind::Reference => {
                    n_ref += 1;
                    if g.vset_pu <= 0.0 {
                        return Err(Error::invalid(format!("{path}.vset_pu"), "must be positive"));
                    }
                    for (name, v) in [("sc3_mva", g.sc3_mva), ("sc1_mva", g.sc1_mva)] {
                        if matches!(v, Some(s) if s <= 0.0) {
                            return Err(Error::invalid(format!("{path}.{name}"), "must be positive"));
                        }
                    }
                    if let (Some(s3), Some(s1)) = (g.sc3_mva, g.sc1_mva) {
                        // zero-sequence impedance 3/S1 - 2/S3 must stay positive
                        if s1 >= 1.5 * s3 {
                            return Err(Error::invalid(
                                format!("{path}.sc1_mva"),
                                "must be below 1.5 x sc3_mva",
                            ));
                        }
                    }
                }
                GeneratorKind::Dispatchable => {
                    if g.internal_impedance().norm() == 0.0 {
                        return Err(Error::invalid(
                            format!("{path}.z_i_pu"),
                            "internal impedance magnitude must be positive",
                        ));
                    }
                }
            }
        }
        if n_ref == 0 {
            return Err(Error::invalid("generators", "at least one Reference generator is required"));
        }

        for (i, load) in self.loads.iter().enumerate() {
            let path = format!("loads[{i}]");
            let b = self.resolve_bus(&format!("{path}.bus"), &load.bus)?;
            let nph = self.buses[b].phases.len();
            if load.p.len() != nph || load.q.len() != nph {
                return Err(Error::PhaseMismatch {
                    path,
                    message: format!("expected {nph} entries in p_kw and q_kvar"),
                });
            }
            if !(0..nph).any(|k| load.power(k).norm() > 0.0) {
                return Err(Error::invalid(path, "load has zero apparent power on every phase"));
            }
        }

        for (s, scenario) in self.fault_scenarios.iter().enumerate() {
            for (k, fault) in scenario.iter().enumerate() {
                let path = format!("fault_scenarios[{s}][{k}]");
                let b = self.resolve_bus(&format!("{path}.bus"), &fault.bus)?;
                check_phase_list(&fault.phases, &format!("{path}.phases"))?;
                self.check_phases_on_bus(&path, &fault.phases, b)?;
                if fault.phases.len() != fault.kind.phase_count() {
                    return Err(Error::PhaseMismatch {
                        path,
                        message: format!(
                            "{:?} fault needs {} phases",
                            fault.kind,
                            fault.kind.phase_count()
                        ),
                    });
                }
                if fault.r_phase < 0.0 || fault.r_ground.is_some_and(|r| r < 0.0) {
                    return Err(Error::invalid(path, "fault resistances must be >= 0"));
                }
            }
        }

        self.check_connected()?;
        self.bus_kv_ll = units::zone_voltage_bases(self)?;
        Ok(())
    }

    fn resolve_bus(&self, path: &str, id: &str) -> Result<usize> {
        self.bus_index(id).ok_or_else(|| Error::DanglingReference {
            path: path.to_string(),
            kind: "bus",
            id: id.to_string(),
        })
    }

    fn endpoints(&self, path: &str, from: &str, to: &str) -> Result<(usize, usize)> {
        let f = self.resolve_bus(&format!("{path}.from"), from)?;
        let t = self.resolve_bus(&format!("{path}.to"), to)?;
        if f == t {
            return Err(Error::invalid(path, "branch connects a bus to itself"));
        }
        Ok((f, t))
    }

    fn check_phases_on_bus(&self, path: &str, phases: &[Phase], bus: usize) -> Result<()> {
        let bus = &self.buses[bus];
        if let Some(p) = phases.iter().find(|p| !bus.phases.contains(p)) {
            return Err(Error::PhaseMismatch {
                path: path.to_string(),
                message: format!("phase {p} is not present on bus `{}`", bus.id),
            });
        }
        Ok(())
    }

    /// Bus adjacency over lines and transformers.
    pub(crate) fn adjacency(&self) -> Vec<Vec<(usize, Branch)>> {
        let mut adj = vec![Vec::new(); self.buses.len()];
        for (k, l) in self.lines.iter().enumerate() {
            let (f, t) = (self.bus_lookup[&l.from], self.bus_lookup[&l.to]);
            adj[f].push((t, Branch::Line(k)));
            adj[t].push((f, Branch::Line(k)));
        }
        for (k, tr) in self.transformers.iter().enumerate() {
            let (f, t) = (self.bus_lookup[&tr.from], self.bus_lookup[&tr.to]);
            adj[f].push((t, Branch::Transformer(k)));
            adj[t].push((f, Branch::Transformer(k)));
        }
        adj
    }

    fn check_connected(&self) -> Result<()> {
        let root = self
            .reference_generators()
            .map(|(_, g)| self.bus_lookup[&g.bus])
            .next()
            .unwrap_or(0);
        let adj = self.adjacency();
        let mut seen = vec![false; self.buses.len()];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(b) = queue.pop_front() {
            for &(n, _) in &adj[b] {
                if !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
        let missing: Vec<String> = self
            .buses
            .iter()
            .zip(&seen)
            .filter(|(_, &s)| !s)
            .map(|(b, _)| b.id.clone())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Disconnected {
                root: self.buses[root].id.clone(),
                buses: missing,
            })
        }
    }

    /// Voltage angle offset of every bus relative to the reference, accumulated
    /// across transformer vector groups (degrees).
    pub fn angle_offsets_deg(&self) -> Vec<f64> {
        let adj = self.adjacency();
        let mut offset = vec![f64::NAN; self.buses.len()];
        let mut queue = VecDeque::new();
        for (_, g) in self.reference_generators() {
            let b = self.bus_lookup[&g.bus];
            if offset[b].is_nan() {
                offset[b] = g.theta_deg;
                queue.push_back(b);
            }
        }
        while let Some(b) = queue.pop_front() {
            for &(n, br) in &adj[b] {
                if !offset[n].is_nan() {
                    continue;
                }
                let shift = match br {
                    Branch::Line(_) => 0.0,
                    Branch::Transformer(k) => {
                        let tr = &self.transformers[k];
                        let deg = -30.0 * f64::from(tr.vector_group.clock());
                        if self.bus_lookup[&tr.from] == b {
                            deg
                        } else {
                            -deg
                        }
                    }
                };
                offset[n] = offset[b] + shift;
                queue.push_back(n);
            }
        }
        offset.iter().map(|o| if o.is_nan() { 0.0 } else { *o }).collect()
    }

    /// Sum of apparent power over every load phase, in the network's units.
    pub fn total_load_apparent(&self) -> f64 {
        self.loads
            .iter()
            .map(|l| (0..l.p.len()).map(|k| l.power(k).norm()).sum::<f64>())
            .sum()
    }

    /// Sum of dispatchable active power capacity.
    pub fn total_dg_capacity(&self) -> f64 {
        self.dispatchable_generators()
            .map(|(_, g)| g.pmax.iter().sum::<f64>())
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Branch {
    Line(usize),
    Transformer(usize),
}

fn check_phase_list(phases: &[Phase], path: &str) -> Result<()> {
    if phases.is_empty() {
        return Err(Error::invalid(path, "phase list must not be empty"));
    }
    let mut sorted = phases.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != phases.len() {
        return Err(Error::invalid(path, "duplicate phase"));
    }
    Ok(())
}
