//! JSON network document. Field names are part of the external interface.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{
    from_per_unit, to_per_unit, BaseData, Bus, FaultSpec, FaultType, Generator, GeneratorKind,
    Grounding, Line, Load, LoadModel, Network, Phase, Transformer, VectorGroup, VoltageBase,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub base: BaseDoc,
    pub buses: Vec<BusDoc>,
    #[serde(default)]
    pub lines: Vec<LineDoc>,
    #[serde(default)]
    pub transformers: Vec<TransformerDoc>,
    pub generators: Vec<GeneratorDoc>,
    #[serde(default)]
    pub loads: Vec<LoadDoc>,
    #[serde(default)]
    pub fault_scenarios: Vec<Vec<FaultDoc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseDoc {
    pub frequency_hz: f64,
    pub power_base_kva: f64,
    pub voltage_bases: Vec<VoltageBaseDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoltageBaseDoc {
    pub zone: String,
    pub kv_ll: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundingDoc {
    pub r_ohm: f64,
    pub x_ohm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusDoc {
    pub id: String,
    pub phases: Vec<Phase>,
    pub vmin_pu: f64,
    pub vmax_pu: f64,
    #[serde(default)]
    pub grounding: Option<GroundingDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineDoc {
    pub id: String,
    pub from: String,
    pub to: String,
    pub phases: Vec<Phase>,
    pub r_ohm: Vec<Vec<f64>>,
    pub x_ohm: Vec<Vec<f64>>,
    pub ampacity_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformerDoc {
    pub id: String,
    pub from: String,
    pub to: String,
    pub vector_group: VectorGroup,
    pub tap: f64,
    pub r_pu: f64,
    pub x_pu: f64,
    pub rating_kva: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorDoc {
    pub id: String,
    pub bus: String,
    pub kind: GeneratorKind,
    pub cost_per_kwh: f64,
    pub pmax_kw: Vec<f64>,
    pub pf_min: f64,
    pub kf: f64,
    pub z_r_pu: f64,
    pub z_i_pu: f64,
    #[serde(default)]
    pub vset_pu: Option<f64>,
    #[serde(default)]
    pub theta_deg: Option<f64>,
    #[serde(default)]
    pub sc3_mva: Option<f64>,
    #[serde(default)]
    pub sc1_mva: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadDoc {
    pub id: String,
    pub bus: String,
    pub p_kw: Vec<f64>,
    pub q_kvar: Vec<f64>,
    pub model: LoadModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultDoc {
    pub id: String,
    pub bus: String,
    #[serde(rename = "type")]
    pub kind: FaultType,
    pub phases: Vec<Phase>,
    pub r_phase_ohm: f64,
    #[serde(default)]
    pub r_ground_ohm: Option<f64>,
}

/// Parses and validates a network document, returning it in per-unit.
pub fn parse_network(document: &str) -> Result<Network> {
    to_per_unit(&parse_network_physical(document)?)
}

/// Parses and validates a network document, keeping physical units.
pub fn parse_network_physical(document: &str) -> Result<Network> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let doc: NetworkDocument = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    doc.into_network()
}

/// Serialises a network (either unit system) as a physical-unit document.
pub fn network_to_json(network: &Network) -> Result<String> {
    let doc = NetworkDocument::from_network(&from_per_unit(network)?);
    Ok(serde_json::to_string_pretty(&doc)?)
}

impl NetworkDocument {
    pub fn into_network(self) -> Result<Network> {
        let base = BaseData {
            frequency_hz: self.base.frequency_hz,
            power_base_kva: self.base.power_base_kva,
            voltage_bases: self
                .base
                .voltage_bases
                .into_iter()
                .map(|v| VoltageBase {
                    zone: v.zone,
                    kv_ll: v.kv_ll,
                })
                .collect(),
        };
        let buses = self
            .buses
            .into_iter()
            .map(|b| Bus {
                id: b.id,
                phases: b.phases,
                vmin_pu: b.vmin_pu,
                vmax_pu: b.vmax_pu,
                grounding: b.grounding.map(|g| Grounding {
                    r: g.r_ohm,
                    x: g.x_ohm,
                }),
            })
            .collect();
        let lines = self
            .lines
            .into_iter()
            .map(|l| Line {
                id: l.id,
                from: l.from,
                to: l.to,
                phases: l.phases,
                r: l.r_ohm,
                x: l.x_ohm,
                ampacity: l.ampacity_a,
            })
            .collect();
        let transformers = self
            .transformers
            .into_iter()
            .map(|t| Transformer {
                id: t.id,
                from: t.from,
                to: t.to,
                vector_group: t.vector_group,
                tap: t.tap,
                r_pu: t.r_pu,
                x_pu: t.x_pu,
                rating_kva: t.rating_kva,
            })
            .collect();
        let generators = self
            .generators
            .into_iter()
            .map(|g| Generator {
                id: g.id,
                bus: g.bus,
                kind: g.kind,
                cost_per_kwh: g.cost_per_kwh,
                pmax: g.pmax_kw,
                pf_min: g.pf_min,
                kf: g.kf,
                z_r_pu: g.z_r_pu,
                z_i_pu: g.z_i_pu,
                vset_pu: g.vset_pu.unwrap_or(1.0),
                theta_deg: g.theta_deg.unwrap_or(0.0),
                sc3_mva: g.sc3_mva,
                sc1_mva: g.sc1_mva,
            })
            .collect();
        let loads = self
            .loads
            .into_iter()
            .map(|l| Load {
                id: l.id,
                bus: l.bus,
                p: l.p_kw,
                q: l.q_kvar,
                model: l.model,
            })
            .collect();
        let scenarios = self
            .fault_scenarios
            .into_iter()
            .map(|s| {
                s.into_iter()
                    .map(|f| FaultSpec {
                        id: f.id,
                        bus: f.bus,
                        kind: f.kind,
                        phases: f.phases,
                        r_phase: f.r_phase_ohm,
                        r_ground: f.r_ground_ohm,
                    })
                    .collect()
            })
            .collect();
        Network::new(
            self.name.unwrap_or_else(|| "network".to_string()),
            base,
            buses,
            lines,
            transformers,
            generators,
            loads,
            scenarios,
        )
    }

    /// Document view of a physical-unit network.
    pub fn from_network(net: &Network) -> Self {
        NetworkDocument {
            name: Some(net.name.clone()),
            base: BaseDoc {
                frequency_hz: net.base.frequency_hz,
                power_base_kva: net.base.power_base_kva,
                voltage_bases: net
                    .base
                    .voltage_bases
                    .iter()
                    .map(|v| VoltageBaseDoc {
                        zone: v.zone.clone(),
                        kv_ll: v.kv_ll,
                    })
                    .collect(),
            },
            buses: net
                .buses
                .iter()
                .map(|b| BusDoc {
                    id: b.id.clone(),
                    phases: b.phases.clone(),
                    vmin_pu: b.vmin_pu,
                    vmax_pu: b.vmax_pu,
                    grounding: b.grounding.map(|g| GroundingDoc {
                        r_ohm: g.r,
                        x_ohm: g.x,
                    }),
                })
                .collect(),
            lines: net
                .lines
                .iter()
                .map(|l| LineDoc {
                    id: l.id.clone(),
                    from: l.from.clone(),
                    to: l.to.clone(),
                    phases: l.phases.clone(),
                    r_ohm: l.r.clone(),
                    x_ohm: l.x.clone(),
                    ampacity_a: l.ampacity,
                })
                .collect(),
            transformers: net
                .transformers
                .iter()
                .map(|t| TransformerDoc {
                    id: t.id.clone(),
                    from: t.from.clone(),
                    to: t.to.clone(),
                    vector_group: t.vector_group,
                    tap: t.tap,
                    r_pu: t.r_pu,
                    x_pu: t.x_pu,
                    rating_kva: t.rating_kva,
                })
                .collect(),
            generators: net
                .generators
                .iter()
                .map(|g| GeneratorDoc {
                    id: g.id.clone(),
                    bus: g.bus.clone(),
                    kind: g.kind,
                    cost_per_kwh: g.cost_per_kwh,
                    pmax_kw: g.pmax.clone(),
                    pf_min: g.pf_min,
                    kf: g.kf,
                    z_r_pu: g.z_r_pu,
                    z_i_pu: g.z_i_pu,
                    vset_pu: Some(g.vset_pu),
                    theta_deg: Some(g.theta_deg),
                    sc3_mva: g.sc3_mva,
                    sc1_mva: g.sc1_mva,
                })
                .collect(),
            loads: net
                .loads
                .iter()
                .map(|l| LoadDoc {
                    id: l.id.clone(),
                    bus: l.bus.clone(),
                    p_kw: l.p.clone(),
                    q_kvar: l.q.clone(),
                    model: l.model,
                })
                .collect(),
            fault_scenarios: net
                .fault_scenarios
                .iter()
                .map(|s| {
                    s.iter()
                        .map(|f| FaultDoc {
                            id: f.id.clone(),
                            bus: f.bus.clone(),
                            kind: f.kind,
                            phases: f.phases.clone(),
                            r_phase_ohm: f.r_phase,
                            r_ground_ohm: f.r_ground,
                        })
                        .collect()
                })
                .collect(),
        }
    }
}
