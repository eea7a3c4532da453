//! Side-by-side comparison of study results on the same network.
//!
//! The first two results are read as the lower and upper boundary studies; fault
//! rows of every further result are checked against them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::study::StudyResult;

/// Slack on the boundary check, relative to the boundary values.
pub const BOUND_SLACK: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub key: String,
    pub values: Vec<Option<f64>>,
    /// Difference to the first result.
    pub deltas: Vec<Option<f64>>,
    pub annotation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub labels: Vec<String>,
    /// Phase-A (or first phase) voltage magnitude per bus.
    pub voltages: Vec<CompareRow>,
    /// Headline fault current (A) per fault.
    pub faults: Vec<CompareRow>,
    /// Active power (kW) per generator.
    pub dispatch: Vec<CompareRow>,
    /// Fault rows that leave the boundary band.
    pub violations: Vec<String>,
}

fn row(key: String, values: Vec<Option<f64>>) -> CompareRow {
    let first = values[0];
    let deltas = values
        .iter()
        .map(|v| match (v, first) {
            (Some(v), Some(f)) => Some(v - f),
            _ => None,
        })
        .collect();
    CompareRow {
        key,
        values,
        deltas,
        annotation: None,
    }
}

pub fn compare_results(labels: Vec<String>, results: &[StudyResult]) -> Result<Comparison> {
    if results.len() < 2 {
        return Err(Error::Incompatible(format!(
            "need at least 2 result files to compare, got {}",
            results.len()
        )));
    }
    let base = &results[0];
    for (r, label) in results.iter().zip(&labels).skip(1) {
        if r.buses != base.buses {
            let only_first: Vec<&String> = base.buses.iter().filter(|b| !r.buses.contains(b)).collect();
            let only_other: Vec<&String> = r.buses.iter().filter(|b| !base.buses.contains(b)).collect();
            return Err(Error::Incompatible(format!(
                "bus sets differ between `{}` and `{}`: only in the first {:?}, only in the second {:?}",
                labels[0], label, only_first, only_other
            )));
        }
    }

    let voltages = base
        .voltages
        .iter()
        .map(|v0| {
            let values = results
                .iter()
                .map(|r| {
                    r.voltages
                        .iter()
                        .find(|v| v.bus == v0.bus)
                        .and_then(|v| v.magnitude_pu.first().copied())
                })
                .collect();
            row(v0.bus.clone(), values)
        })
        .collect();

    let mut fault_keys: BTreeMap<(usize, String), ()> = BTreeMap::new();
    for r in results {
        for f in &r.faults {
            fault_keys.insert((f.scenario, f.fault_id.clone()), ());
        }
    }
    let mut violations = Vec::new();
    let faults = fault_keys
        .into_keys()
        .map(|(scenario, id)| {
            let values: Vec<Option<f64>> = results
                .iter()
                .map(|r| {
                    r.faults
                        .iter()
                        .find(|f| f.scenario == scenario && f.fault_id == id)
                        .map(|f| f.headline_a)
                })
                .collect();
            let mut cr = row(id.clone(), values.clone());
            if let (Some(a), Some(b)) = (values[0], values[1]) {
                let (lo, hi) = (a.min(b), a.max(b));
                let inside: Vec<bool> = values[2..]
                    .iter()
                    .flatten()
                    .map(|&v| v >= lo * (1.0 - BOUND_SLACK) && v <= hi * (1.0 + BOUND_SLACK))
                    .collect();
                if !inside.is_empty() {
                    if inside.iter().all(|&x| x) {
                        cr.annotation = Some("within bounds".into());
                    } else {
                        cr.annotation = Some("outside bounds".into());
                        violations.push(id.clone());
                    }
                }
            }
            cr
        })
        .collect();

    let dispatch = base
        .dispatch
        .iter()
        .map(|d0| {
            let values = results
                .iter()
                .map(|r| r.dispatch.iter().find(|d| d.generator == d0.generator).map(|d| d.total_kw))
                .collect();
            row(d0.generator.clone(), values)
        })
        .collect();

    Ok(Comparison {
        labels,
        voltages,
        faults,
        dispatch,
        violations,
    })
}

/// Reads and compares result files.
pub fn cmd_compare<P: AsRef<Path>>(paths: &[P]) -> Result<Comparison> {
    if paths.len() < 2 {
        return Err(Error::Incompatible(format!(
            "need at least 2 result files to compare, got {}",
            paths.len()
        )));
    }
    let results = paths
        .iter()
        .map(|p| StudyResult::read(p.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let labels = paths.iter().map(|p| p.as_ref().display().to_string()).collect();
    compare_results(labels, &results)
}

impl Comparison {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let header = |s: &mut String, title: &str| {
            s.push_str(&format!("\n{title:<16}"));
            for l in &self.labels {
                s.push_str(&format!(" {:>20}", truncate(l, 20)));
            }
            s.push('\n');
        };
        let body = |s: &mut String, rows: &[CompareRow], prec: usize| {
            for r in rows {
                s.push_str(&format!("{:<16}", r.key));
                for (k, v) in r.values.iter().enumerate() {
                    let cell = match (v, r.deltas[k]) {
                        (Some(v), Some(d)) if k > 0 => format!("{v:.prec$} ({d:+.prec$})"),
                        (Some(v), _) => format!("{v:.prec$}"),
                        (None, _) => "-".into(),
                    };
                    s.push_str(&format!(" {cell:>20}"));
                }
                if let Some(a) = &r.annotation {
                    s.push_str(&format!("  {a}"));
                }
                s.push('\n');
            }
        };
        header(&mut s, "Bus |V| (pu)");
        body(&mut s, &self.voltages, 4);
        if !self.faults.is_empty() {
            header(&mut s, "Fault (A)");
            body(&mut s, &self.faults, 1);
        }
        header(&mut s, "Generator (kW)");
        body(&mut s, &self.dispatch, 3);
        if !self.violations.is_empty() {
            s.push_str(&format!("\nboundary violations: {}\n", self.violations.join(", ")));
        }
        s
    }
}

fn truncate(s: &str, n: usize) -> &str {
    let start = s.len().saturating_sub(n);
    let mut i = start;
    while !s.is_char_boundary(i) {
        i += 1;
    }
    &s[i..]
}
