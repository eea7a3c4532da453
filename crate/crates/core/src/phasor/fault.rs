//! Fault admittance matrices and the star-mesh transformation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{FaultSpec, FaultType, Phase};

/// Real conductance matrix over the faulted phases; `I_fault = G * V_bus`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultAdmittance {
    pub fault_id: String,
    pub bus: String,
    pub phases: Vec<Phase>,
    pub g: Vec<Vec<f64>>,
}

impl FaultAdmittance {
    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.phases.len();
        (0..n).all(|i| (0..n).all(|j| (self.g[i][j] - self.g[j][i]).abs() <= tol))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.g.iter().map(|r| r.iter().sum()).collect()
    }

    /// Fault currents for the given faulted-phase voltages.
    pub fn currents(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.g
            .iter()
            .map(|row| row.iter().zip(v).map(|(g, v)| v * *g).sum())
            .collect()
    }
}

/// Pairwise admittances between the outer nodes of a star once its centre is
/// eliminated: `y_jk = y_j * y_k / sum(y)`. Returned as a symmetric matrix with a
/// zero diagonal.
pub fn star_to_mesh(branch_impedances: &[Complex64]) -> Result<Vec<Vec<Complex64>>> {
    if branch_impedances.len() < 2 {
        return Err(Error::invalid(
            "star",
            format!("need at least two branches, got {}", branch_impedances.len()),
        ));
    }
    if let Some(k) = branch_impedances.iter().position(|z| z.norm() == 0.0) {
        return Err(Error::invalid(format!("star[{k}]"), "zero branch impedance"));
    }
    let y: Vec<Complex64> = branch_impedances.iter().map(|z| z.inv()).collect();
    let total: Complex64 = y.iter().sum();
    let n = y.len();
    let mut mesh = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for j in 0..n {
        for k in (j + 1)..n {
            let v = y[j] * y[k] / total;
            mesh[j][k] = v;
            mesh[k][j] = v;
        }
    }
    Ok(mesh)
}

/// Conductance matrix of a resistive fault. Every resistance below `r_floor` is
/// raised to it; all quantities share one unit system.
pub fn build_fault_admittance(fault: &FaultSpec, r_floor: f64) -> Result<FaultAdmittance> {
    let np = fault.phases.len();
    if np != fault.kind.phase_count() {
        return Err(Error::UnsupportedFault {
            id: fault.id.clone(),
            message: format!("{:?} fault on {} phases", fault.kind, np),
        });
    }
    if fault.r_phase < 0.0 || fault.r_ground.is_some_and(|r| r < 0.0) {
        return Err(Error::UnsupportedFault {
            id: fault.id.clone(),
            message: "negative resistance".into(),
        });
    }
    let floor = |r: f64| r.max(r_floor);
    let rg = fault.r_ground.unwrap_or(0.0);

    let g = match fault.kind {
        FaultType::LG => {
            let y = 1.0 / floor(fault.r_phase + rg);
            vec![vec![y]]
        }
        FaultType::LL => {
            let y = 1.0 / floor(fault.r_phase);
            vec![vec![y, -y], vec![-y, y]]
        }
        FaultType::LLG | FaultType::ThreePhase | FaultType::ThreePhaseGround => {
            let rp = floor(fault.r_phase);
            let mut star: Vec<Complex64> = vec![Complex64::new(rp, 0.0); np];
            if fault.kind.is_grounded() {
                star.push(Complex64::new(floor(rg), 0.0));
            }
            let mesh = star_to_mesh(&star)?;
            let nodes = star.len();
            let mut g = vec![vec![0.0; np]; np];
            for i in 0..np {
                for k in 0..nodes {
                    if k == i {
                        continue;
                    }
                    let y = mesh[i][k].re;
                    g[i][i] += y;
                    if k < np {
                        g[i][k] -= y;
                    }
                }
            }
            g
        }
    };
    Ok(FaultAdmittance {
        fault_id: fault.id.clone(),
        bus: fault.bus.clone(),
        phases: fault.phases.clone(),
        g,
    })
}
