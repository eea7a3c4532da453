//! Nonlinear programs whose objective and constraints are at most quadratic.
//!
//! Every function is stored as a list of constant, linear and bilinear terms, so
//! gradients are cheap and every Hessian is constant. [`solve_nlp`] runs a
//! primal-dual interior-point method on the resulting problem.

mod ipm;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use ipm::{constraint_jacobian, solve_nlp, NlpSolution, SolverOptions};

/// `constant + sum(c * x_i) + sum(c * x_i * x_j)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuadExpr {
    pub constant: f64,
    pub linear: Vec<(usize, f64)>,
    pub quad: Vec<(usize, usize, f64)>,
}

impl QuadExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn lin(mut self, i: usize, c: f64) -> Self {
        self.add_lin(i, c);
        self
    }

    pub fn quad(mut self, i: usize, j: usize, c: f64) -> Self {
        self.add_quad(i, j, c);
        self
    }

    pub fn add_lin(&mut self, i: usize, c: f64) {
        if c != 0.0 {
            self.linear.push((i, c));
        }
    }

    pub fn add_quad(&mut self, i: usize, j: usize, c: f64) {
        if c != 0.0 {
            self.quad.push((i.min(j), i.max(j), c));
        }
    }

    pub fn is_linear(&self) -> bool {
        self.quad.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = self.constant;
        for &(i, c) in &self.linear {
            v += c * x[i];
        }
        for &(i, j, c) in &self.quad {
            v += c * x[i] * x[j];
        }
        v
    }

    /// Adds `scale * grad` into the dense vector `out`.
    pub fn add_gradient(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        for &(i, c) in &self.linear {
            out[i] += scale * c;
        }
        for &(i, j, c) in &self.quad {
            out[i] += scale * c * x[j];
            out[j] += scale * c * x[i];
        }
    }

    /// Sparse gradient with merged duplicates, sorted by column.
    pub fn gradient(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let mut g: Vec<(usize, f64)> = Vec::new();
        for &(i, c) in &self.linear {
            g.push((i, c));
        }
        for &(i, j, c) in &self.quad {
            g.push((i, c * x[j]));
            g.push((j, c * x[i]));
        }
        merge(g)
    }

    /// Entries of the (constant) Hessian, both triangles, duplicates merged.
    pub fn hessian(&self) -> Vec<(usize, usize, f64)> {
        let mut h = Vec::new();
        for &(i, j, c) in &self.quad {
            if i == j {
                h.push((i, i, 2.0 * c));
            } else {
                h.push((i, j, c));
                h.push((j, i, c));
            }
        }
        h.sort_by_key(|&(i, j, _)| (i, j));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(h.len());
        for (i, j, v) in h {
            match out.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => out.push((i, j, v)),
            }
        }
        out
    }

    /// Columns with a structurally nonzero derivative.
    pub fn columns(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self
            .linear
            .iter()
            .map(|t| t.0)
            .chain(self.quad.iter().flat_map(|t| [t.0, t.1]))
            .collect();
        c.sort_unstable();
        c.dedup();
        c
    }
}

impl std::ops::Add for QuadExpr {
    type Output = QuadExpr;

    fn add(mut self, rhs: QuadExpr) -> QuadExpr {
        self.constant += rhs.constant;
        self.linear.extend(rhs.linear);
        self.quad.extend(rhs.quad);
        self
    }
}

impl std::ops::Mul<f64> for QuadExpr {
    type Output = QuadExpr;

    fn mul(mut self, s: f64) -> QuadExpr {
        self.constant *= s;
        for t in &mut self.linear {
            t.1 *= s;
        }
        for t in &mut self.quad {
            t.2 *= s;
        }
        self
    }
}

fn merge(mut g: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    g.sort_by_key(|t| t.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(g.len());
    for (i, v) in g {
        match out.last_mut() {
            Some(last) if last.0 == i => last.1 += v,
            _ => out.push((i, v)),
        }
    }
    out
}

/// Constraint families, used for diagnostics and per-family checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    GenPowerDef,
    GenBalance,
    GenPowerFactor,
    RefSource,
    Kcl,
    VoltageDrop,
    VoltageBound,
    LineThermal,
    TransformerVoltage,
    TransformerCurrent,
    TransformerThermal,
    LoadPowerDef,
    GenFaultModel,
    FaultCurrent,
    FaultMagnitude,
    FaultCap,
    VariableBound,
    Other,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub expr: QuadExpr,
    pub family: Family,
    /// Network element (and block) the row belongs to.
    pub element: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

/// `min f(x)` subject to `g(x) = 0`, `h(x) <= 0`, `lower <= x <= upper`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NlpProblem {
    pub variables: Vec<Variable>,
    pub objective: QuadExpr,
    pub equalities: Vec<Constraint>,
    pub inequalities: Vec<Constraint>,
    pub x0: Vec<f64>,
    names: HashMap<String, usize>,
}

impl NlpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, x0: f64) -> usize {
        let name = name.into();
        let i = self.variables.len();
        debug_assert!(!self.names.contains_key(&name), "duplicate variable {name}");
        self.names.insert(name.clone(), i);
        self.variables.push(Variable { name, lower, upper });
        self.x0.push(x0);
        i
    }

    pub fn free_var(&mut self, name: impl Into<String>, x0: f64) -> usize {
        self.add_var(name, f64::NEG_INFINITY, f64::INFINITY, x0)
    }

    pub fn var(&self, name: &str) -> Option<usize> {
        self.names.get(name).copied()
    }

    pub fn add_eq(&mut self, family: Family, element: impl Into<String>, expr: QuadExpr) {
        self.equalities.push(Constraint {
            expr,
            family,
            element: element.into(),
        });
    }

    pub fn add_le(&mut self, family: Family, element: impl Into<String>, expr: QuadExpr) {
        self.inequalities.push(Constraint {
            expr,
            family,
            element: element.into(),
        });
    }

    pub fn eq_residuals(&self, x: &[f64]) -> Vec<f64> {
        self.equalities.iter().map(|c| c.expr.eval(x)).collect()
    }

    pub fn ineq_residuals(&self, x: &[f64]) -> Vec<f64> {
        self.inequalities.iter().map(|c| c.expr.eval(x)).collect()
    }

    /// Largest equality residual, inequality violation or bound violation.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let eq = self.eq_residuals(x).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let iq = self.ineq_residuals(x).iter().fold(0.0f64, |a, v| a.max(*v));
        let bd = self
            .variables
            .iter()
            .zip(x)
            .fold(0.0f64, |a, (v, x)| a.max(v.lower - x).max(x - v.upper));
        eq.max(iq).max(bd)
    }

    /// Lagrangian Hessian `H_f + sum(lambda_i H_gi) + sum(mu_i H_hi)` as merged
    /// triplets. Independent of `x` by construction.
    pub fn lagrangian_hessian(&self, lambda: &[f64], mu: &[f64]) -> Vec<(usize, usize, f64)> {
        let mut all: Vec<(usize, usize, f64)> = self.objective.hessian();
        for (c, w) in self.equalities.iter().zip(lambda) {
            all.extend(c.expr.hessian().into_iter().map(|(i, j, v)| (i, j, v * w)));
        }
        for (c, w) in self.inequalities.iter().zip(mu) {
            all.extend(c.expr.hessian().into_iter().map(|(i, j, v)| (i, j, v * w)));
        }
        all.sort_by_key(|&(i, j, _)| (i, j));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(all.len());
        for (i, j, v) in all {
            match out.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => out.push((i, j, v)),
            }
        }
        out
    }

    /// Rows per family, equalities first.
    pub fn family_counts(&self) -> Vec<(Family, usize, usize)> {
        let mut m: HashMap<Family, (usize, usize)> = HashMap::new();
        for c in &self.equalities {
            m.entry(c.family).or_default().0 += 1;
        }
        for c in &self.inequalities {
            m.entry(c.family).or_default().1 += 1;
        }
        let mut v: Vec<_> = m.into_iter().map(|(f, (e, i))| (f, e, i)).collect();
        v.sort();
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterationLimit,
    NumericFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub status: SolveStatus,
    pub iterations: usize,
    /// Infinity norm of the Lagrangian gradient, scaled by `1 + max multiplier`.
    pub stationarity: f64,
    /// Largest equality residual or inequality violation.
    pub primal_feasibility: f64,
    /// Largest negative inequality multiplier (zero for interior iterates).
    pub dual_feasibility: f64,
    /// Largest slack-multiplier product.
    pub complementarity: f64,
    pub objective: f64,
    pub solve_seconds: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_and_hessian_of_quadratic() {
        // f = 1 + 2x0 + 3 x0 x1 + x1^2
        let e = QuadExpr::new().constant(1.0).lin(0, 2.0).quad(0, 1, 3.0).quad(1, 1, 1.0);
        let x = [0.5, -2.0];
        assert!((e.eval(&x) - (1.0 + 1.0 - 3.0 + 4.0)).abs() < 1e-15);
        assert_eq!(e.gradient(&x), vec![(0, 2.0 + 3.0 * -2.0), (1, 3.0 * 0.5 + 2.0 * -2.0)]);
        assert_eq!(e.hessian(), vec![(0, 1, 3.0), (1, 0, 3.0), (1, 1, 2.0)]);
    }

    #[test]
    fn lagrangian_hessian_does_not_depend_on_x() {
        let mut p = NlpProblem::new();
        let a = p.free_var("a", 0.0);
        let b = p.free_var("b", 0.0);
        p.objective = QuadExpr::new().quad(a, a, 1.0);
        p.add_eq(Family::Other, "c", QuadExpr::new().quad(a, b, 2.0).constant(-1.0));
        p.add_le(Family::Other, "d", QuadExpr::new().quad(b, b, 1.0).constant(-4.0));
        let h = p.lagrangian_hessian(&[0.5], &[2.0]);
        assert_eq!(h, vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 4.0)]);
    }
}
