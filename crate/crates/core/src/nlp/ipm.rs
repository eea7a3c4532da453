//! Primal-dual interior-point method with slack variables on the inequalities.
//!
//! Newton steps on the perturbed KKT conditions, reduced to the
//! `[M J_g^T; J_g 0]` system and factorised with a sparse LU whose symbolic
//! analysis is computed once. Step lengths follow the fraction-to-boundary rule.

use std::time::Instant;

use faer::sparse::linalg::solvers::{Lu, SpSolver, SymbolicLu};
use faer::sparse::{SparseColMat, SymbolicSparseColMat, ValuesOrder};
use faer::Mat;
use log::debug;
use serde::{Deserialize, Serialize};

use super::{NlpProblem, QuadExpr, SolveDiagnostics, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Absolute tolerance on equality residuals and inequality violations.
    pub feas_tol: f64,
    /// Tolerance on the scaled Lagrangian gradient.
    pub grad_tol: f64,
    /// Tolerance on the scaled complementarity `z'mu / (1 + |x|)`.
    pub comp_tol: f64,
    pub max_iter: usize,
    /// Fraction-to-boundary factor.
    pub xi: f64,
    /// Centering parameter.
    pub sigma: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feas_tol: 1e-9,
            grad_tol: 1e-8,
            comp_tol: 1e-9,
            max_iter: 200,
            xi: 0.99995,
            sigma: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlpSolution {
    pub x: Vec<f64>,
    /// Equality multipliers.
    pub lambda: Vec<f64>,
    /// Multipliers of the problem inequalities (variable bounds excluded).
    pub mu: Vec<f64>,
    pub diagnostics: SolveDiagnostics,
}

struct Row {
    cols: Vec<usize>,
    lin: Vec<(usize, f64)>,
    quad: Vec<(usize, usize, usize, usize, f64)>,
    constant: f64,
    hess: Vec<(usize, usize, f64)>,
}

impl Row {
    fn new(e: &QuadExpr) -> Self {
        let cols = e.columns();
        let pos = |c: usize| cols.binary_search(&c).unwrap();
        Row {
            lin: e.linear.iter().map(|&(i, c)| (pos(i), c)).collect(),
            quad: e
                .quad
                .iter()
                .map(|&(i, j, c)| (i, j, pos(i), pos(j), c))
                .collect(),
            constant: e.constant,
            hess: e.hessian(),
            cols,
        }
    }

    fn bound(i: usize, sign: f64, rhs: f64) -> Self {
        Row {
            cols: vec![i],
            lin: vec![(0, sign)],
            quad: Vec::new(),
            constant: rhs,
            hess: Vec::new(),
        }
    }

    /// Value, with the gradient written into `grad` (aligned with `cols`).
    fn eval(&self, x: &[f64], grad: &mut Vec<f64>) -> f64 {
        grad.clear();
        grad.resize(self.cols.len(), 0.0);
        let mut v = self.constant;
        for &(p, c) in &self.lin {
            v += c * x[self.cols[p]];
            grad[p] += c;
        }
        for &(i, j, pi, pj, c) in &self.quad {
            v += c * x[i] * x[j];
            grad[pi] += c * x[j];
            grad[pj] += c * x[i];
        }
        v
    }
}

/// Sparse gradient of every equality and then every inequality row of `p` at `x`,
/// computed by the same row evaluation the solver uses.
pub fn constraint_jacobian(p: &NlpProblem, x: &[f64]) -> Vec<Vec<(usize, f64)>> {
    let mut grad = Vec::new();
    p.equalities
        .iter()
        .chain(&p.inequalities)
        .map(|c| {
            let row = Row::new(&c.expr);
            row.eval(x, &mut grad);
            row.cols.iter().copied().zip(grad.iter().copied()).collect()
        })
        .collect()
}

struct Evaluated {
    f: f64,
    df: Vec<f64>,
    g: Vec<f64>,
    dg: Vec<Vec<f64>>,
    h: Vec<f64>,
    dh: Vec<Vec<f64>>,
}

struct Compiled {
    nx: usize,
    obj: Row,
    eq: Vec<Row>,
    iq: Vec<Row>,
    n_problem_iq: usize,
}

impl Compiled {
    fn new(p: &NlpProblem) -> Self {
        let mut iq: Vec<Row> = p.inequalities.iter().map(|c| Row::new(&c.expr)).collect();
        let n_problem_iq = iq.len();
        for (i, v) in p.variables.iter().enumerate() {
            if v.upper.is_finite() {
                iq.push(Row::bound(i, 1.0, -v.upper));
            }
            if v.lower.is_finite() {
                iq.push(Row::bound(i, -1.0, v.lower));
            }
        }
        Compiled {
            nx: p.num_vars(),
            obj: Row::new(&p.objective),
            eq: p.equalities.iter().map(|c| Row::new(&c.expr)).collect(),
            iq,
            n_problem_iq,
        }
    }

    fn evaluate(&self, x: &[f64]) -> Evaluated {
        let mut tmp = Vec::new();
        let f = self.obj.eval(x, &mut tmp);
        let mut df = vec![0.0; self.nx];
        for (p, &c) in self.obj.cols.iter().enumerate() {
            df[c] += tmp[p];
        }
        let mut g = Vec::with_capacity(self.eq.len());
        let mut dg = Vec::with_capacity(self.eq.len());
        for r in &self.eq {
            g.push(r.eval(x, &mut tmp));
            dg.push(tmp.clone());
        }
        let mut h = Vec::with_capacity(self.iq.len());
        let mut dh = Vec::with_capacity(self.iq.len());
        for r in &self.iq {
            h.push(r.eval(x, &mut tmp));
            dh.push(tmp.clone());
        }
        Evaluated { f, df, g, dg, h, dh }
    }

    /// Sparsity pattern of the reduced KKT matrix, in the order values are produced
    /// by [`Compiled::kkt_values`].
    fn kkt_pattern(&self) -> Vec<(usize, usize)> {
        let mut idx = Vec::new();
        for r in std::iter::once(&self.obj).chain(&self.eq).chain(&self.iq) {
            idx.extend(r.hess.iter().map(|&(i, j, _)| (i, j)));
        }
        for r in &self.iq {
            for &a in &r.cols {
                for &b in &r.cols {
                    idx.push((a, b));
                }
            }
        }
        idx.extend((0..self.nx).map(|i| (i, i)));
        for (k, r) in self.eq.iter().enumerate() {
            for &c in &r.cols {
                idx.push((self.nx + k, c));
                idx.push((c, self.nx + k));
            }
            idx.push((self.nx + k, self.nx + k));
        }
        idx
    }

    #[allow(clippy::too_many_arguments)]
    fn kkt_values(
        &self,
        ev: &Evaluated,
        lambda: &[f64],
        mu: &[f64],
        z: &[f64],
        delta: f64,
        delta_c: f64,
        out: &mut Vec<f64>,
    ) {
        out.clear();
        out.extend(self.obj.hess.iter().map(|t| t.2));
        for (r, w) in self.eq.iter().zip(lambda) {
            out.extend(r.hess.iter().map(|t| t.2 * w));
        }
        for (r, w) in self.iq.iter().zip(mu) {
            out.extend(r.hess.iter().map(|t| t.2 * w));
        }
        for (k, r) in self.iq.iter().enumerate() {
            let w = mu[k] / z[k];
            let gr = &ev.dh[k];
            for a in 0..r.cols.len() {
                for b in 0..r.cols.len() {
                    out.push(w * gr[a] * gr[b]);
                }
            }
        }
        out.extend(std::iter::repeat(delta).take(self.nx));
        for (k, r) in self.eq.iter().enumerate() {
            for p in 0..r.cols.len() {
                out.push(ev.dg[k][p]);
                out.push(ev.dg[k][p]);
            }
            out.push(-delta_c);
        }
    }
}

const REG_FLOOR: f64 = 1e-10;
const MAX_STEP_RATIO: f64 = 1e3;

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Solves `problem` from its stored initial point.
pub fn solve_nlp(problem: &NlpProblem, opts: &SolverOptions) -> NlpSolution {
    let start = Instant::now();
    let c = Compiled::new(problem);
    let (nx, neq, niq) = (c.nx, c.eq.len(), c.iq.len());
    let dim = nx + neq;

    let mut x = problem.x0.clone();
    let mut ev = c.evaluate(&x);
    let mut z: Vec<f64> = ev.h.iter().map(|&h| (-h).max(1.0)).collect();
    let mut mu = vec![1.0; niq];
    let mut lambda = vec![0.0; neq];
    let mut gamma = 1.0;

    let pattern = c.kkt_pattern();
    let (symbolic, order): (SymbolicSparseColMat<usize>, ValuesOrder<usize>) =
        SymbolicSparseColMat::try_new_from_indices(dim, dim, &pattern).expect("valid KKT pattern");
    let symbolic_lu = SymbolicLu::try_new(symbolic.as_ref()).expect("symbolic LU");
    let mut values = Vec::with_capacity(pattern.len());

    let lagrangian_gradient = |ev: &Evaluated, lambda: &[f64], mu: &[f64]| {
        let mut lx = ev.df.clone();
        for (k, r) in c.eq.iter().enumerate() {
            for (p, &col) in r.cols.iter().enumerate() {
                lx[col] += lambda[k] * ev.dg[k][p];
            }
        }
        for (k, r) in c.iq.iter().enumerate() {
            for (p, &col) in r.cols.iter().enumerate() {
                lx[col] += mu[k] * ev.dh[k][p];
            }
        }
        lx
    };

    let conditions = |x: &[f64], ev: &Evaluated, lambda: &[f64], mu: &[f64], z: &[f64]| {
        let lx = lagrangian_gradient(ev, lambda, mu);
        let feas = inf_norm(&ev.g).max(ev.h.iter().fold(0.0f64, |a, &h| a.max(h)));
        let mult = inf_norm(lambda).max(inf_norm(mu));
        let grad = inf_norm(&lx) / (1.0 + mult);
        let ztmu: f64 = z.iter().zip(mu).map(|(a, b)| a * b).sum();
        let comp = ztmu / (1.0 + inf_norm(x));
        (feas, grad, comp)
    };

    let mut status = SolveStatus::IterationLimit;
    let mut iterations = 0;
    let (mut feas, mut grad, mut comp) = conditions(&x, &ev, &lambda, &mu, &z);
    let mut delta_reg = REG_FLOOR;
    let mut rhs = vec![0.0; dim];

    while iterations < opts.max_iter {
        if feas <= opts.feas_tol && grad <= opts.grad_tol && comp <= opts.comp_tol {
            status = SolveStatus::Optimal;
            break;
        }
        iterations += 1;

        let lx = lagrangian_gradient(&ev, &lambda, &mu);
        // N = Lx + dh' ((mu .* h + gamma) ./ z)
        let mut n_vec = lx;
        for (k, r) in c.iq.iter().enumerate() {
            let w = (mu[k] * ev.h[k] + gamma) / z[k];
            for (p, &col) in r.cols.iter().enumerate() {
                n_vec[col] += w * ev.dh[k][p];
            }
        }
        for i in 0..nx {
            rhs[i] = -n_vec[i];
        }
        for k in 0..neq {
            rhs[nx + k] = -ev.g[k];
        }

        // The reduced matrix is singular when the Lagrangian has no curvature along
        // the constraint null space; a proximal term on the diagonal keeps the
        // step bounded. It grows until the step is finite and of sensible size.
        let mut step = None;
        let mut delta = delta_reg.max(REG_FLOOR);
        let x_scale = 1.0 + inf_norm(&x);
        for _ in 0..10 {
            c.kkt_values(&ev, &lambda, &mu, &z, delta, REG_FLOOR, &mut values);
            let mat = SparseColMat::<usize, f64>::new_from_order_and_values(
                symbolic.clone(),
                &order,
                values.as_slice(),
            )
            .expect("KKT values");
            if let Ok(lu) = Lu::try_new_with_symbolic(symbolic_lu.clone(), mat.as_ref()) {
                let mut sol = Mat::<f64>::from_fn(dim, 1, |i, _| rhs[i]);
                lu.solve_in_place(sol.as_mut());
                let d: Vec<f64> = (0..dim).map(|i| sol.read(i, 0)).collect();
                if d.iter().all(|v| v.is_finite())
                    && inf_norm(&d[..nx]) <= MAX_STEP_RATIO * x_scale
                    && residual_ok(&c, &ev, &lambda, &mu, &z, delta, REG_FLOOR, &d, &rhs)
                {
                    step = Some(d);
                    break;
                }
            }
            delta *= 100.0;
        }
        delta_reg = if delta > REG_FLOOR { delta / 100.0 } else { REG_FLOOR };
        let Some(d) = step else {
            status = SolveStatus::NumericFailure;
            break;
        };
        let dx = &d[..nx];
        let dlam = &d[nx..];

        // dz = -h - z - dh dx ; dmu = -mu + (gamma - mu .* dz) ./ z
        let mut dz = vec![0.0; niq];
        let mut dmu = vec![0.0; niq];
        for (k, r) in c.iq.iter().enumerate() {
            let jdx: f64 = r.cols.iter().enumerate().map(|(p, &col)| ev.dh[k][p] * dx[col]).sum();
            dz[k] = -ev.h[k] - z[k] - jdx;
            dmu[k] = -mu[k] + (gamma - mu[k] * dz[k]) / z[k];
        }
        let mut alpha_p: f64 = 1.0;
        let mut alpha_d: f64 = 1.0;
        for k in 0..niq {
            if dz[k] < 0.0 {
                alpha_p = alpha_p.min(-opts.xi * z[k] / dz[k]);
            }
            if dmu[k] < 0.0 {
                alpha_d = alpha_d.min(-opts.xi * mu[k] / dmu[k]);
            }
        }
        for i in 0..nx {
            x[i] += alpha_p * dx[i];
        }
        for k in 0..niq {
            z[k] += alpha_p * dz[k];
            mu[k] += alpha_d * dmu[k];
        }
        for k in 0..neq {
            lambda[k] += alpha_d * dlam[k];
        }
        if niq > 0 {
            gamma = opts.sigma * z.iter().zip(&mu).map(|(a, b)| a * b).sum::<f64>() / niq as f64;
        }
        ev = c.evaluate(&x);
        (feas, grad, comp) = conditions(&x, &ev, &lambda, &mu, &z);
        debug!(
            "ipm {iterations:3} f={:.10e} feas={feas:.2e} grad={grad:.2e} comp={comp:.2e} ap={alpha_p:.3} ad={alpha_d:.3} reg={delta:.1e}",
            ev.f
        );
        if !(feas.is_finite() && grad.is_finite() && comp.is_finite()) || inf_norm(&x) > 1e12 {
            status = SolveStatus::NumericFailure;
            break;
        }
    }
    if status == SolveStatus::IterationLimit && feas > 1e-5 {
        status = SolveStatus::Infeasible;
    }
    if status != SolveStatus::Optimal && feas <= opts.feas_tol && grad <= opts.grad_tol && comp <= opts.comp_tol {
        status = SolveStatus::Optimal;
    }

    let lx = lagrangian_gradient(&ev, &lambda, &mu);
    let mult = inf_norm(&lambda).max(inf_norm(&mu));
    let diagnostics = SolveDiagnostics {
        status,
        iterations,
        stationarity: inf_norm(&lx) / (1.0 + mult),
        primal_feasibility: feas,
        dual_feasibility: mu.iter().fold(0.0f64, |a, &m| a.max(-m)),
        complementarity: z.iter().zip(&mu).fold(0.0f64, |a, (z, m)| a.max(z * m)),
        objective: ev.f,
        solve_seconds: start.elapsed().as_secs_f64(),
    };
    NlpSolution {
        x,
        lambda,
        mu: mu[..c.n_problem_iq].to_vec(),
        diagnostics,
    }
}

/// Rejects factorizations whose solution does not reproduce the right-hand side,
/// which happens when the LU hits a numerically singular pivot.
#[allow(clippy::too_many_arguments)]
fn residual_ok(
    c: &Compiled,
    ev: &Evaluated,
    lambda: &[f64],
    mu: &[f64],
    z: &[f64],
    delta: f64,
    delta_c: f64,
    d: &[f64],
    rhs: &[f64],
) -> bool {
    let nx = c.nx;
    let mut r = vec![0.0; rhs.len()];
    for &(i, j, v) in &c.obj.hess {
        r[i] += v * d[j];
    }
    for (row, w) in c.eq.iter().zip(lambda) {
        for &(i, j, v) in &row.hess {
            r[i] += v * w * d[j];
        }
    }
    for (row, w) in c.iq.iter().zip(mu) {
        for &(i, j, v) in &row.hess {
            r[i] += v * w * d[j];
        }
    }
    for (k, row) in c.iq.iter().enumerate() {
        let w = mu[k] / z[k];
        let gd: f64 = row.cols.iter().enumerate().map(|(p, &col)| ev.dh[k][p] * d[col]).sum();
        for (p, &col) in row.cols.iter().enumerate() {
            r[col] += w * ev.dh[k][p] * gd;
        }
    }
    for i in 0..nx {
        r[i] += delta * d[i];
    }
    for (k, row) in c.eq.iter().enumerate() {
        for (p, &col) in row.cols.iter().enumerate() {
            r[nx + k] += ev.dg[k][p] * d[col];
            r[col] += ev.dg[k][p] * d[nx + k];
        }
        r[nx + k] -= delta_c * d[nx + k];
    }
    let scale = 1.0 + inf_norm(rhs);
    r.iter().zip(rhs).all(|(a, b)| (a - b).abs() <= 1e-6 * scale)
}
