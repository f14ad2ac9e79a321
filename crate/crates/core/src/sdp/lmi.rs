//! Log-det barrier interior-point method for small dense linear matrix
//! inequalities over complex Hermitian blocks:
//!
//! ```text
//! minimize c·x  subject to  F(x) = F_0 + Σ_i x_i F_i ⪰ 0  (block diagonal)
//! ```
//!
//! The coefficient matrices are stored sparsely. Each outer iteration
//! re-centers `t c·x - log det F(x)` with damped Newton steps and then
//! multiplies `t` by `mu`; at an exact center the duality gap is `ν / t`, where
//! `ν` is the total block size. `F(x)^{-1} / t` is returned as the dual matrix.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

/// One nonzero entry `value` at `(row, col)` of a coefficient block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: Complex64,
}

#[derive(Debug, Clone)]
pub struct LmiProblem {
    pub constant: Vec<ComplexMatrix>,
    pub coefficients: Vec<Vec<Term>>,
    pub objective: Vec<f64>,
}

impl LmiProblem {
    pub fn new(constant: Vec<ComplexMatrix>) -> Self {
        Self { constant, coefficients: Vec::new(), objective: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.coefficients.len()
    }

    /// Barrier parameter: total size of all blocks.
    pub fn nu(&self) -> usize {
        self.constant.iter().map(|b| b.nrows()).sum()
    }

    /// Adds a variable whose coefficient has the given per-block dense parts.
    pub fn add_variable(&mut self, cost: f64, parts: &[(usize, &ComplexMatrix)]) -> usize {
        let mut terms = Vec::new();
        for &(block, m) in parts {
            for col in 0..m.ncols() {
                for row in 0..m.nrows() {
                    let value = m[(row, col)];
                    if value.re != 0.0 || value.im != 0.0 {
                        terms.push(Term { block, row, col, value });
                    }
                }
            }
        }
        self.add_sparse_variable(cost, terms)
    }

    pub fn add_sparse_variable(&mut self, cost: f64, mut terms: Vec<Term>) -> usize {
        terms.sort_by_key(|t| (t.block, t.col, t.row));
        self.coefficients.push(terms);
        self.objective.push(cost);
        self.coefficients.len() - 1
    }

    /// `F(x)` block by block.
    pub fn evaluate(&self, x: &[f64]) -> Vec<ComplexMatrix> {
        let mut blocks = self.constant.clone();
        for (terms, &xi) in self.coefficients.iter().zip(x) {
            if xi == 0.0 {
                continue;
            }
            for t in terms {
                blocks[t.block][(t.row, t.col)] += t.value * xi;
            }
        }
        blocks
    }

    pub fn cost(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum()
    }
}

#[derive(Debug, Clone)]
pub struct LmiOptions {
    /// Stop once `ν / t` falls below this.
    pub gap_tol: f64,
    pub max_newton_steps: usize,
    pub mu: f64,
    pub t0: f64,
    /// Newton decrement threshold `λ²/2` for a point to count as centered.
    pub center_tol: f64,
    pub max_variables: usize,
    /// Stop early once the objective falls strictly below this value.
    pub stop_below: Option<f64>,
    /// Stop once a centered point certifies the optimum lies above this value.
    pub stop_above: Option<f64>,
}

impl Default for LmiOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-9,
            max_newton_steps: 500,
            mu: 20.0,
            t0: 1.0,
            center_tol: 1e-10,
            max_variables: MAX_VARIABLES,
            stop_below: None,
            stop_above: None,
        }
    }
}

/// Largest number of scalar variables the dense Newton system accepts.
pub const MAX_VARIABLES: usize = 1600;

#[derive(Debug, Clone)]
pub struct LmiOutcome {
    pub x: Vec<f64>,
    pub objective: f64,
    /// `F(x)^{-1}` per block at the returned point.
    pub inverse: Vec<ComplexMatrix>,
    pub t: f64,
    pub newton_steps: usize,
    pub converged: bool,
    pub stopped_early: bool,
}

struct Factored {
    inverse: Vec<ComplexMatrix>,
    log_det: f64,
}

/// Lower Cholesky factor of the Hermitian part of `m`, or `None` unless every
/// pivot is real and strictly positive.
fn cholesky(m: &ComplexMatrix) -> Option<ComplexMatrix> {
    let n = m.nrows();
    let mut l = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = m[(j, j)].re;
        for k in 0..j {
            pivot -= l[(j, k)].norm_sqr();
        }
        if pivot <= 0.0 || !pivot.is_finite() {
            return None;
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = Complex64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut acc = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = acc / ljj;
        }
    }
    Some(l)
}

fn log_det_from_factor(l: &ComplexMatrix) -> f64 {
    (0..l.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum()
}

/// `(L L†)^{-1}` from the lower factor.
fn inverse_from_factor(l: &ComplexMatrix) -> ComplexMatrix {
    let n = l.nrows();
    // Columns of L^{-1} by forward substitution.
    let mut linv = ComplexMatrix::zeros(n, n);
    for col in 0..n {
        for i in col..n {
            let mut acc = if i == col { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            for k in col..i {
                acc -= l[(i, k)] * linv[(k, col)];
            }
            linv[(i, col)] = acc / l[(i, i)];
        }
    }
    let inv = linv.adjoint() * &linv;
    (&inv + inv.adjoint()) * Complex64::new(0.5, 0.0)
}

fn factor(blocks: &[ComplexMatrix]) -> Option<Factored> {
    let mut inverse = Vec::with_capacity(blocks.len());
    let mut log_det = 0.0;
    for b in blocks {
        let l = cholesky(b)?;
        log_det += log_det_from_factor(&l);
        inverse.push(inverse_from_factor(&l));
    }
    Some(Factored { inverse, log_det })
}

fn log_det(blocks: &[ComplexMatrix]) -> Option<f64> {
    blocks.iter().map(|b| cholesky(b).map(|l| log_det_from_factor(&l))).sum()
}

/// `Re Tr(R F_i)` for every variable.
fn barrier_gradient(problem: &LmiProblem, inverse: &[ComplexMatrix]) -> Vec<f64> {
    problem
        .coefficients
        .iter()
        .map(|terms| terms.iter().map(|t| (t.value * inverse[t.block][(t.col, t.row)]).re).sum())
        .collect()
}

/// `H_ij = Re Tr(R F_i R F_j)`.
fn barrier_hessian(problem: &LmiProblem, inverse: &[ComplexMatrix]) -> DMatrix<f64> {
    let m = problem.num_vars();
    let mut h = DMatrix::<f64>::zeros(m, m);
    let mut scratch: Vec<ComplexMatrix> = inverse.iter().map(|r| ComplexMatrix::zeros(r.nrows(), r.ncols())).collect();
    let mut touched = vec![false; inverse.len()];
    for (i, terms_i) in problem.coefficients.iter().enumerate() {
        for (b, w) in scratch.iter_mut().enumerate() {
            if touched[b] {
                w.fill(Complex64::new(0.0, 0.0));
                touched[b] = false;
            }
        }
        for t in terms_i {
            let r = &inverse[t.block];
            let w = &mut scratch[t.block];
            touched[t.block] = true;
            let n = r.nrows();
            // W += v R[:, p] R[q, :]
            for b in 0..n {
                let right = t.value * r[(t.col, b)];
                if right.re == 0.0 && right.im == 0.0 {
                    continue;
                }
                let col = r.column(t.row);
                let mut wcol = w.column_mut(b);
                for a in 0..n {
                    wcol[a] += col[a] * right;
                }
            }
        }
        for j in i..m {
            let mut acc = 0.0;
            for t in &problem.coefficients[j] {
                acc += (t.value * scratch[t.block][(t.col, t.row)]).re;
            }
            h[(i, j)] = acc;
            h[(j, i)] = acc;
        }
    }
    h
}

fn solve_newton(h: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(chol) = Cholesky::new(h.clone()) {
        return Some(chol.solve(rhs));
    }
    let scale = (0..h.nrows()).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = 1e-14 * scale;
    for _ in 0..12 {
        let mut shifted = h.clone();
        for i in 0..shifted.nrows() {
            shifted[(i, i)] += reg;
        }
        if let Some(chol) = Cholesky::new(shifted) {
            return Some(chol.solve(rhs));
        }
        reg *= 10.0;
    }
    None
}

/// A centered point handed to the observer of [`solve_observed`].
pub struct Center<'a> {
    pub x: &'a [f64],
    /// `F(x)^{-1}` per block.
    pub inverse: &'a [ComplexMatrix],
    pub t: f64,
}

/// Newton steps allowed for a single centering before `t` is raised anyway.
const MAX_CENTERING_STEPS: usize = 60;

/// Runs the barrier method from the strictly feasible point `x0`.
pub fn solve(problem: &LmiProblem, x0: Vec<f64>, options: &LmiOptions) -> Result<LmiOutcome> {
    solve_observed(problem, x0, options, &mut |_| {})
}

/// Like [`solve`], calling `observer` after every centering.
pub fn solve_observed(
    problem: &LmiProblem,
    x0: Vec<f64>,
    options: &LmiOptions,
    observer: &mut dyn FnMut(&Center<'_>),
) -> Result<LmiOutcome> {
    let m = problem.num_vars();
    if m > options.max_variables {
        return Err(Error::ProblemTooLarge { variables: m, limit: options.max_variables });
    }
    if x0.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: x0.len() });
    }
    let nu = problem.nu() as f64;
    let mut x = x0;
    let mut current = factor(&problem.evaluate(&x))
        .ok_or_else(|| Error::Numerical("initial point is not strictly feasible".into()))?;
    let mut t = options.t0;
    let mut steps = 0;
    let mut converged = false;
    let mut stopped_early = false;
    let c = DVector::from_column_slice(&problem.objective);

    'outer: loop {
        let mut previous_decrement = f64::INFINITY;
        for _ in 0..MAX_CENTERING_STEPS {
            if steps >= options.max_newton_steps {
                break 'outer;
            }
            steps += 1;
            let grad_barrier = barrier_gradient(problem, &current.inverse);
            let g = DVector::from_iterator(m, (0..m).map(|i| t * c[i] - grad_barrier[i]));
            let h = barrier_hessian(problem, &current.inverse);
            let Some(dx) = solve_newton(h, &(-&g)) else {
                log::debug!("Newton system singular at t = {t:.3e}");
                break 'outer;
            };
            let decrement = -g.dot(&dx);
            if decrement / 2.0 <= options.center_tol || !decrement.is_finite() {
                break;
            }
            // Newton converges quadratically until roundoff takes over; a small
            // decrement that stops shrinking means the center is as good as it gets.
            if decrement < 1e-8 && decrement > 0.25 * previous_decrement {
                break;
            }
            previous_decrement = decrement;
            let phi0 = t * problem.cost(&x) - current.log_det;
            let slope = g.dot(&dx);
            let mut s = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(xi, di)| xi + s * di).collect();
                let blocks = problem.evaluate(&trial);
                if let Some(ld) = log_det(&blocks) {
                    let phi = t * problem.cost(&trial) - ld;
                    if phi <= phi0 + 0.25 * s * slope {
                        accepted = Some((trial, blocks));
                        break;
                    }
                }
                s *= 0.5;
            }
            let Some((trial, blocks)) = accepted else {
                log::debug!("line search stalled at t = {t:.3e}");
                break;
            };
            match factor(&blocks) {
                Some(f) => {
                    x = trial;
                    current = f;
                }
                None => break 'outer,
            }
            if let Some(limit) = options.stop_below {
                if problem.cost(&x) < limit {
                    stopped_early = true;
                    break 'outer;
                }
            }
        }
        observer(&Center { x: &x, inverse: &current.inverse, t });
        if nu / t <= options.gap_tol {
            converged = true;
            break;
        }
        if let Some(limit) = options.stop_below {
            if problem.cost(&x) < limit {
                stopped_early = true;
                break;
            }
        }
        if let Some(limit) = options.stop_above {
            if problem.cost(&x) - nu / t > limit {
                stopped_early = true;
                break;
            }
        }
        t *= options.mu;
    }
    Ok(LmiOutcome {
        objective: problem.cost(&x),
        x,
        inverse: current.inverse,
        t,
        newton_steps: steps,
        converged,
        stopped_early,
    })
}
