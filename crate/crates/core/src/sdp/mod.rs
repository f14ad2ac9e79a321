//! The query-complexity semidefinite programs.
//!
//! Primal, for a Choi operator `J` on `C^d ⊗ C^d`:
//!
//! ```text
//! minimize Tr β  subject to  J + β ⊗ I ⪰ 0
//! ```
//!
//! Dual:
//!
//! ```text
//! maximize -Tr(J Γ)  subject to  Γ ⪰ 0,  Tr₂ Γ = I
//! ```
//!
//! With a subgroup promise, `J` is replaced by the fixed part over the
//! subalgebra plus `Σ_k B_k^* ⊗ B'_k` with free traceless Hermitian `B'_k` for
//! every complement direction `B_k`; the dual gains the constraints
//! `Tr₁[(B_k^* ⊗ I) Γ] = 0`.
//!
//! Both routes run on the barrier solver in [`lmi`], each from its own
//! parameterization: the primal over coordinates of `β` and `B'_k`, the dual
//! over an affine parameterization of the feasible `Γ` subspace. Each route
//! also recovers a point for the opposite problem and repairs it to exact
//! feasibility, so every solution carries a certified gap.

pub mod certificate;
pub mod lmi;

use serde::{Deserialize, Serialize};

use crate::derivative::{choi_gellmann, choi_subgroup, ChoiOperator, DerivativeMap};
use crate::error::{Error, Result};
use crate::lie::{gellmann_basis, OperatorBasis, Subgroup};
use crate::linalg::{
    eigh_unchecked, hs_inner, identity, kron, min_eigenvalue, partial_trace, real, trace_product_re, BipartiteOperator, ComplexMatrix,
    HermitianOperator, MatrixFile, Slot,
};
use lmi::{LmiOptions, LmiProblem};

/// Gap below which a converged solve is reported optimal.
pub const ACCEPTED_GAP: f64 = 1e-6;
/// Slack subtracted before rounding a value up to an integer query count.
pub const ROUNDING_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

/// Which formulation produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Primal,
    Dual,
    Closed,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub primal_value: f64,
    pub beta: HermitianOperator,
    /// `B'_k`, one per complement direction; `None` without a subgroup promise.
    pub free_complement: Option<Vec<ComplexMatrix>>,
    pub dual_value: f64,
    pub gamma: BipartiteOperator,
    pub gap: f64,
    pub status: SdpStatus,
    pub route: Route,
    pub newton_steps: usize,
}

impl SdpSolution {
    /// Smallest integer query count compatible with the primal value.
    pub fn rounded(&self) -> u64 {
        round_query_count(self.primal_value)
    }

    pub fn record(&self) -> SdpRecord {
        SdpRecord {
            primal_value: self.primal_value,
            dual_value: self.dual_value,
            gap: self.gap,
            status: self.status,
            beta: MatrixFile::from_matrix(self.beta.matrix()),
            gamma: MatrixFile::from_matrix(self.gamma.matrix()),
        }
    }
}

/// Serializable view of an [`SdpSolution`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpRecord {
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub status: SdpStatus,
    pub beta: MatrixFile,
    pub gamma: MatrixFile,
}

/// `ceil(value - 1e-6)`, clamped at zero.
pub fn round_query_count(value: f64) -> u64 {
    (value - ROUNDING_SLACK).ceil().max(0.0) as u64
}

/// `{I/√d} ∪ su(d)`: orthonormal basis of all `d × d` Hermitian matrices.
fn hermitian_basis(d: usize) -> Result<Vec<ComplexMatrix>> {
    let mut out = vec![identity(d) * real(1.0 / (d as f64).sqrt())];
    out.extend(gellmann_basis(d)?.iter().map(|g| g.matrix().clone()));
    Ok(out)
}

fn conj(m: &ComplexMatrix) -> ComplexMatrix {
    m.map(|z| z.conj())
}

/// Shape of one instance: fixed operator, dimension, complement directions.
struct Instance<'a> {
    d: usize,
    fixed: &'a ComplexMatrix,
    complement: &'a [HermitianOperator],
}

impl<'a> Instance<'a> {
    fn new(fixed: &'a ChoiOperator, complement: Option<&'a OperatorBasis>) -> Result<Self> {
        let d = fixed.local_dim();
        if d < 2 {
            return Err(Error::InvalidArgument(format!("dimension must be >= 2, got {d}")));
        }
        let complement = match complement {
            Some(basis) => {
                if basis.local_dim() != d {
                    return Err(Error::DimensionMismatch { expected: d, found: basis.local_dim() });
                }
                if let Some(bad) = basis.iter().find(|b| b.trace().abs() > 1e-10) {
                    return Err(Error::InvalidArgument(format!("complement element has trace {:.3e}", bad.trace())));
                }
                basis.elements()
            }
            None => &[],
        };
        Ok(Self { d, fixed: fixed.matrix(), complement })
    }

    /// `J̃ + β ⊗ I`.
    fn primal_operator(&self, beta: &ComplexMatrix, free: &[ComplexMatrix]) -> ComplexMatrix {
        let mut m = self.fixed + kron(beta, &identity(self.d));
        for (b, bp) in self.complement.iter().zip(free) {
            m += kron(&conj(b.matrix()), bp);
        }
        m
    }

    /// Worst violation of `Tr₂Γ = I` and `Tr₁[(B_k^* ⊗ I)Γ] = 0`.
    fn dual_constraint_error(&self, gamma: &ComplexMatrix) -> f64 {
        let d = self.d;
        let mut worst = (partial_trace(gamma, d, Slot::Second) - identity(d)).norm();
        for b in self.complement {
            let lhs = kron(&conj(b.matrix()), &identity(d)) * gamma;
            worst = worst.max(partial_trace(&lhs, d, Slot::First).norm());
        }
        worst
    }

    /// Makes a near-feasible `Γ` exactly feasible. `Tr₂Γ = I` is restored by
    /// the congruence `(M^{-1/2} ⊗ I) Γ (M^{-1/2} ⊗ I)` with `M = Tr₂Γ`, which
    /// keeps `Γ ⪰ 0`; the complement constraints are then projected out and,
    /// only if positivity was lost, `Γ` is mixed with `I ⊗ I / d`.
    fn repair_dual(&self, gamma: &ComplexMatrix) -> ComplexMatrix {
        let d = self.d;
        let id = identity(d);
        let mut g = crate::linalg::symmetrize(gamma);
        let reduced = crate::linalg::symmetrize(&partial_trace(&g, d, Slot::Second));
        let eig = eigh_unchecked(&reduced);
        if eig.values.iter().all(|&v| v > 1e-300) {
            let w = kron(&eig.map(|v| real(1.0 / v.sqrt())), &id);
            g = &w * g * &w;
        } else {
            let excess = reduced - &id;
            g -= kron(&excess, &id) * real(1.0 / d as f64);
        }
        if !self.complement.is_empty() {
            let su = gellmann_basis(d).expect("d >= 2");
            for b in self.complement {
                let bc = conj(b.matrix());
                let reduced = partial_trace(&(kron(&bc, &id) * &g), d, Slot::First);
                let mut correction = ComplexMatrix::zeros(d, d);
                for f in su.iter() {
                    correction += f.matrix() * hs_inner(f, &reduced);
                }
                g -= kron(&bc, &correction);
            }
        }
        let g = crate::linalg::symmetrize(&g);
        let lmin = min_eigenvalue(&g);
        if lmin >= 0.0 {
            return g;
        }
        let inv_d = 1.0 / d as f64;
        let lambda = -lmin / (inv_d - lmin);
        g * real(1.0 - lambda) + identity(d * d) * real(lambda * inv_d)
    }

    /// Projects `Z - J` onto `β ⊗ I` and `B_k^* ⊗ B'_k`, then shifts `β` so
    /// `J̃ + β ⊗ I ⪰ 0` holds exactly.
    fn repair_primal(&self, z: &ComplexMatrix) -> (ComplexMatrix, Vec<ComplexMatrix>) {
        let d = self.d;
        let diff = z - self.fixed;
        let beta = crate::linalg::symmetrize(&(partial_trace(&diff, d, Slot::Second) * real(1.0 / d as f64)));
        let su = gellmann_basis(d).expect("d >= 2");
        let free: Vec<ComplexMatrix> = self
            .complement
            .iter()
            .map(|b| {
                let bc = conj(b.matrix());
                let mut out = ComplexMatrix::zeros(d, d);
                for f in su.iter() {
                    out += f.matrix() * real(trace_product_re(&kron(&bc, f.matrix()), &diff));
                }
                out
            })
            .collect();
        let lmin = min_eigenvalue(&self.primal_operator(&beta, &free));
        let shift = if lmin < 0.0 { -lmin } else { 0.0 };
        (beta + identity(d) * real(shift), free)
    }

    fn dual_objective(&self, gamma: &ComplexMatrix) -> f64 {
        -trace_product_re(self.fixed, gamma)
    }

    fn zero_solution(&self) -> SdpSolution {
        let d = self.d;
        SdpSolution {
            primal_value: 0.0,
            beta: HermitianOperator::zeros(d),
            free_complement: (!self.complement.is_empty()).then(|| vec![ComplexMatrix::zeros(d, d); self.complement.len()]),
            dual_value: 0.0,
            gamma: BipartiteOperator::hermitian_unchecked(d, &(identity(d * d) * real(1.0 / d as f64))),
            gap: 0.0,
            status: SdpStatus::Optimal,
            route: Route::Closed,
            newton_steps: 0,
        }
    }

    fn finish(
        &self,
        beta: ComplexMatrix,
        free: Vec<ComplexMatrix>,
        gamma: ComplexMatrix,
        converged: bool,
        route: Route,
        newton_steps: usize,
    ) -> SdpSolution {
        let primal_value = beta.trace().re;
        let dual_value = self.dual_objective(&gamma);
        let gap = primal_value - dual_value;
        let status = if converged && gap <= ACCEPTED_GAP { SdpStatus::Optimal } else { SdpStatus::MaxIter };
        if status != SdpStatus::Optimal {
            log::warn!("{route:?} solve stopped with gap {gap:.3e} after {newton_steps} Newton steps");
        }
        SdpSolution {
            primal_value,
            beta: HermitianOperator::symmetrized(&beta),
            free_complement: (!self.complement.is_empty()).then_some(free),
            dual_value,
            gamma: BipartiteOperator::hermitian_unchecked(self.d, &gamma),
            gap,
            status,
            route,
            newton_steps,
        }
    }

    fn is_zero(&self) -> bool {
        self.complement.is_empty() && self.fixed.iter().all(|z| z.norm() == 0.0)
    }

    fn solve_primal(&self, options: &LmiOptions) -> Result<SdpSolution> {
        if self.is_zero() {
            return Ok(self.zero_solution());
        }
        let d = self.d;
        let id = identity(d);
        let herm = hermitian_basis(d)?;
        let su = gellmann_basis(d)?;
        let mut problem = LmiProblem::new(vec![self.fixed.clone()]);
        for e in &herm {
            problem.add_variable(e.trace().re, &[(0, &kron(e, &id))]);
        }
        for b in self.complement {
            let bc = conj(b.matrix());
            for f in su.iter() {
                problem.add_variable(0.0, &[(0, &kron(&bc, f.matrix()))]);
            }
        }
        let shift = 1.0 - min_eigenvalue(self.fixed);
        let mut x0 = vec![0.0; problem.num_vars()];
        x0[0] = shift.max(1.0) * (d as f64).sqrt();
        // Dual points recovered along the central path; the best one is kept
        // because late centers are the least well conditioned.
        let mut best_gamma: Option<(f64, ComplexMatrix)> = None;
        let outcome = lmi::solve_observed(&problem, x0, options, &mut |center| {
            let gamma = self.repair_dual(&(&center.inverse[0] * real(1.0 / center.t)));
            let value = self.dual_objective(&gamma);
            if best_gamma.as_ref().is_none_or(|(v, _)| value > *v) {
                best_gamma = Some((value, gamma));
            }
        })?;

        let beta: ComplexMatrix = herm.iter().zip(&outcome.x).map(|(e, &y)| e * real(y)).sum();
        let mut free = Vec::with_capacity(self.complement.len());
        let mut offset = herm.len();
        for _ in self.complement {
            let mut bp = ComplexMatrix::zeros(d, d);
            for (f, &w) in su.iter().zip(&outcome.x[offset..]) {
                bp += f.matrix() * real(w);
            }
            offset += su.len();
            free.push(bp);
        }
        let gamma = match best_gamma {
            Some((_, g)) => g,
            None => self.repair_dual(&(&outcome.inverse[0] * real(1.0 / outcome.t))),
        };
        let (beta, free) = if min_eigenvalue(&self.primal_operator(&beta, &free)) < 0.0 {
            self.repair_primal(&self.primal_operator(&beta, &free))
        } else {
            (beta, free)
        };
        Ok(self.finish(beta, free, gamma, outcome.converged, Route::Primal, outcome.newton_steps))
    }

    fn solve_dual(&self, options: &LmiOptions) -> Result<SdpSolution> {
        if self.is_zero() {
            return Ok(self.zero_solution());
        }
        let d = self.d;
        let su = gellmann_basis(d)?;
        let mut left = vec![identity(d) * real(1.0 / (d as f64).sqrt())];
        let sub: Vec<ComplexMatrix> = if self.complement.is_empty() {
            su.iter().map(|g| g.matrix().clone()).collect()
        } else {
            let mut span: Vec<ComplexMatrix> = su.iter().map(|g| g.matrix().clone()).collect();
            // Orthogonal complement of the free directions inside su(d).
            for b in self.complement {
                for s in span.iter_mut() {
                    let overlap = hs_inner(b, s);
                    *s -= b.matrix() * overlap;
                }
            }
            orthonormalize(span, d * d - 1 - self.complement.len())
        };
        left.extend(sub);
        let gamma0 = identity(d * d) * real(1.0 / d as f64);
        let mut problem = LmiProblem::new(vec![gamma0]);
        for e in &left {
            let ec = conj(e);
            for f in su.iter() {
                let coefficient = kron(&ec, f.matrix());
                let cost = trace_product_re(self.fixed, &coefficient);
                problem.add_variable(cost, &[(0, &coefficient)]);
            }
        }
        let mut best_primal: Option<(f64, ComplexMatrix, Vec<ComplexMatrix>)> = None;
        let outcome = lmi::solve_observed(&problem, vec![0.0; problem.num_vars()], options, &mut |center| {
            let (beta, free) = self.repair_primal(&(&center.inverse[0] * real(1.0 / center.t)));
            let value = beta.trace().re;
            if best_primal.as_ref().is_none_or(|(v, _, _)| value < *v) {
                best_primal = Some((value, beta, free));
            }
        })?;
        let gamma = self.repair_dual(&problem.evaluate(&outcome.x)[0]);
        let (beta, free) = match best_primal {
            Some((_, beta, free)) => (beta, free),
            None => self.repair_primal(&(&outcome.inverse[0] * real(1.0 / outcome.t))),
        };
        Ok(self.finish(beta, free, gamma, outcome.converged, Route::Dual, outcome.newton_steps))
    }
}

/// Gram–Schmidt on Hermitian matrices, keeping `keep` directions.
fn orthonormalize(mut span: Vec<ComplexMatrix>, keep: usize) -> Vec<ComplexMatrix> {
    span.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    let mut out: Vec<ComplexMatrix> = Vec::with_capacity(keep);
    for mut v in span {
        for u in &out {
            let overlap = hs_inner(u, &v);
            v -= u * overlap;
        }
        let n = v.norm();
        if n > 1e-8 && out.len() < keep {
            out.push(crate::linalg::symmetrize(&(v * real(1.0 / n))));
        }
    }
    out
}

/// Minimizes `Tr β` subject to `J + β ⊗ I ⪰ 0`.
pub fn solve_primal(j: &ChoiOperator) -> Result<SdpSolution> {
    solve_primal_with(j, &LmiOptions::default())
}

pub fn solve_primal_with(j: &ChoiOperator, options: &LmiOptions) -> Result<SdpSolution> {
    Instance::new(j, None)?.solve_primal(options)
}

/// Maximizes `-Tr(JΓ)` over `Γ ⪰ 0`, `Tr₂Γ = I`.
pub fn solve_dual(j: &ChoiOperator) -> Result<SdpSolution> {
    solve_dual_with(j, &LmiOptions::default())
}

pub fn solve_dual_with(j: &ChoiOperator, options: &LmiOptions) -> Result<SdpSolution> {
    Instance::new(j, None)?.solve_dual(options)
}

/// Subgroup primal: minimizes `Tr β` over `β` and traceless `B'_k`.
pub fn solve_subgroup(fixed: &ChoiOperator, complement: &OperatorBasis) -> Result<SdpSolution> {
    Instance::new(fixed, Some(complement))?.solve_primal(&LmiOptions::default())
}

/// Subgroup dual with the extra constraints `Tr₁[(B_k^* ⊗ I)Γ] = 0`.
pub fn solve_dual_subgroup(fixed: &ChoiOperator, complement: &OperatorBasis) -> Result<SdpSolution> {
    Instance::new(fixed, Some(complement))?.solve_dual(&LmiOptions::default())
}

/// Primal solve for a derivative map under a subgroup promise. `g` acts on
/// `subgroup.total_dim(d)`-dimensional space.
pub fn solve_derivative(g: &DerivativeMap, subgroup: Subgroup, d: usize) -> Result<SdpSolution> {
    let total = subgroup.total_dim(d);
    if g.dim() != total {
        return Err(Error::DimensionMismatch { expected: total, found: g.dim() });
    }
    match subgroup {
        Subgroup::Full => solve_primal(&choi_gellmann(g)?),
        _ => {
            let (sub, complement) = subgroup.bases(d)?;
            let sc = choi_subgroup(g, &sub, &complement)?;
            solve_subgroup(&sc.fixed, &sc.complement)
        }
    }
}

/// Residuals of a solution against its own problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    /// `λ_min(J̃ + β ⊗ I)`.
    pub primal_min_eigenvalue: f64,
    /// `λ_min(Γ)`.
    pub dual_min_eigenvalue: f64,
    /// Largest violation among the dual equality constraints.
    pub dual_constraint_error: f64,
}

/// Re-checks feasibility of both points of `solution` from scratch.
pub fn check_feasibility(
    fixed: &ChoiOperator,
    complement: Option<&OperatorBasis>,
    solution: &SdpSolution,
) -> Result<Feasibility> {
    let inst = Instance::new(fixed, complement)?;
    let free = solution.free_complement.clone().unwrap_or_default();
    Ok(Feasibility {
        primal_min_eigenvalue: min_eigenvalue(&inst.primal_operator(solution.beta.matrix(), &free)),
        dual_min_eigenvalue: min_eigenvalue(solution.gamma.matrix()),
        dual_constraint_error: inst.dual_constraint_error(solution.gamma.matrix()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derivative::{choi_subgroup, task_choi, analytic_derivative};
    use crate::linalg::haar_unitary;
    use crate::task::Task;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn inversion_d2_primal_and_dual() {
        let j = task_choi(Task::Inversion, &identity(2)).unwrap();
        let p = solve_primal(&j).unwrap();
        assert_eq!(p.status, SdpStatus::Optimal, "{} {} {} {}", p.primal_value, p.dual_value, p.gap, p.newton_steps);
        assert_close(p.primal_value, 3.0, 1e-6);
        assert!(p.gap <= 1e-6 && p.gap >= -1e-9);
        assert!((p.beta.matrix() - identity(2) * real(1.5)).norm() < 1e-4);
        let f = check_feasibility(&j, None, &p).unwrap();
        assert!(f.primal_min_eigenvalue >= -1e-9);
        assert!(f.dual_min_eigenvalue >= -1e-9);
        assert!(f.dual_constraint_error <= 1e-8);
        let q = solve_dual(&j).unwrap();
        assert_close(q.dual_value, 3.0, 1e-6);
        assert!((q.gamma.matrix() - crate::linalg::max_entangled(2)).norm() < 1e-3);
        assert_eq!(p.rounded(), 3);
    }

    #[test]
    fn zero_operator_short_circuits() {
        let j = ChoiOperator::from_matrix(3, ComplexMatrix::zeros(9, 9), "zero").unwrap();
        let p = solve_primal(&j).unwrap();
        assert_eq!(p.primal_value, 0.0);
        assert_eq!(p.route, Route::Closed);
        assert_eq!(solve_dual(&j).unwrap().dual_value, 0.0);
    }

    #[test]
    fn conjugation_and_transposition_values() {
        let j = task_choi(Task::Conjugation, &haar_unitary(4, 3).unwrap()).unwrap();
        assert_close(solve_primal(&j).unwrap().primal_value, 3.0, 1e-5);
        let j = task_choi(Task::Transposition, &identity(3)).unwrap();
        let q = solve_dual(&j).unwrap();
        assert_close(q.dual_value, 4.0, 1e-5);
        let witness = crate::linalg::antisym_projector(3) * real(1.0);
        assert!((q.gamma.matrix() - &witness).norm() < 1e-3);
        let j = task_choi(Task::Iteration { n: 2 }, &identity(2)).unwrap();
        assert_close(solve_dual(&j).unwrap().dual_value, 2.0, 1e-5);
    }

    #[test]
    fn subgroup_values() {
        let g = analytic_derivative(Task::Inversion, &identity(2)).unwrap();
        let (sub, comp) = Subgroup::So.bases(2).unwrap();
        let sc = choi_subgroup(&g, &sub, &comp).unwrap();
        let p = solve_subgroup(&sc.fixed, &sc.complement).unwrap();
        assert_close(p.primal_value, 1.0, 1e-5);
        let q = solve_dual_subgroup(&sc.fixed, &sc.complement).unwrap();
        assert_close(q.dual_value, 1.0, 1e-5);

        let g = analytic_derivative(Task::Inversion, &identity(3)).unwrap();
        let (sub, comp) = Subgroup::Diag.bases(3).unwrap();
        let sc = choi_subgroup(&g, &sub, &comp).unwrap();
        let p = solve_subgroup(&sc.fixed, &sc.complement).unwrap();
        assert_close(p.primal_value, 2.0, 1e-5);
        let f = check_feasibility(&sc.fixed, Some(&sc.complement), &p).unwrap();
        assert!(f.dual_constraint_error < 1e-8, "{f:?}");
        assert!(f.primal_min_eigenvalue >= -1e-9);
    }

    #[test]
    fn degenerate_full_subgroup_matches_plain_solve() {
        let g = analytic_derivative(Task::Transposition, &identity(2)).unwrap();
        let (sub, comp) = Subgroup::Full.bases(2).unwrap();
        let sc = choi_subgroup(&g, &sub, &comp).unwrap();
        let a = solve_dual_subgroup(&sc.fixed, &sc.complement).unwrap();
        let b = solve_dual(&task_choi(Task::Transposition, &identity(2)).unwrap()).unwrap();
        assert_close(a.dual_value, b.dual_value, 1e-8);
    }

    #[test]
    fn solve_derivative_dispatches_on_subgroup() {
        let g = analytic_derivative(Task::Inversion, &identity(4)).unwrap();
        assert_close(solve_derivative(&g, Subgroup::Tensor(2), 2).unwrap().primal_value, 3.0, 1e-5);
        assert_close(solve_derivative(&g, Subgroup::Full, 4).unwrap().primal_value, 15.0, 1e-5);
        assert!(solve_derivative(&g, Subgroup::So, 3).is_err());
    }

    #[test]
    fn rounding() {
        assert_eq!(round_query_count(3.0000004), 3);
        assert_eq!(round_query_count(5.5), 6);
        assert_eq!(round_query_count(0.0), 0);
    }
}
