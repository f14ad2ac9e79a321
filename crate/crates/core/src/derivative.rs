//! Derivative maps and their Choi operators.
//!
//! For a differentiable `f` and base point `U0`, the derivative map `g` is the
//! linear map on traceless Hermitian `H` defined by
//!
//! ```text
//! f(e^{iεH} U0) = f(U0) e^{iε g(H) + O(ε²)}.
//! ```
//!
//! Its Choi operator is `J = Σ_j G_j^* ⊗ g(G_j)` over an orthonormal basis of
//! `su(d)`. Derivatives come from three independent sources: closed formulas for
//! the built-in tasks, the chain and product rules over a [`FuncExpr`] tree, and
//! central finite differences of the defining relation.
//!
//! Primitive formulas, with `U = U0`:
//!
//! | `f(U)`      | `g(H)`                                  |
//! |-------------|-----------------------------------------|
//! | `U`         | `U†HU`                                  |
//! | `U^{-1}`    | `-H`                                    |
//! | `U^T`       | `H^T`                                   |
//! | `U^*`       | `-U^T H^* U^*`                          |
//! | `U^k`, k>0  | `Σ_{j=1..k} U^{-j} H U^j`               |
//! | `U^k`, k<0  | `-Σ_{j=0..|k|-1} U^j H U^{-j}`          |
//! | `VU`        | `U†HU`                                  |
//! | `UV`        | `(UV)† H (UV)`                          |
//! | `VUV†`      | `V U† H U V†`                           |
//!
//! Composition `f2 ∘ f1` with `W = f1(U)`: `g(H) = g_{f2,W}(W g_{f1}(H) W†)`.
//! Product `f1 · f2` with `W = f2(U)`: `g(H) = W† g_{f1}(H) W + g_{f2}(H)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dsl::{matrix_power, FuncExpr};
use crate::error::{Error, Result};
use crate::lie::{gellmann_basis, BasisTag, OperatorBasis};
use crate::linalg::{
    ensure_special_unitary, exp_i_hermitian, identity, kron, mat_log_unitary, real, symmetrize, BipartiteOperator,
    ComplexMatrix, EXTERNAL_TOL,
};
use crate::task::Task;

/// Where a derivative map came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    ChainRule,
    FiniteDifference { epsilon: f64, richardson: bool },
}

type Evaluator = Arc<dyn Fn(&ComplexMatrix) -> ComplexMatrix + Send + Sync>;

/// The linear map `H ↦ g(H)` at a fixed base point.
#[derive(Clone)]
pub struct DerivativeMap {
    d: usize,
    base: ComplexMatrix,
    provenance: Provenance,
    label: String,
    eval: Evaluator,
}

impl fmt::Debug for DerivativeMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DerivativeMap")
            .field("d", &self.d)
            .field("label", &self.label)
            .field("provenance", &self.provenance)
            .finish_non_exhaustive()
    }
}

impl DerivativeMap {
    /// Wraps an arbitrary linear evaluator.
    pub fn from_fn(
        d: usize,
        base: ComplexMatrix,
        provenance: Provenance,
        label: impl Into<String>,
        eval: impl Fn(&ComplexMatrix) -> ComplexMatrix + Send + Sync + 'static,
    ) -> Self {
        Self { d, base, provenance, label: label.into(), eval: Arc::new(eval) }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn base_point(&self) -> &ComplexMatrix {
        &self.base
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `g(H)`, Hermitian part.
    pub fn apply(&self, h: &ComplexMatrix) -> ComplexMatrix {
        symmetrize(&(self.eval)(h))
    }

    /// `c · g`.
    pub fn scaled(&self, c: f64) -> Self {
        let inner = self.eval.clone();
        Self {
            d: self.d,
            base: self.base.clone(),
            provenance: self.provenance,
            label: format!("{c} * ({})", self.label),
            eval: Arc::new(move |h| inner(h) * real(c)),
        }
    }
}

fn check_base(u0: &ComplexMatrix) -> Result<usize> {
    let d = ensure_special_unitary(u0, EXTERNAL_TOL)?;
    if d < 2 {
        return Err(Error::InvalidArgument(format!("dimension must be >= 2, got {d}")));
    }
    Ok(d)
}

/// Closed-form derivative of a built-in task.
pub fn analytic_derivative(task: Task, u0: &ComplexMatrix) -> Result<DerivativeMap> {
    let d = check_base(u0)?;
    let u = u0.clone();
    let label = task.to_string();
    let map = match task {
        Task::Inversion | Task::SoInversion | Task::DiagInversion => {
            DerivativeMap::from_fn(d, u, Provenance::Analytic, label, |h| -h)
        }
        Task::Transposition => DerivativeMap::from_fn(d, u, Provenance::Analytic, label, |h| h.transpose()),
        Task::Conjugation => {
            let ut = u0.transpose();
            let uc = u0.map(|z| z.conj());
            DerivativeMap::from_fn(d, u, Provenance::Analytic, label, move |h| -(&ut * h.map(|z| z.conj()) * &uc))
        }
        Task::Iteration { n } => {
            if n == 0 {
                return Err(Error::InvalidArgument("iteration order must be >= 1".into()));
            }
            let powers: Vec<(ComplexMatrix, ComplexMatrix)> =
                (1..=n as i32).map(|k| (matrix_power(u0, -k), matrix_power(u0, k))).collect();
            DerivativeMap::from_fn(d, u, Provenance::Analytic, label, move |h| {
                let mut acc = ComplexMatrix::zeros(h.nrows(), h.ncols());
                for (inv, fwd) in &powers {
                    acc += inv * h * fwd;
                }
                acc
            })
        }
    };
    Ok(map)
}

/// Derivative of a DSL expression by the chain and product rules.
pub fn dsl_derivative(f: &FuncExpr, u0: &ComplexMatrix) -> Result<DerivativeMap> {
    let d = check_base(u0)?;
    f.validate(d)?;
    let eval = chain_rule(f, u0);
    Ok(DerivativeMap { d, base: u0.clone(), provenance: Provenance::ChainRule, label: f.to_string(), eval })
}

/// Conjugation `H ↦ A H B`.
fn sandwich(a: ComplexMatrix, b: ComplexMatrix) -> Evaluator {
    Arc::new(move |h| &a * h * &b)
}

fn chain_rule(f: &FuncExpr, u: &ComplexMatrix) -> Evaluator {
    match f {
        FuncExpr::Id | FuncExpr::LeftMul(_) => sandwich(u.adjoint(), u.clone()),
        FuncExpr::Inverse => Arc::new(|h| -h),
        FuncExpr::Transpose => Arc::new(|h| h.transpose()),
        FuncExpr::Conjugate => {
            let ut = u.transpose();
            let uc = u.map(|z| z.conj());
            Arc::new(move |h| -(&ut * h.map(|z| z.conj()) * &uc))
        }
        FuncExpr::Power(k) => {
            let k = *k;
            let terms: Vec<(ComplexMatrix, ComplexMatrix)> = if k > 0 {
                (1..=k).map(|j| (matrix_power(u, -j), matrix_power(u, j))).collect()
            } else {
                (0..-k).map(|j| (matrix_power(u, j), matrix_power(u, -j))).collect()
            };
            let sign = if k > 0 { 1.0 } else { -1.0 };
            Arc::new(move |h| {
                let mut acc = ComplexMatrix::zeros(h.nrows(), h.ncols());
                for (l, r) in &terms {
                    acc += l * h * r;
                }
                acc * real(sign)
            })
        }
        FuncExpr::RightMul(v) => {
            let w = u * &v.matrix;
            sandwich(w.adjoint(), w)
        }
        FuncExpr::Sandwich(v) => sandwich(&v.matrix * u.adjoint(), u * v.matrix.adjoint()),
        FuncExpr::Compose(outer, inner) => {
            let w = inner.evaluate_raw(u);
            let g_inner = chain_rule(inner, u);
            let g_outer = chain_rule(outer, &w);
            let w_adj = w.adjoint();
            Arc::new(move |h| g_outer(&(&w * g_inner(h) * &w_adj)))
        }
        FuncExpr::Product(left, right) => {
            let w = right.evaluate_raw(u);
            let g_left = chain_rule(left, u);
            let g_right = chain_rule(right, u);
            let w_adj = w.adjoint();
            Arc::new(move |h| &w_adj * g_left(h) * &w + g_right(h))
        }
    }
}

/// Default finite-difference step.
pub const DEFAULT_EPSILON: f64 = 1e-4;

/// Traceless Hermitian part of `m`.
pub fn traceless_hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    let n = m.nrows();
    let h = symmetrize(m);
    let t = h.trace() / real(n as f64);
    h - identity(n) * t
}

/// Numerical derivative by central differences of `log(f(U0)† f(e^{isH} U0))`.
///
/// The map is sampled once on the Gell-Mann basis and extended linearly. With
/// `richardson`, the steps `ε` and `ε/2` are combined to cancel the `O(ε²)` term.
pub fn finite_difference_derivative(
    f: &FuncExpr,
    u0: &ComplexMatrix,
    epsilon: f64,
    richardson: bool,
) -> Result<DerivativeMap> {
    if !(1e-6..=1e-2).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("finite-difference step must lie in [1e-6, 1e-2], got {epsilon}")));
    }
    let d = check_base(u0)?;
    f.validate(d)?;
    let basis = gellmann_basis(d)?;
    let f_base_adj = f.evaluate_raw(u0).adjoint();
    let log_at = |h: &ComplexMatrix, s: f64| -> Result<ComplexMatrix> {
        let moved = exp_i_hermitian(&(h * real(s))) * u0;
        Ok(mat_log_unitary(&(&f_base_adj * f.evaluate_raw(&moved)))?.into_matrix())
    };
    let central = |h: &ComplexMatrix, eps: f64| -> Result<ComplexMatrix> {
        Ok((log_at(h, eps)? - log_at(h, -eps)?) * real(0.5 / eps))
    };
    let mut images = Vec::with_capacity(basis.len());
    for g in basis.iter() {
        let coarse = central(g.matrix(), epsilon)?;
        let estimate = if richardson {
            let fine = central(g.matrix(), epsilon / 2.0)?;
            (fine * real(4.0) - coarse) * real(1.0 / 3.0)
        } else {
            coarse
        };
        images.push(traceless_hermitian_part(&estimate));
    }
    let provenance = Provenance::FiniteDifference { epsilon, richardson };
    Ok(DerivativeMap::from_fn(d, u0.clone(), provenance, format!("fd[{f}]"), move |h| {
        let mut acc = ComplexMatrix::zeros(d, d);
        for (g, image) in basis.iter().zip(&images) {
            acc += image * crate::linalg::hs_inner(g, h);
        }
        acc
    }))
}

/// Finite differences with the default step and one Richardson step.
pub fn finite_difference_default(f: &FuncExpr, u0: &ComplexMatrix) -> Result<DerivativeMap> {
    finite_difference_derivative(f, u0, DEFAULT_EPSILON, true)
}

/// Choi operator of a derivative map, `J = Σ_j G_j^* ⊗ g(G_j)`.
#[derive(Debug, Clone)]
pub struct ChoiOperator {
    operator: BipartiteOperator,
    source: String,
}

impl ChoiOperator {
    /// Wraps a Hermitian operator on `C^d ⊗ C^d`.
    pub fn from_matrix(d: usize, matrix: ComplexMatrix, source: impl Into<String>) -> Result<Self> {
        Ok(Self { operator: BipartiteOperator::hermitian(d, matrix)?, source: source.into() })
    }

    pub fn local_dim(&self) -> usize {
        self.operator.local_dim()
    }

    pub fn operator(&self) -> &BipartiteOperator {
        &self.operator
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.operator.matrix()
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { operator: self.operator.scale(c), source: format!("{c} * ({})", self.source) }
    }
}

fn assemble(d: usize, g: &DerivativeMap, basis: &OperatorBasis) -> ComplexMatrix {
    let mut j = ComplexMatrix::zeros(d * d, d * d);
    for el in basis.iter() {
        j += kron(&el.map(|z| z.conj()), &g.apply(el.matrix()));
    }
    j
}

/// `J = Σ_j G_j^* ⊗ g(G_j)` over a full `su(d)` basis.
pub fn choi(g: &DerivativeMap, basis: &OperatorBasis) -> Result<ChoiOperator> {
    if !basis.tag().is_full() {
        return Err(Error::InvalidArgument(format!(
            "choi needs a full su(d) basis, got {:?}; use choi_subgroup",
            basis.tag()
        )));
    }
    let d = g.dim();
    if basis.local_dim() != d || basis.len() != d * d - 1 {
        return Err(Error::IncompleteBasis { dim: d, reason: format!("basis has {} elements", basis.len()) });
    }
    let m = assemble(d, g, basis);
    Ok(ChoiOperator { operator: BipartiteOperator::hermitian_unchecked(d, &m), source: g.label().to_string() })
}

/// Choi operator over the Gell-Mann basis.
pub fn choi_gellmann(g: &DerivativeMap) -> Result<ChoiOperator> {
    choi(g, &gellmann_basis(g.dim())?)
}

/// Subgroup-restricted Choi data: the fixed part over the subalgebra and the
/// complement directions that become free variables.
#[derive(Debug, Clone)]
pub struct SubgroupChoi {
    pub fixed: ChoiOperator,
    pub complement: OperatorBasis,
}

/// `Σ_j G_j^* ⊗ g(G_j)` over the subalgebra basis, plus the complement basis.
pub fn choi_subgroup(g: &DerivativeMap, sub: &OperatorBasis, complement: &OperatorBasis) -> Result<SubgroupChoi> {
    let d = g.dim();
    if sub.local_dim() != d || complement.local_dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: sub.local_dim() });
    }
    if sub.len() + complement.len() != d * d - 1 {
        return Err(Error::IncompleteBasis {
            dim: d,
            reason: format!("{} + {} elements, need {}", sub.len(), complement.len(), d * d - 1),
        });
    }
    sub.union(complement, BasisTag::SuGellmann)
        .map_err(|e| Error::IncompleteBasis { dim: d, reason: e.to_string() })?;
    let m = assemble(d, g, sub);
    Ok(SubgroupChoi {
        fixed: ChoiOperator { operator: BipartiteOperator::hermitian_unchecked(d, &m), source: g.label().to_string() },
        complement: complement.clone(),
    })
}

/// Choi operator of a built-in task at `u0`, from the closed formulas.
pub fn task_choi(task: Task, u0: &ComplexMatrix) -> Result<ChoiOperator> {
    choi_gellmann(&analytic_derivative(task, u0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_with;
    use crate::lie::{pauli_basis, subalgebra_bases, SubalgebraKind};
    use crate::linalg::{
        c, eig_hermitian, haar_unitary, max_entangled, norm, partial_trace, swap, HermitianOperator, NormKind, Slot,
    };

    fn pauli_y_over_sqrt2() -> ComplexMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -s), c(0.0, s), c(0.0, 0.0)])
    }

    #[test]
    fn analytic_examples() {
        let u0 = haar_unitary(2, 4).unwrap();
        let z = ComplexMatrix::from_row_slice(2, 2, &[real(1.0), real(0.0), real(0.0), real(-1.0)])
            * real(std::f64::consts::FRAC_1_SQRT_2);
        let inv = analytic_derivative(Task::Inversion, &u0).unwrap();
        assert!((inv.apply(&z) + &z).norm() < 1e-15);
        let tr = analytic_derivative(Task::Transposition, &u0).unwrap();
        let y = pauli_y_over_sqrt2();
        assert!((tr.apply(&y) + &y).norm() < 1e-15);
        let it = analytic_derivative(Task::Iteration { n: 2 }, &identity(2)).unwrap();
        assert!((it.apply(&z) - &z * real(2.0)).norm() < 1e-15);
    }

    #[test]
    fn base_point_must_be_special_unitary() {
        let u = identity(2) * c(0.0, 1.0);
        assert!(analytic_derivative(Task::Inversion, &u).is_err());
        assert!(dsl_derivative(&FuncExpr::Id, &(identity(2) * real(2.0))).is_err());
    }

    #[test]
    fn dsl_power_at_identity_scales() {
        let h = traceless_hermitian_part(&haar_unitary(3, 2).unwrap());
        for n in 1..5 {
            let g = dsl_derivative(&FuncExpr::Power(n), &identity(3)).unwrap();
            assert!((g.apply(&h) - &h * real(n as f64)).norm() < 1e-13);
        }
        let g = dsl_derivative(&FuncExpr::Id, &identity(3)).unwrap();
        assert!((g.apply(&h) - &h).norm() < 1e-15);
    }

    #[test]
    fn chain_rule_agrees_with_finite_differences() {
        let v = haar_unitary(2, 77).unwrap();
        let mut resolve = |_: &str| Ok(v.clone());
        for text in ["conj o inv", "id", "pow:3", "pow:-2", "lmul:v", "rmul:v", "sandwich:v", "inv * T", "conj o (T * pow:2)"] {
            let f = parse_with(text, 2, &mut resolve).unwrap();
            for seed in [5, 6] {
                let u0 = haar_unitary(2, seed).unwrap();
                let exact = choi_gellmann(&dsl_derivative(&f, &u0).unwrap()).unwrap();
                let fd = choi_gellmann(&finite_difference_default(&f, &u0).unwrap()).unwrap();
                let err = (exact.matrix() - fd.matrix()).norm();
                assert!(err < 1e-6, "{text} seed {seed}: {err:.3e}");
            }
        }
    }

    #[test]
    fn chain_rule_matches_task_formulas() {
        for d in [2, 3] {
            for seed in 0..3 {
                let u0 = haar_unitary(d, seed).unwrap();
                for task in [Task::Inversion, Task::Transposition, Task::Conjugation, Task::Iteration { n: 3 }] {
                    let a = task_choi(task, &u0).unwrap();
                    let b = choi_gellmann(&dsl_derivative(&task.expr(), &u0).unwrap()).unwrap();
                    assert!((a.matrix() - b.matrix()).norm() < 1e-12, "{task} d={d}");
                }
            }
        }
    }

    #[test]
    fn finite_difference_of_id_at_identity() {
        let g = finite_difference_derivative(&FuncExpr::Id, &identity(2), 1e-4, false).unwrap();
        for el in gellmann_basis(2).unwrap().iter() {
            assert!((g.apply(el.matrix()) - el.matrix()).norm() < 1e-8);
        }
        assert!(finite_difference_derivative(&FuncExpr::Id, &identity(2), 0.5, false).is_err());
    }

    #[test]
    fn inversion_finite_difference_example() {
        let u0 = haar_unitary(2, 1).unwrap();
        let g = finite_difference_derivative(&FuncExpr::Inverse, &u0, 1e-4, false).unwrap();
        for el in gellmann_basis(2).unwrap().iter() {
            assert!((g.apply(el.matrix()) + el.matrix()).norm() <= 1e-6);
        }
    }

    #[test]
    fn known_choi_operators() {
        let u0 = haar_unitary(2, 3).unwrap();
        let half_id = identity(4) * real(0.5);
        let j_inv = task_choi(Task::Inversion, &u0).unwrap();
        assert!((j_inv.matrix() - (&half_id - max_entangled(2))).norm() < 1e-14);
        let spectrum = eig_hermitian(&HermitianOperator::new(j_inv.matrix().clone()).unwrap()).values;
        for (got, want) in spectrum.iter().zip([-1.5, 0.5, 0.5, 0.5]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((norm(j_inv.matrix(), NormKind::Frobenius).powi(2) - 3.0).abs() < 1e-12);
        let j_tr = task_choi(Task::Transposition, &u0).unwrap();
        assert!((j_tr.matrix() - (swap(2) - &half_id)).norm() < 1e-14);
        let j_conj = task_choi(Task::Conjugation, &identity(3)).unwrap();
        let want = -(swap(3) - identity(9) * real(1.0 / 3.0));
        assert!((j_conj.matrix() - want).norm() < 1e-14);
    }

    #[test]
    fn choi_is_basis_independent_and_traceless() {
        for (d, qubits) in [(2usize, 1usize), (4, 2)] {
            let u0 = haar_unitary(d, 21).unwrap();
            for task in [Task::Inversion, Task::Transposition, Task::Conjugation, Task::Iteration { n: 2 }] {
                let g = analytic_derivative(task, &u0).unwrap();
                let a = choi(&g, &gellmann_basis(d).unwrap()).unwrap();
                let b = choi(&g, &pauli_basis(qubits).unwrap()).unwrap();
                assert!((a.matrix() - b.matrix()).norm() < 1e-8);
                assert!(a.matrix().trace().norm() < 1e-8);
                assert!(partial_trace(a.matrix(), d, Slot::First).norm() < 1e-8);
                assert!(partial_trace(a.matrix(), d, Slot::Second).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn choi_rejects_partial_basis() {
        let (sub, comp) = subalgebra_bases(3, SubalgebraKind::So).unwrap();
        let g = analytic_derivative(Task::Inversion, &identity(3)).unwrap();
        assert!(choi(&g, &sub).is_err());
        assert!(choi_subgroup(&g, &sub, &sub).is_err());
        assert!(choi_subgroup(&g, &sub, &comp).is_ok());
    }

    #[test]
    fn subgroup_fixed_parts() {
        let g = analytic_derivative(Task::Inversion, &identity(2)).unwrap();
        let (sub, comp) = subalgebra_bases(2, SubalgebraKind::Diag).unwrap();
        let fixed = choi_subgroup(&g, &sub, &comp).unwrap().fixed;
        let z = ComplexMatrix::from_row_slice(2, 2, &[real(1.0), real(0.0), real(0.0), real(-1.0)]);
        assert!((fixed.matrix() + kron(&z, &z) * real(0.5)).norm() < 1e-14);
        for r in 0..4 {
            for col in 0..4 {
                if r != col {
                    assert_eq!(fixed.matrix()[(r, col)], real(0.0));
                }
            }
        }
        // so(2): one generator A = Y/√2, A^* = -A, g(A) = -A ⇒ fixed part = A ⊗ A = Y⊗Y / 2.
        let (sub, comp) = subalgebra_bases(2, SubalgebraKind::So).unwrap();
        let fixed = choi_subgroup(&g, &sub, &comp).unwrap().fixed;
        let y = pauli_y_over_sqrt2() * real(std::f64::consts::SQRT_2);
        assert!((fixed.matrix() - kron(&y, &y) * real(0.5)).norm() < 1e-14);
        let full = choi_subgroup(&g, &gellmann_basis(2).unwrap(), &OperatorBasis::empty(2, BasisTag::SuGellmann)).unwrap();
        assert!((full.fixed.matrix() - task_choi(Task::Inversion, &identity(2)).unwrap().matrix()).norm() < 1e-15);
    }
}
