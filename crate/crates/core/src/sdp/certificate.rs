//! Closed-form primal and dual points for the built-in tasks, checked directly.
//!
//! | task            | `β`              | dual witness `Γ`                                  | value   |
//! |-----------------|------------------|---------------------------------------------------|---------|
//! | inversion       | `(d²-1)/d · I`   | `|I⟩⟩⟨⟨I|`                                         | `d²-1`  |
//! | transposition   | `(d+1)/d · I`    | `2 Π_anti / (d-1)`                                | `d+1`   |
//! | conjugation     | `(d-1)/d · I`    | `(I⊗U0ᵀ) 2 Π_sym (I⊗U0^*) / (d+1)`                | `d-1`   |
//! | iteration `n`   | `n/d · I`        | `(I⊗I - Σ_j |P_j^*⟩⟩⟨⟨P_j^*|) / (d-1)`             | `n`     |
//! | SO(d) inversion | `(d-1)/d · I`    | `(2 Π_anti + |I⟩⟩⟨⟨I|) / d`                        | `d-1`   |
//! | diag inversion  | `(d-1)/d · I`    | `Σ_j |jj⟩⟨jj|`                                     | `d-1`   |
//!
//! `P_j` are rank-one eigenprojectors of `U0`. The SO(d) certificate also sets
//! the free complement part to
//! `Σ_{j<k} S_jk ⊗ a S_jk + Σ_j D_j ⊗ 2a D_j` with `S_jk = |j⟩⟨k| + |k⟩⟨j|`,
//! `D_j = |j⟩⟨j| - I/d` and `a = (d-2) / (2(d+2))`.

use serde::{Deserialize, Serialize};

use crate::derivative::{analytic_derivative, choi_gellmann, choi_subgroup};
use crate::error::{Error, Result};
use crate::linalg::{
    antisym_projector, identity, kron, max_entangled, min_eigenvalue, partial_trace, real, sym_projector,
    trace_product_re, vectorize, ComplexMatrix, HermitianOperator, Slot,
};
use crate::task::Task;

/// Tolerance on `λ_min` for a point to count as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-10;
/// Tolerance on equality constraints and on primal/dual value agreement.
pub const MATCH_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub task: Task,
    pub d: usize,
    pub claimed_value: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_min_eigenvalue: f64,
    pub dual_min_eigenvalue: f64,
    pub dual_constraint_error: f64,
    pub primal_feasible: bool,
    pub dual_feasible: bool,
    pub values_match: bool,
    #[serde(skip)]
    pub primal_point: Option<HermitianOperator>,
    #[serde(skip)]
    pub dual_witness: Option<ComplexMatrix>,
}

impl Certificate {
    /// Both points feasible, objectives equal, and equal to the claimed value.
    pub fn is_valid(&self) -> bool {
        self.values_match && (self.primal_objective - self.claimed_value).abs() <= MATCH_TOL
    }
}

/// Closed-form SDP value of a task.
pub fn closed_form_value(task: Task, d: usize) -> f64 {
    let d = d as f64;
    match task {
        Task::Inversion => d * d - 1.0,
        Task::Transposition => d + 1.0,
        Task::Conjugation | Task::SoInversion | Task::DiagInversion => d - 1.0,
        Task::Iteration { n } => n as f64,
    }
}

fn check_dim(task: Task, d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("dimension must be >= 2, got {d}")));
    }
    if matches!(task, Task::Iteration { n: 0 }) {
        return Err(Error::InvalidArgument("iteration order must be >= 1".into()));
    }
    Ok(())
}

/// Certificate at the default base point `U0 = I`.
pub fn verify_certificate(task: Task, d: usize) -> Result<Certificate> {
    check_dim(task, d)?;
    verify_certificate_at(task, &identity(d))
}

/// Rank-one eigenprojectors of a unitary, from its Schur form.
fn eigenprojectors(u: &ComplexMatrix) -> Result<Vec<ComplexMatrix>> {
    let d = u.nrows();
    let (q, t) = u.clone().schur().unpack();
    let mut off = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                off = off.max(t[(i, j)].norm());
            }
        }
    }
    if off > 1e-8 {
        return Err(Error::Numerical(format!("Schur form of U0 is not diagonal (off-diagonal {off:.3e})")));
    }
    Ok((0..d).map(|j| q.column(j) * q.column(j).adjoint()).collect())
}

/// Builds and checks the closed-form certificate at base point `u0`.
pub fn verify_certificate_at(task: Task, u0: &ComplexMatrix) -> Result<Certificate> {
    let d = u0.nrows();
    check_dim(task, d)?;
    let g = analytic_derivative(task, u0)?;
    let id = identity(d);
    let dd = d as f64;
    let claimed = closed_form_value(task, d);
    let beta = id.clone() * real(claimed / dd);

    let (fixed, complement) = match task.subgroup() {
        crate::lie::Subgroup::Full => (choi_gellmann(&g)?.matrix().clone(), None),
        s => {
            let (sub, comp) = s.bases(d)?;
            (choi_subgroup(&g, &sub, &comp)?.fixed.matrix().clone(), Some(comp))
        }
    };

    let mut primal_operator = &fixed + kron(&beta, &id);
    if task == Task::SoInversion {
        let a = (dd - 2.0) / (2.0 * (dd + 2.0));
        for j in 0..d {
            for k in j + 1..d {
                let mut s = ComplexMatrix::zeros(d, d);
                s[(j, k)] = real(1.0);
                s[(k, j)] = real(1.0);
                primal_operator += kron(&s, &(&s * real(a)));
            }
            let mut dj = id.clone() * real(-1.0 / dd);
            dj[(j, j)] += real(1.0);
            primal_operator += kron(&dj, &(&dj * real(2.0 * a)));
        }
    }

    let witness = match task {
        Task::Inversion => max_entangled(d),
        Task::Transposition => antisym_projector(d) * real(2.0 / (dd - 1.0)),
        Task::Conjugation => {
            let left = kron(&id, &u0.transpose());
            let right = kron(&id, &u0.map(|z| z.conj()));
            left * sym_projector(d) * right * real(2.0 / (dd + 1.0))
        }
        Task::Iteration { .. } => {
            let mut p = ComplexMatrix::zeros(d * d, d * d);
            for proj in eigenprojectors(u0)? {
                let v = vectorize(&proj.map(|z| z.conj()))?;
                p += &v * v.adjoint();
            }
            (identity(d * d) - p) * real(1.0 / (dd - 1.0))
        }
        Task::SoInversion => (antisym_projector(d) * real(2.0) + max_entangled(d)) * real(1.0 / dd),
        Task::DiagInversion => {
            let mut w = ComplexMatrix::zeros(d * d, d * d);
            for j in 0..d {
                w[(j * d + j, j * d + j)] = real(1.0);
            }
            w
        }
    };

    let primal_min_eigenvalue = min_eigenvalue(&primal_operator);
    let dual_min_eigenvalue = min_eigenvalue(&witness);
    let mut dual_constraint_error = (partial_trace(&witness, d, Slot::Second) - &id).norm();
    if let Some(comp) = &complement {
        for b in comp.iter() {
            let lhs = kron(&b.map(|z| z.conj()), &id) * &witness;
            dual_constraint_error = dual_constraint_error.max(partial_trace(&lhs, d, Slot::First).norm());
        }
    }
    let primal_objective = beta.trace().re;
    let dual_objective = -trace_product_re(&fixed, &witness);
    let primal_feasible = primal_min_eigenvalue >= -FEASIBILITY_TOL;
    let dual_feasible = dual_min_eigenvalue >= -FEASIBILITY_TOL && dual_constraint_error <= MATCH_TOL;
    let values_match = primal_feasible && dual_feasible && (primal_objective - dual_objective).abs() <= MATCH_TOL;
    Ok(Certificate {
        task,
        d,
        claimed_value: claimed,
        primal_objective,
        dual_objective,
        primal_min_eigenvalue,
        dual_min_eigenvalue,
        dual_constraint_error,
        primal_feasible,
        dual_feasible,
        values_match,
        primal_point: Some(HermitianOperator::symmetrized(&beta)),
        dual_witness: Some(witness),
    })
}

/// Refined lower bound that holds for exact protocols beyond the SDP value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinedBound {
    pub value: f64,
    /// Sharper non-integer bound from the same argument, when one exists.
    pub intermediate: Option<f64>,
    pub provenance: &'static str,
}

/// Analytic refined bounds: `d²` for inversion, `4` (d = 2) or `d + 3` for
/// transposition, `d - 1` for conjugation. Absent for other tasks.
pub fn refined_bound(task: Task, d: usize) -> Option<RefinedBound> {
    let df = d as f64;
    let provenance = "analytic (not an SDP output)";
    match task {
        Task::Inversion => Some(RefinedBound { value: df * df, intermediate: None, provenance }),
        Task::Transposition if d == 2 => Some(RefinedBound { value: 4.0, intermediate: None, provenance }),
        Task::Transposition => Some(RefinedBound {
            value: df + 3.0,
            intermediate: Some(df + 3.0 - df / (2.0 * (df - 1.0))),
            provenance,
        }),
        Task::Conjugation => Some(RefinedBound { value: df - 1.0, intermediate: None, provenance }),
        // n sequential queries already achieve the SDP value.
        Task::Iteration { n } => Some(RefinedBound { value: n as f64, intermediate: None, provenance }),
        Task::SoInversion | Task::DiagInversion => None,
    }
}
