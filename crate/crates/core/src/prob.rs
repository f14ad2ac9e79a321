//! Bounds on the success probability of exact protocols that may fail.
//!
//! With `N` queries and success probability `p` near `U0`, there are
//! `J_A, J_B ⪰ 0` and `β` with
//!
//! ```text
//! J_A - J_B = J + β ⊗ I,   Tr β = N,   Tr J_B = r Tr J_A,   r = (1 - √p) / (1 + √p)
//! ```
//!
//! The set of feasible `r` is an up-ray, so the largest admissible `p` is
//! found by bisection over feasibility problems. Independently, the smallest
//! feasible `r` equals `(a - Nd) / (a + Nd)` with `a = min ‖J + β ⊗ I‖₁` over
//! `Tr β = N`, which is a single trace-norm minimization.

use serde::{Deserialize, Serialize};

use crate::derivative::{task_choi, ChoiOperator};
use crate::error::{Error, Result};
use crate::lie::gellmann_basis;
use crate::linalg::{
    identity, kron, min_eigenvalue, norm, real, BipartiteOperator, ComplexMatrix, HermitianOperator, NormKind,
};
use crate::sdp::lmi::{self, LmiOptions, LmiProblem};
use crate::sdp::{solve_primal, SdpStatus};
use crate::task::Task;

/// Bisection steps on `p`; the final bracket is `2^-30` wide.
pub const BISECTION_STEPS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbMethod {
    SdpBisection,
    TraceNorm,
    ClosedForm,
    Canonical,
}

/// A feasible point of the probabilistic program at `p = max_p`.
#[derive(Debug, Clone)]
pub struct ProbSolution {
    pub d: usize,
    pub n: u32,
    pub max_p: f64,
    pub j_a: BipartiteOperator,
    pub j_b: BipartiteOperator,
    pub beta: HermitianOperator,
    /// `Tr J_A + Tr J_B`: the trace norm of `J + β ⊗ I` for the trace-norm
    /// route, an upper bound on it for bisection.
    pub a_value: f64,
    pub method: ProbMethod,
}

/// `(1 - √p) / (1 + √p)`.
pub fn ratio_for_probability(p: f64) -> f64 {
    let s = p.clamp(0.0, 1.0).sqrt();
    (1.0 - s) / (1.0 + s)
}

/// Inverse of [`ratio_for_probability`]: `((1 - r) / (1 + r))²`.
pub fn probability_for_ratio(r: f64) -> f64 {
    let r = r.clamp(0.0, 1.0);
    ((1.0 - r) / (1.0 + r)).powi(2)
}

fn check_query_count(n: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("query count N must be >= 1".into()));
    }
    Ok(())
}

fn hermitian_operator_from(beta: &ComplexMatrix) -> HermitianOperator {
    HermitianOperator::symmetrized(beta)
}

/// The deterministic solution padded to `Tr β = N`, when `N` already suffices.
fn deterministic_point(j: &ChoiOperator, n: u32) -> Result<Option<ProbSolution>> {
    let d = j.local_dim();
    let det = solve_primal(j)?;
    if det.status != SdpStatus::Optimal {
        return Err(Error::Numerical(format!("deterministic solve did not converge (gap {:.3e})", det.gap)));
    }
    let nf = n as f64;
    if nf < det.primal_value - 1e-7 {
        return Ok(None);
    }
    let pad = (nf - det.primal_value).max(0.0) / d as f64;
    let beta = det.beta.matrix() + identity(d) * real(pad);
    let x = j.matrix() + kron(&beta, &identity(d));
    Ok(Some(ProbSolution {
        d,
        n,
        max_p: 1.0,
        j_a: BipartiteOperator::hermitian_unchecked(d, &x),
        j_b: BipartiteOperator::zeros(d),
        beta: hermitian_operator_from(&beta),
        a_value: nf * d as f64,
        method: ProbMethod::SdpBisection,
    }))
}

/// Feasibility of the program at ratio `r`, as `max s` subject to
/// `J_B - sI ⪰ 0` and `J + β ⊗ I + J_B - sI ⪰ 0` with `Tr β = N` and
/// `Tr J_B = rNd / (1 - r)` built into the parameterization.
/// Returns `(β, J_B)` when `s > 0` is reached.
fn feasible_at(j: &ChoiOperator, n: u32, r: f64) -> Result<Option<(ComplexMatrix, ComplexMatrix)>> {
    let d = j.local_dim();
    let dd = d * d;
    let id = identity(d);
    let id2 = identity(dd);
    let nd = n as f64 * d as f64;
    let trace_b = r * nd / (1.0 - r);
    let su = gellmann_basis(d)?;
    let su2 = gellmann_basis(dd)?;

    let b0 = &id2 * real(trace_b / dd as f64);
    let x0 = j.matrix() + &id2 * real(n as f64 / d as f64);
    let mut problem = LmiProblem::new(vec![b0.clone(), &x0 + &b0]);
    for f in su.iter() {
        problem.add_variable(0.0, &[(1, &kron(f.matrix(), &id))]);
    }
    for g in su2.iter() {
        problem.add_variable(0.0, &[(0, g.matrix()), (1, g.matrix())]);
    }
    let minus = -&id2;
    problem.add_variable(-1.0, &[(0, &minus), (1, &minus)]);

    let scale = trace_b / dd as f64;
    let s0 = scale.min(min_eigenvalue(&(&x0 + &b0))) - 1.0;
    let mut start = vec![0.0; problem.num_vars()];
    *start.last_mut().expect("s variable") = s0;
    let options = LmiOptions { stop_below: Some(0.0), stop_above: Some(0.0), ..LmiOptions::default() };
    let outcome = lmi::solve(&problem, start, &options)?;
    if outcome.objective >= 0.0 {
        return Ok(None);
    }
    let x = &outcome.x;
    let beta: ComplexMatrix =
        &id * real(n as f64 / d as f64) + su.iter().zip(x).map(|(f, &y)| f.matrix() * real(y)).sum::<ComplexMatrix>();
    let offset = su.len();
    let jb: ComplexMatrix =
        b0 + su2.iter().zip(&x[offset..]).map(|(g, &y)| g.matrix() * real(y)).sum::<ComplexMatrix>();
    Ok(Some((beta, jb)))
}

/// Largest `p` for which the probabilistic program is feasible with `N`
/// queries, by bisection on `p`. Returns `p = 1` when `N` reaches the
/// deterministic optimum.
pub fn max_success_probability(j: &ChoiOperator, n: u32) -> Result<ProbSolution> {
    check_query_count(n)?;
    if let Some(sol) = deterministic_point(j, n)? {
        return Ok(sol);
    }
    let d = j.local_dim();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best: Option<(f64, ComplexMatrix, ComplexMatrix)> = None;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        match feasible_at(j, n, ratio_for_probability(mid))? {
            Some((beta, jb)) => {
                lo = mid;
                best = Some((mid, beta, jb));
            }
            None => hi = mid,
        }
    }
    let Some((p, beta, jb)) = best else {
        return Err(Error::Numerical(format!("no feasible success probability above {hi:.3e} for N = {n}")));
    };
    let ja = j.matrix() + kron(&beta, &identity(d)) + &jb;
    let a_value = ja.trace().re + jb.trace().re;
    Ok(ProbSolution {
        d,
        n,
        max_p: p,
        j_a: BipartiteOperator::hermitian_unchecked(d, &ja),
        j_b: BipartiteOperator::hermitian_unchecked(d, &jb),
        beta: hermitian_operator_from(&beta),
        a_value,
        method: ProbMethod::SdpBisection,
    })
}

/// `a = min ‖J + β ⊗ I‖₁` over `Tr β = N`, written as `X = P - Q` with
/// `P, Q ⪰ 0` and `Tr(P + Q) = Nd + 2 Tr Q` minimized; the success
/// probability follows from `r = (a - Nd) / (a + Nd)`.
pub fn min_trace_norm_path(j: &ChoiOperator, n: u32) -> Result<ProbSolution> {
    check_query_count(n)?;
    let d = j.local_dim();
    let dd = d * d;
    let id = identity(d);
    let id2 = identity(dd);
    let nd = n as f64 * d as f64;
    let su = gellmann_basis(d)?;
    let su2 = gellmann_basis(dd)?;

    let x0 = j.matrix() + &id2 * real(n as f64 / d as f64);
    let mut problem = LmiProblem::new(vec![ComplexMatrix::zeros(dd, dd), x0.clone()]);
    for f in su.iter() {
        problem.add_variable(0.0, &[(1, &kron(f.matrix(), &id))]);
    }
    problem.add_variable(2.0 * dd as f64, &[(0, &id2), (1, &id2)]);
    for g in su2.iter() {
        problem.add_variable(0.0, &[(0, g.matrix()), (1, g.matrix())]);
    }
    let mut start = vec![0.0; problem.num_vars()];
    start[su.len()] = (-min_eigenvalue(&x0)).max(0.0) + 1.0;
    let outcome = lmi::solve(&problem, start, &LmiOptions::default())?;
    if !outcome.converged {
        return Err(Error::Numerical(format!("trace-norm solve stopped after {} Newton steps", outcome.newton_steps)));
    }
    let x = &outcome.x;
    let beta: ComplexMatrix =
        &id * real(n as f64 / d as f64) + su.iter().zip(x).map(|(f, &y)| f.matrix() * real(y)).sum::<ComplexMatrix>();
    let offset = su.len();
    let q: ComplexMatrix = &id2 * real(x[offset])
        + su2.iter().zip(&x[offset + 1..]).map(|(g, &y)| g.matrix() * real(y)).sum::<ComplexMatrix>();
    let p_mat = j.matrix() + kron(&beta, &id) + &q;
    let a_value = nd + outcome.objective;
    let r = ((a_value - nd) / (a_value + nd)).max(0.0);
    Ok(ProbSolution {
        d,
        n,
        max_p: probability_for_ratio(r),
        j_a: BipartiteOperator::hermitian_unchecked(d, &p_mat),
        j_b: BipartiteOperator::hermitian_unchecked(d, &q),
        beta: hermitian_operator_from(&beta),
        a_value,
        method: ProbMethod::TraceNorm,
    })
}

/// Closed-form upper bounds on the success probability with `N` queries:
///
/// * transposition: `(d / ((d² - 1)/N + 1))²`
/// * inversion: `(d² / ((2d² - 2)/N + d² - 2))²`
/// * conjugation: `(d / ((d² - 1)/N - 1))²`, or 1 when the denominator is not positive
///
/// Clamped to `[0, 1]`.
pub fn closed_form_curve(task: Task, d: usize, n: u32) -> Result<f64> {
    check_query_count(n)?;
    if d < 2 {
        return Err(Error::InvalidArgument(format!("dimension must be >= 2, got {d}")));
    }
    let (df, nf) = (d as f64, n as f64);
    let value = match task {
        Task::Transposition => (df / ((df * df - 1.0) / nf + 1.0)).powi(2),
        Task::Inversion => (df * df / ((2.0 * df * df - 2.0) / nf + df * df - 2.0)).powi(2),
        Task::Conjugation => {
            let denominator = (df * df - 1.0) / nf - 1.0;
            if denominator <= 0.0 {
                1.0
            } else {
                (df / denominator).powi(2)
            }
        }
        other => {
            return Err(Error::InvalidArgument(format!("no closed-form probability curve for `{other}`")));
        }
    };
    Ok(value.clamp(0.0, 1.0))
}

/// `min(1, (N d ‖J‖_op / ‖J‖_F²)²)`, valid for any Choi operator.
pub fn canonical_bound(j: &ChoiOperator, n: u32) -> Result<f64> {
    check_query_count(n)?;
    let frob_sq = norm(j.matrix(), NormKind::Frobenius).powi(2);
    if frob_sq == 0.0 {
        return Err(Error::ZeroOperator);
    }
    let op = norm(j.matrix(), NormKind::Operator);
    let nd = n as f64 * j.local_dim() as f64;
    Ok((nd * op / frob_sq).powi(2).min(1.0))
}

/// Whether a probabilistic no-go from earlier work applies: conjugation
/// succeeds with probability zero below `d - 1` queries.
pub fn prior_zero_probability(task: Task, d: usize, n: u32) -> bool {
    task == Task::Conjugation && (n as usize) < d - 1
}

/// One row of a probability curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub task: String,
    pub d: usize,
    #[serde(rename = "N")]
    pub n: u32,
    pub max_p_sdp: f64,
    pub closed_form: Option<f64>,
    pub canonical: f64,
    pub trace_norm_path: f64,
    /// Set when earlier work already forces `p = 0` at this `N`.
    pub prior_zero_probability: bool,
}

/// All columns of the curve at one `(task, d, N)` point, with `U0 = I`.
pub fn curve_point(task: Task, d: usize, n: u32) -> Result<CurveRow> {
    if task.subgroup() != crate::lie::Subgroup::Full {
        return Err(Error::InvalidArgument(format!("probability curves need a full-group task, got `{task}`")));
    }
    let j = task_choi(task, &identity(d))?;
    let closed_form = match task {
        Task::Transposition | Task::Inversion | Task::Conjugation => Some(closed_form_curve(task, d, n)?),
        _ => None,
    };
    Ok(CurveRow {
        task: task.to_string(),
        d,
        n,
        max_p_sdp: max_success_probability(&j, n)?.max_p,
        closed_form,
        canonical: canonical_bound(&j, n)?,
        trace_norm_path: min_trace_norm_path(&j, n)?.max_p,
        prior_zero_probability: prior_zero_probability(task, d, n),
    })
}
