//! Tightness test that rules out optimal catalytic protocols.
//!
//! If `f(U0) = I`, the derivative of `U ↦ f(U)^n` at `U0` is `n` times the
//! derivative of `f`, so the SDP value for the power map is `n` times the
//! value for `f`. When the value for `f` is also achieved by a known protocol,
//! an optimal protocol for `f` cannot be catalytic.

use serde::{Deserialize, Serialize};

use crate::derivative::{analytic_derivative, choi_gellmann, dsl_derivative, ChoiOperator};
use crate::dsl::FuncExpr;
use crate::error::{Error, Result};
use crate::linalg::{identity, ComplexMatrix};
use crate::registry;
use crate::sdp::{solve_derivative, SdpStatus};
use crate::task::Task;

/// Allowed `‖f(U0) - I‖_F`.
pub const BASE_POINT_TOL: f64 = 1e-8;
/// Allowed distance between the SDP value and a known achievable count, and
/// between a measured scaling ratio and `n`.
pub const TIGHTNESS_TOL: f64 = 1e-5;
/// Allowed Frobenius distance between `n·J` and the Choi operator of the
/// explicit `n`-fold product.
pub const POWER_MAP_TOL: f64 = 1e-7;
/// Powers at which the scaling is measured.
pub const SCALING_POWERS: [u32; 2] = [2, 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    CatalysisRuledOut,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    pub n: u32,
    /// `SDP(n·J) / SDP(J)`.
    pub measured_ratio: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalysisVerdict {
    pub task: Task,
    pub d: usize,
    pub sdp_value: f64,
    pub known_achievable_n: Option<u64>,
    pub base_point_distance: f64,
    pub scaling_check: Vec<ScalingCheck>,
    pub verdict: Verdict,
}

fn base_point_distance(f: &FuncExpr, u0: &ComplexMatrix) -> Result<f64> {
    let d = u0.nrows();
    Ok((f.evaluate(u0)? - identity(d)).norm())
}

/// Choi operator of the derivative of `U ↦ f(U)^n` at `u0`, computed as `n·J`
/// and cross-checked against the derivative of the explicit product
/// `f * f * ... * f`.
pub fn power_map_choi(f: &FuncExpr, u0: &ComplexMatrix, n: u32) -> Result<ChoiOperator> {
    if n == 0 {
        return Err(Error::InvalidArgument("power must be >= 1".into()));
    }
    let distance = base_point_distance(f, u0)?;
    if distance > BASE_POINT_TOL {
        return Err(Error::BasePoint { distance });
    }
    let j = choi_gellmann(&dsl_derivative(f, u0)?)?;
    let scaled = j.scaled(n as f64);
    let product = FuncExpr::repeated_product(f, n as usize)?;
    let oracle = choi_gellmann(&dsl_derivative(&product, u0)?)?;
    let mismatch = (scaled.matrix() - oracle.matrix()).norm();
    if mismatch > POWER_MAP_TOL {
        return Err(Error::Numerical(format!("n·J differs from the product-rule Choi operator by {mismatch:.3e}")));
    }
    Ok(scaled)
}

/// [`power_map_choi`] for a built-in task.
pub fn task_power_map_choi(task: Task, u0: &ComplexMatrix, n: u32) -> Result<ChoiOperator> {
    power_map_choi(&task.expr(), u0, n)
}

/// Verdict at `U0 = I`. Without `known_achievable_n`, the registry's best
/// known exact query count is used.
pub fn catalysis_verdict(task: Task, d: usize, known_achievable_n: Option<u64>) -> Result<CatalysisVerdict> {
    let subgroup = task.subgroup();
    let u0 = identity(subgroup.total_dim(d));
    let known = match known_achievable_n {
        Some(k) => Some(k),
        None => registry::lookup(task, d)?.best_known.and_then(|b| b.exact_value()),
    };
    let base_point_distance = base_point_distance(&task.expr(), &u0)?;
    let g = analytic_derivative(task, &u0)?;
    let solve = |scale: f64| -> Result<f64> {
        let sol = solve_derivative(&g.scaled(scale), subgroup, d)?;
        if sol.status != SdpStatus::Optimal {
            return Err(Error::Numerical(format!("SDP for {task} (scale {scale}) stopped with gap {:.3e}", sol.gap)));
        }
        Ok(sol.primal_value)
    };
    let sdp_value = solve(1.0)?;
    let mut scaling_check = Vec::with_capacity(SCALING_POWERS.len());
    for n in SCALING_POWERS {
        let measured_ratio = solve(n as f64)? / sdp_value;
        let passed = (measured_ratio - n as f64).abs() <= TIGHTNESS_TOL;
        scaling_check.push(ScalingCheck { n, measured_ratio, passed });
    }
    let tight = known.is_some_and(|k| (sdp_value - k as f64).abs() <= TIGHTNESS_TOL);
    let ruled_out =
        tight && base_point_distance <= BASE_POINT_TOL && scaling_check.iter().all(|check| check.passed);
    Ok(CatalysisVerdict {
        task,
        d,
        sdp_value,
        known_achievable_n: known,
        base_point_distance,
        scaling_check,
        verdict: if ruled_out { Verdict::CatalysisRuledOut } else { Verdict::Inconclusive },
    })
}
