//! Built-in target transformations.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dsl::FuncExpr;
use crate::error::{Error, Result};
use crate::lie::Subgroup;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Task {
    /// `U ↦ U^{-1}`.
    Inversion,
    /// `U ↦ U^T`.
    Transposition,
    /// `U ↦ U^*`.
    Conjugation,
    /// `U ↦ U^n`.
    Iteration { n: u32 },
    /// Inversion with the promise `U ∈ SO(d)`.
    SoInversion,
    /// Inversion with the promise that `U` is diagonal.
    DiagInversion,
}

impl Task {
    /// Looks a task up by name; `iteration` needs `n`.
    pub fn from_name(name: &str, n: Option<u32>) -> Result<Self> {
        let name = name.trim().to_ascii_lowercase().replace('-', "_");
        if let Some(order) = name.strip_prefix("iteration:") {
            let n = order.parse::<u32>().map_err(|_| Error::InvalidArgument(format!("bad iteration order `{order}`")))?;
            return Task::iteration(n);
        }
        match name.as_str() {
            "inversion" | "inv" => Ok(Task::Inversion),
            "transposition" | "transpose" => Ok(Task::Transposition),
            "conjugation" | "conj" => Ok(Task::Conjugation),
            "iteration" => Task::iteration(
                n.ok_or_else(|| Error::InvalidArgument("task `iteration` needs an order n >= 1".into()))?,
            ),
            "so_inversion" => Ok(Task::SoInversion),
            "diag_inversion" => Ok(Task::DiagInversion),
            _ => Err(Error::UnknownTask(name)),
        }
    }

    pub fn iteration(n: u32) -> Result<Self> {
        if n == 0 || n > i32::MAX as u32 {
            return Err(Error::InvalidArgument(format!("iteration order must be >= 1, got {n}")));
        }
        Ok(Task::Iteration { n })
    }

    /// Name without parameters.
    pub fn name(self) -> &'static str {
        match self {
            Task::Inversion => "inversion",
            Task::Transposition => "transposition",
            Task::Conjugation => "conjugation",
            Task::Iteration { .. } => "iteration",
            Task::SoInversion => "so_inversion",
            Task::DiagInversion => "diag_inversion",
        }
    }

    pub fn expr(self) -> FuncExpr {
        match self {
            Task::Inversion | Task::SoInversion | Task::DiagInversion => FuncExpr::Inverse,
            Task::Transposition => FuncExpr::Transpose,
            Task::Conjugation => FuncExpr::Conjugate,
            Task::Iteration { n } => FuncExpr::Power(n as i32),
        }
    }

    /// The subgroup promise attached to the task.
    pub fn subgroup(self) -> Subgroup {
        match self {
            Task::SoInversion => Subgroup::So,
            Task::DiagInversion => Subgroup::Diag,
            _ => Subgroup::Full,
        }
    }

    /// All built-in tasks, with iteration at order `n`.
    pub fn all(n: u32) -> [Task; 6] {
        [
            Task::Inversion,
            Task::Transposition,
            Task::Conjugation,
            Task::Iteration { n },
            Task::SoInversion,
            Task::DiagInversion,
        ]
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Iteration { n } => write!(f, "iteration:{n}"),
            other => f.write_str(other.name()),
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Task::from_name(s, None)
    }
}
