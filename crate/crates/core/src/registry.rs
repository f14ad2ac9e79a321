//! Known constants per task and assembly of bound reports.
//!
//! For each built-in task the registry stores the closed-form SDP value, the
//! refined lower bound obtained by Haar averaging, and the best query count
//! known to be achievable. Achievability that is only known as a scaling law
//! is kept as a symbolic marker and never compared numerically.

use serde::{Deserialize, Serialize};

use crate::catalysis::CatalysisVerdict;
use crate::error::Result;
use crate::prob::CurveRow;
use crate::sdp::certificate::{closed_form_value, refined_bound, Certificate};
use crate::sdp::{SdpSolution, SdpStatus};
use crate::task::Task;

pub const REPORT_SCHEMA: &str = "uqc-bounds-report/1";
/// Allowed distance between a numeric SDP value and its closed form.
pub const CLOSED_FORM_TOL: f64 = 1e-5;
pub const ASYMPTOTIC_MARKER: &str = "asymptotic ~(π/2)d²";
pub const NUMERICAL_PRIOR_WORK: &str = "numerical (prior work)";
pub const ANALYTIC: &str = "analytic";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BestKnown {
    Exact { value: u64, provenance: String },
    Asymptotic { marker: String },
}

impl BestKnown {
    fn exact(value: u64, provenance: &str) -> Self {
        BestKnown::Exact { value, provenance: provenance.to_string() }
    }

    fn asymptotic() -> Self {
        BestKnown::Asymptotic { marker: ASYMPTOTIC_MARKER.to_string() }
    }

    pub fn exact_value(&self) -> Option<u64> {
        match self {
            BestKnown::Exact { value, .. } => Some(*value),
            BestKnown::Asymptotic { .. } => None,
        }
    }

    /// Short text form: the number, or the marker.
    pub fn display(&self) -> String {
        match self {
            BestKnown::Exact { value, .. } => value.to_string(),
            BestKnown::Asymptotic { marker } => marker.clone(),
        }
    }

    pub fn provenance(&self) -> Option<&str> {
        match self {
            BestKnown::Exact { provenance, .. } => Some(provenance),
            BestKnown::Asymptotic { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedEntry {
    pub value: f64,
    /// Value before rounding up to an integer, when it differs.
    pub intermediate: Option<f64>,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryRow {
    pub task: Task,
    pub d: usize,
    pub sdp_closed_form: f64,
    pub refined: Option<RefinedEntry>,
    pub best_known: Option<BestKnown>,
}

impl RegistryRow {
    /// `refined ≥ closed form` and `best known ≥ refined` where both are numbers.
    pub fn is_consistent(&self) -> bool {
        let refined_ok = self.refined.as_ref().is_none_or(|r| r.value >= self.sdp_closed_form);
        let lower = self.refined.as_ref().map_or(self.sdp_closed_form, |r| r.value);
        let known_ok = self.best_known.as_ref().and_then(BestKnown::exact_value).is_none_or(|k| k as f64 >= lower);
        refined_ok && known_ok
    }
}

/// Registry row for `task` at dimension `d`.
pub fn lookup(task: Task, d: usize) -> Result<RegistryRow> {
    if d < 2 {
        return Err(crate::Error::InvalidArgument(format!("dimension must be >= 2, got {d}")));
    }
    let refined = refined_bound(task, d).map(|r| RefinedEntry {
        value: r.value,
        intermediate: r.intermediate,
        provenance: r.provenance.to_string(),
    });
    let best_known = match task {
        Task::Inversion | Task::Transposition if d == 2 => Some(BestKnown::exact(4, NUMERICAL_PRIOR_WORK)),
        Task::Inversion | Task::Transposition => Some(BestKnown::asymptotic()),
        Task::Conjugation => Some(BestKnown::exact(d as u64 - 1, ANALYTIC)),
        Task::Iteration { n } => Some(BestKnown::exact(n as u64, ANALYTIC)),
        Task::SoInversion | Task::DiagInversion => None,
    };
    Ok(RegistryRow { task, d, sdp_closed_form: closed_form_value(task, d), refined, best_known })
}

/// What the report is about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDescriptor {
    /// Built-in task name, or `expression` for a DSL input.
    pub name: String,
    /// Iteration order, when relevant.
    pub n: Option<u32>,
    pub expression: String,
    pub subgroup: String,
    pub base_point: String,
}

impl TaskDescriptor {
    pub fn builtin(task: Task, base_point: impl Into<String>) -> Self {
        Self {
            name: task.name().to_string(),
            n: match task {
                Task::Iteration { n } => Some(n),
                _ => None,
            },
            expression: task.expr().to_string(),
            subgroup: task.subgroup().to_string(),
            base_point: base_point.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStatus {
    Consistent,
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub schema: String,
    pub task: TaskDescriptor,
    pub d: usize,
    pub numeric_sdp_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub solver_status: SdpStatus,
    pub rounded_queries: u64,
    pub closed_form_value: Option<f64>,
    pub refined_bound: Option<RefinedEntry>,
    pub best_known_achievable: Option<BestKnown>,
    pub certificate: Option<Certificate>,
    pub catalysis: Option<CatalysisVerdict>,
    pub probabilistic: Option<Vec<CurveRow>>,
    pub status: ReportStatus,
    pub violations: Vec<Violation>,
}

/// Inputs to [`assemble_report`]; everything but the solution is optional.
#[derive(Debug, Clone)]
pub struct ReportParts<'a> {
    pub task: TaskDescriptor,
    pub d: usize,
    pub solution: &'a SdpSolution,
    pub registry: Option<RegistryRow>,
    pub certificate: Option<Certificate>,
    pub catalysis: Option<CatalysisVerdict>,
    pub probabilistic: Option<Vec<CurveRow>>,
}

/// Builds the report and runs the consistency checks; failures are listed
/// in `violations` and mark the report inconsistent.
pub fn assemble_report(parts: ReportParts<'_>) -> BoundReport {
    let solution = parts.solution;
    let mut violations = Vec::new();
    let closed_form_value = parts.registry.as_ref().map(|r| r.sdp_closed_form);
    if let Some(closed) = closed_form_value {
        let delta = solution.primal_value - closed;
        if delta.abs() > CLOSED_FORM_TOL {
            violations.push(Violation {
                field: "numeric_sdp_value".into(),
                message: format!("numeric value {} differs from closed form {closed}", solution.primal_value),
                delta: Some(delta),
            });
        }
    }
    if let Some(row) = &parts.registry {
        if !row.is_consistent() {
            violations.push(Violation {
                field: "refined_bound".into(),
                message: "registry row contradicts its own lower bounds".into(),
                delta: None,
            });
        }
    }
    if let Some(cert) = &parts.certificate {
        if !cert.is_valid() {
            violations.push(Violation {
                field: "certificate".into(),
                message: format!(
                    "analytic certificate failed (primal λmin {:.3e}, dual λmin {:.3e}, constraint error {:.3e})",
                    cert.primal_min_eigenvalue, cert.dual_min_eigenvalue, cert.dual_constraint_error
                ),
                delta: Some(cert.primal_objective - cert.dual_objective),
            });
        }
    }
    let status = if violations.is_empty() { ReportStatus::Consistent } else { ReportStatus::Inconsistent };
    let (refined_bound, best_known_achievable) = match parts.registry {
        Some(row) => (row.refined, row.best_known),
        None => (None, None),
    };
    BoundReport {
        schema: REPORT_SCHEMA.to_string(),
        task: parts.task,
        d: parts.d,
        numeric_sdp_value: solution.primal_value,
        dual_value: solution.dual_value,
        gap: solution.gap,
        solver_status: solution.status,
        rounded_queries: solution.rounded(),
        closed_form_value,
        refined_bound,
        best_known_achievable,
        certificate: parts.certificate,
        catalysis: parts.catalysis,
        probabilistic: parts.probabilistic,
        status,
        violations,
    }
}

/// Rounds to `digits` significant digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

/// Text form of a number with 9 significant digits; integral values keep a
/// trailing `.0` and very small or large magnitudes use exponent notation.
pub fn fmt_num(x: f64) -> String {
    let r = round_sig(x, 9);
    if r == 0.0 {
        // Avoid "-0".
        return "0.0".into();
    }
    format!("{r:?}")
}

pub fn fmt_opt_num(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

pub const REPORT_CSV_COLUMNS: [&str; 14] = [
    "task",
    "subgroup",
    "d",
    "numeric_sdp_value",
    "dual_value",
    "gap",
    "solver_status",
    "rounded_queries",
    "closed_form_value",
    "refined_bound",
    "best_known_achievable",
    "best_known_provenance",
    "catalysis",
    "status",
];

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl BoundReport {
    /// One CSV line in [`REPORT_CSV_COLUMNS`] order.
    pub fn csv_row(&self) -> String {
        let task = match self.task.n {
            Some(n) => format!("{}:{n}", self.task.name),
            None if self.task.name == "expression" => self.task.expression.clone(),
            None => self.task.name.clone(),
        };
        let fields = [
            task,
            self.task.subgroup.clone(),
            self.d.to_string(),
            fmt_num(self.numeric_sdp_value),
            fmt_num(self.dual_value),
            fmt_num(self.gap),
            enum_name(&self.solver_status),
            self.rounded_queries.to_string(),
            fmt_opt_num(self.closed_form_value),
            fmt_opt_num(self.refined_bound.as_ref().map(|r| r.value)),
            self.best_known_achievable.as_ref().map(BestKnown::display).unwrap_or_default(),
            self.best_known_achievable.as_ref().and_then(BestKnown::provenance).unwrap_or_default().to_string(),
            self.catalysis.as_ref().map(|c| enum_name(&c.verdict)).unwrap_or_default(),
            enum_name(&self.status),
        ];
        fields.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(",")
    }
}

/// The serde name of a unit enum variant.
fn enum_name<T: Serialize>(value: &T) -> String {
    match serde_json::to_value(value) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derivative::task_choi;
    use crate::linalg::identity;
    use crate::sdp::solve_primal;

    #[test]
    fn rows() {
        let row = lookup(Task::Conjugation, 6).unwrap();
        assert_eq!(row.sdp_closed_form, 5.0);
        assert_eq!(row.refined.unwrap().value, 5.0);
        assert_eq!(row.best_known.unwrap().exact_value(), Some(5));

        let row = lookup(Task::Inversion, 2).unwrap();
        assert_eq!((row.sdp_closed_form, row.refined.as_ref().unwrap().value), (3.0, 4.0));
        assert_eq!(row.best_known.as_ref().unwrap().provenance(), Some(NUMERICAL_PRIOR_WORK));
        assert_eq!(row.best_known.unwrap().exact_value(), Some(4));

        let row = lookup(Task::Transposition, 3).unwrap();
        assert_eq!((row.sdp_closed_form, row.refined.as_ref().unwrap().value), (4.0, 6.0));
        assert_eq!(row.best_known, Some(BestKnown::Asymptotic { marker: ASYMPTOTIC_MARKER.into() }));

        let row = lookup(Task::DiagInversion, 4).unwrap();
        assert!(row.refined.is_none() && row.best_known.is_none());
    }

    #[test]
    fn every_row_consistent() {
        for d in 2..=8 {
            for task in Task::all(1).into_iter().chain((2..=5).map(|n| Task::Iteration { n })) {
                assert!(lookup(task, d).unwrap().is_consistent(), "{task} d={d}");
            }
        }
    }

    fn inversion_report(solution: &SdpSolution) -> BoundReport {
        assemble_report(ReportParts {
            task: TaskDescriptor::builtin(Task::Inversion, "identity"),
            d: 3,
            solution,
            registry: Some(lookup(Task::Inversion, 3).unwrap()),
            certificate: None,
            catalysis: None,
            probabilistic: None,
        })
    }

    #[test]
    fn report_consistency() {
        let sol = solve_primal(&task_choi(Task::Inversion, &identity(3)).unwrap()).unwrap();
        let report = inversion_report(&sol);
        assert_eq!(report.status, ReportStatus::Consistent);
        assert_eq!(report.rounded_queries, 8);
        assert_eq!(report.schema, REPORT_SCHEMA);

        let mut bad = sol.clone();
        bad.primal_value = 7.9;
        let report = inversion_report(&bad);
        assert_eq!(report.status, ReportStatus::Inconsistent);
        let delta = report.violations[0].delta.unwrap();
        assert!((delta + 0.1).abs() < 1e-12);
    }

    #[test]
    fn csv_and_numbers() {
        assert_eq!(fmt_num(8.0000000001), "8.0");
        assert_eq!(fmt_num(0.64), "0.64");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_num(-1.25e-17), "-1.25e-17");
        assert_eq!(fmt_num(-0.0), "0.0");
        assert_eq!(fmt_num(2.5e-10), "2.5e-10");
        let sol = solve_primal(&task_choi(Task::Inversion, &identity(3)).unwrap()).unwrap();
        let row = inversion_report(&sol).csv_row();
        assert!(row.starts_with("inversion,full,3,8.0,"), "{row}");
        assert_eq!(row.split(',').count(), REPORT_CSV_COLUMNS.len());
        assert!(row.contains("asymptotic ~(π/2)d²"));
    }
}
