use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use uqc::catalysis::{catalysis_verdict, CatalysisVerdict};
use uqc::derivative::{analytic_derivative, choi_gellmann, dsl_derivative, finite_difference_derivative, DerivativeMap};
use uqc::dsl::{parse_with, FuncExpr};
use uqc::lie::{Subgroup, MAX_TENSOR_DIM};
use uqc::linalg::{haar_unitary, identity, load_unitary, ComplexMatrix};
use uqc::prob::{curve_point, CurveRow};
use uqc::registry::{
    assemble_report, fmt_num, fmt_opt_num, lookup, BoundReport, RegistryRow, ReportParts, ReportStatus,
    TaskDescriptor, REPORT_CSV_COLUMNS,
};
use uqc::sdp::certificate::{closed_form_value, verify_certificate, verify_certificate_at, Certificate};
use uqc::sdp::{solve_derivative, SdpStatus};
use uqc::task::Task;

use crate::args::{
    BoundArgs, BuiltinTask, CatalysisArgs, CertifyArgs, DerivativeCheckArgs, Dims, Format, ProbCurveArgs, TaskSpec,
};
use crate::output::{csv_line, to_json};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_INCONSISTENT: u8 = 4;

/// Largest dimension for a full-group solve.
pub const MAX_FULL_DIM: usize = 8;
/// Slack for the probability dominance checks.
const DOMINANCE_TOL: f64 = 1e-6;
/// Allowed disagreement between bisection and the trace-norm route.
const ROUTE_AGREEMENT_TOL: f64 = 1e-3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<uqc::Error> for CliError {
    fn from(e: uqc::Error) -> Self {
        let code = match e {
            uqc::Error::Numerical(_) => EXIT_SOLVER,
            _ => EXIT_USAGE,
        };
        Self { code, message: e.to_string() }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// What a command prints and how it exits.
pub struct Outcome {
    pub stdout: String,
    pub code: u8,
    pub warnings: Vec<String>,
}

fn parse_dims(dims: &Dims) -> CliResult<Vec<usize>> {
    let out: Vec<usize> = match (&dims.d, &dims.d_range) {
        (Some(d), _) => vec![*d],
        (None, Some(range)) => {
            let (a, b) = range
                .split_once("..=")
                .or_else(|| range.split_once(".."))
                .or_else(|| range.split_once('-'))
                .ok_or_else(|| CliError::usage(format!("bad --d-range `{range}`, expected a..b")))?;
            let parse = |s: &str| {
                s.trim().parse::<usize>().map_err(|_| CliError::usage(format!("bad --d-range `{range}`, expected a..b")))
            };
            let (a, b) = (parse(a)?, parse(b)?);
            if a > b {
                return Err(CliError::usage(format!("empty --d-range `{range}`")));
            }
            (a..=b).collect()
        }
        (None, None) => return Err(CliError::usage("either --d or --d-range is required")),
    };
    if let Some(&bad) = out.iter().find(|&&d| d < 2) {
        return Err(CliError::usage(format!("dimension must be >= 2, got {bad}")));
    }
    Ok(out)
}

fn check_size(subgroup: Subgroup, d: usize) -> CliResult<()> {
    match subgroup {
        Subgroup::Tensor(_) => {
            let total = subgroup.total_dim(d);
            if total > MAX_TENSOR_DIM {
                return Err(CliError::usage(format!("tensor product dimension {total} exceeds {MAX_TENSOR_DIM}")));
            }
        }
        _ if d > MAX_FULL_DIM => {
            return Err(CliError::usage(format!("dimension {d} exceeds {MAX_FULL_DIM}")));
        }
        _ => {}
    }
    Ok(())
}

fn parse_task(task: &str, n: Option<u32>) -> CliResult<Task> {
    Ok(Task::from_name(task, n)?)
}

fn builtin(spec: &BuiltinTask) -> CliResult<Task> {
    parse_task(&spec.task, spec.n)
}

/// `identity`, `haar:<seed>`, or a path to a matrix file.
fn resolve_unitary(spec: &str, dim: usize) -> CliResult<ComplexMatrix> {
    if spec == "identity" {
        return Ok(identity(dim));
    }
    if let Some(seed) = spec.strip_prefix("haar:") {
        let seed = seed.parse::<u64>().map_err(|_| CliError::usage(format!("bad seed in `{spec}`")))?;
        return Ok(haar_unitary(dim, seed)?);
    }
    let u = load_unitary(spec)?;
    if u.nrows() != dim {
        return Err(CliError::usage(format!("matrix `{spec}` is {}x{}, expected dimension {dim}", u.nrows(), u.ncols())));
    }
    Ok(u)
}

fn parse_expr(text: &str, dim: usize) -> CliResult<FuncExpr> {
    Ok(parse_with(text, dim, &mut |name| match name.strip_prefix("haar:") {
        Some(seed) => {
            let seed = seed
                .parse::<u64>()
                .map_err(|_| uqc::Error::InvalidArgument(format!("bad seed in `{name}`")))?;
            haar_unitary(dim, seed)
        }
        None => load_unitary(name),
    })?)
}

enum Target {
    Builtin(Task),
    Expr(String),
}

fn target(spec: &TaskSpec) -> CliResult<Target> {
    match (&spec.task, &spec.f_expr) {
        (Some(t), None) => Ok(Target::Builtin(parse_task(t, spec.n)?)),
        (None, Some(e)) => Ok(Target::Expr(e.clone())),
        _ => Err(CliError::usage("give exactly one of --task and --f-expr")),
    }
}

/// Folds a `--subgroup` flag into a built-in task.
fn promise(task: Task, flag: Subgroup) -> CliResult<(Task, Subgroup)> {
    let own = task.subgroup();
    if own != Subgroup::Full {
        if flag != Subgroup::Full && flag != own {
            return Err(CliError::usage(format!("task `{task}` already carries the promise `{own}`")));
        }
        return Ok((task, own));
    }
    Ok(match (task, flag) {
        (Task::Inversion, Subgroup::So) => (Task::SoInversion, Subgroup::So),
        (Task::Inversion, Subgroup::Diag) => (Task::DiagInversion, Subgroup::Diag),
        (task, flag) => (task, flag),
    })
}

fn with_dims<T: Send>(dims: &[usize], f: impl Fn(usize) -> CliResult<T> + Sync) -> CliResult<Vec<T>> {
    dims.par_iter().map(|&d| f(d)).collect::<Vec<_>>().into_iter().collect()
}

// ---------------------------------------------------------------- bound

pub fn bound(args: &BoundArgs) -> CliResult<Outcome> {
    let dims = parse_dims(&args.dims)?;
    let flag: Subgroup = args.subgroup.parse()?;
    let target = target(&args.task)?;
    let (task, subgroup) = match &target {
        Target::Builtin(t) => {
            let (t, s) = promise(*t, flag)?;
            (Some(t), s)
        }
        Target::Expr(_) => (None, flag),
    };
    if subgroup != Subgroup::Full && args.u0 != "identity" {
        return Err(CliError::usage("subgroup promises are evaluated at --u0 identity only"));
    }
    if args.with_catalysis && (task.is_none() || args.u0 != "identity" || matches!(subgroup, Subgroup::Tensor(_))) {
        return Err(CliError::usage("--with-catalysis needs a built-in task at --u0 identity without a tensor promise"));
    }
    if args.with_prob.is_some() && (task.is_none() || subgroup != Subgroup::Full) {
        return Err(CliError::usage("--with-prob needs a built-in task without a subgroup promise"));
    }
    for &d in &dims {
        check_size(subgroup, d)?;
    }
    let at_identity = args.u0 == "identity";

    let reports = with_dims(&dims, |d| {
        let total = subgroup.total_dim(d);
        let u0 = resolve_unitary(&args.u0, total)?;
        let (g, descriptor): (DerivativeMap, TaskDescriptor) = match (&target, task) {
            (Target::Builtin(_), Some(task)) => {
                let mut desc = TaskDescriptor::builtin(task, args.u0.clone());
                desc.subgroup = subgroup.to_string();
                (analytic_derivative(task, &u0)?, desc)
            }
            (Target::Expr(text), _) => {
                let f = parse_expr(text, total)?;
                let desc = TaskDescriptor {
                    name: "expression".into(),
                    n: None,
                    expression: f.to_string(),
                    subgroup: subgroup.to_string(),
                    base_point: args.u0.clone(),
                };
                (dsl_derivative(&f, &u0)?, desc)
            }
            _ => unreachable!("built-in target always carries a task"),
        };
        let solution = solve_derivative(&g, subgroup, d)?;
        let (registry, certificate) = match task {
            Some(task) => (registry_row(task, subgroup, d, at_identity)?, certificate(task, subgroup, &u0, at_identity)?),
            None => (None, None),
        };
        let catalysis = match task {
            Some(task) if args.with_catalysis => Some(catalysis_verdict(task, d, None)?),
            _ => None,
        };
        let probabilistic = match (task, args.with_prob) {
            (Some(task), Some(n_max)) => Some((1..=n_max).map(|n| curve_point(task, d, n)).collect::<Result<_, _>>()?),
            _ => None,
        };
        Ok(assemble_report(ReportParts {
            task: descriptor,
            d,
            solution: &solution,
            registry,
            certificate,
            catalysis,
            probabilistic,
        }))
    })?;

    let mut warnings = Vec::new();
    for r in &reports {
        for v in &r.violations {
            warnings.push(format!("d={}: {}: {}", r.d, v.field, v.message));
        }
    }
    let code = if reports.iter().any(|r| r.solver_status != SdpStatus::Optimal) {
        warnings.push("SDP solve did not reach the requested gap".into());
        EXIT_SOLVER
    } else if reports.iter().any(|r| r.status == ReportStatus::Inconsistent) {
        EXIT_INCONSISTENT
    } else {
        EXIT_OK
    };
    let stdout = match args.format {
        Format::Json => {
            if reports.len() == 1 {
                to_json(&reports[0])
            } else {
                to_json(&reports)
            }
        }
        Format::Csv => {
            let mut s = csv_line(REPORT_CSV_COLUMNS.iter().map(|c| c.to_string()));
            for r in &reports {
                s.push_str(&r.csv_row());
                s.push('\n');
            }
            s
        }
        Format::Text => reports.iter().map(|r| bound_text(r, args.round)).collect::<Vec<_>>().join("\n"),
    };
    Ok(Outcome { stdout, code, warnings })
}

/// Registry row matching a task under a promise; `None` when nothing is known.
fn registry_row(task: Task, subgroup: Subgroup, d: usize, at_identity: bool) -> CliResult<Option<RegistryRow>> {
    // The iteration value depends on the eigenphases of a general base point.
    if matches!(task, Task::Iteration { .. }) && !at_identity {
        return Ok(None);
    }
    Ok(match subgroup {
        Subgroup::Full | Subgroup::So | Subgroup::Diag if subgroup == task.subgroup() => Some(lookup(task, d)?),
        // U ↦ f(U) on SU(d)^{⊗n} has the single-copy value.
        Subgroup::Tensor(_) if task.subgroup() == Subgroup::Full => Some(RegistryRow {
            task,
            d,
            sdp_closed_form: closed_form_value(task, d),
            refined: None,
            best_known: None,
        }),
        _ => None,
    })
}

fn certificate(task: Task, subgroup: Subgroup, u0: &ComplexMatrix, at_identity: bool) -> CliResult<Option<Certificate>> {
    if subgroup != task.subgroup() {
        return Ok(None);
    }
    if at_identity {
        return Ok(Some(verify_certificate(task, u0.nrows())?));
    }
    if subgroup == Subgroup::Full && !matches!(task, Task::Iteration { .. }) {
        return Ok(Some(verify_certificate_at(task, u0)?));
    }
    Ok(None)
}

fn bound_text(r: &BoundReport, round: bool) -> String {
    let mut s = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(s, "{k:<15}{v}");
    };
    let name = match r.task.n {
        Some(n) => format!("{}:{n}", r.task.name),
        None => r.task.name.clone(),
    };
    line("task", format!("{name} ({})", r.task.expression));
    line("subgroup", r.task.subgroup.clone());
    line("d", r.d.to_string());
    line("base point", r.task.base_point.clone());
    line("SDP value", fmt_num(r.numeric_sdp_value));
    line("dual value", fmt_num(r.dual_value));
    line("gap", fmt_num(r.gap));
    line("solver", enum_text(&r.solver_status));
    if round {
        line("queries >=", r.rounded_queries.to_string());
    }
    if let Some(v) = r.closed_form_value {
        line("closed form", fmt_num(v));
    }
    if let Some(v) = &r.refined_bound {
        line("refined bound", fmt_num(v.value));
    }
    if let Some(v) = &r.best_known_achievable {
        let suffix = v.provenance().map(|p| format!(" [{p}]")).unwrap_or_default();
        line("best known", format!("{}{suffix}", v.display()));
    }
    if let Some(c) = &r.certificate {
        line("certificate", if c.is_valid() { "valid".into() } else { "INVALID".into() });
    }
    if let Some(c) = &r.catalysis {
        line("catalysis", enum_text(&c.verdict));
    }
    if let Some(rows) = &r.probabilistic {
        for row in rows {
            line(&format!("p_max(N={})", row.n), fmt_num(row.max_p_sdp));
        }
    }
    line("status", enum_text(&r.status));
    for v in &r.violations {
        line("violation", format!("{}: {}", v.field, v.message));
    }
    s
}

fn enum_text<T: Serialize>(value: &T) -> String {
    match serde_json::to_value(value) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

// ---------------------------------------------------------------- prob-curve

#[derive(Serialize)]
struct CurveDocument<'a> {
    schema: &'static str,
    rows: &'a [CurveRow],
}

pub const CURVE_CSV_COLUMNS: [&str; 7] =
    ["task", "d", "N", "max_p_sdp", "closed_form", "canonical", "trace_norm_path"];

pub fn prob_curve(args: &ProbCurveArgs) -> CliResult<Outcome> {
    let task = builtin(&args.task)?;
    if task.subgroup() != Subgroup::Full {
        return Err(CliError::usage(format!("probability curves need a full-group task, got `{task}`")));
    }
    if args.n_max == 0 {
        return Err(CliError::usage("--n-max must be >= 1"));
    }
    let dims = parse_dims(&args.dims)?;
    for &d in &dims {
        check_size(Subgroup::Full, d)?;
    }
    let points: Vec<(usize, u32)> = dims.iter().flat_map(|&d| (1..=args.n_max).map(move |n| (d, n))).collect();
    let rows: Vec<CurveRow> =
        points.par_iter().map(|&(d, n)| curve_point(task, d, n)).collect::<Result<Vec<_>, _>>()?;

    let mut warnings = Vec::new();
    let mut code = EXIT_OK;
    for r in &rows {
        let mut violation = |message: String| {
            warnings.push(format!("d={} N={}: {message}", r.d, r.n));
            code = EXIT_INCONSISTENT;
        };
        if let Some(cf) = r.closed_form {
            if r.max_p_sdp > cf + DOMINANCE_TOL {
                violation(format!("max_p {} exceeds the closed form {cf}", r.max_p_sdp));
            }
        }
        if r.max_p_sdp > r.canonical + DOMINANCE_TOL {
            violation(format!("max_p {} exceeds the canonical bound {}", r.max_p_sdp, r.canonical));
        }
        if (r.max_p_sdp - r.trace_norm_path).abs() > ROUTE_AGREEMENT_TOL {
            violation(format!("bisection {} and trace-norm route {} disagree", r.max_p_sdp, r.trace_norm_path));
        }
        if r.prior_zero_probability {
            warnings.push(format!(
                "d={} N={}: earlier work shows success probability 0 below d-1 queries; the bound above is vacuous",
                r.d, r.n
            ));
        }
    }
    let stdout = match args.format {
        Format::Json => to_json(&CurveDocument { schema: "uqc-prob-curve/1", rows: &rows }),
        Format::Csv => {
            let mut s = csv_line(CURVE_CSV_COLUMNS.iter().map(|c| c.to_string()));
            for r in &rows {
                s.push_str(&csv_line([
                    r.task.clone(),
                    r.d.to_string(),
                    r.n.to_string(),
                    fmt_num(r.max_p_sdp),
                    fmt_opt_num(r.closed_form),
                    fmt_num(r.canonical),
                    fmt_num(r.trace_norm_path),
                ]));
            }
            s
        }
        Format::Text => {
            let mut s = format!(
                "{:<16}{:>3}{:>4}{:>14}{:>14}{:>14}{:>14}\n",
                "task", "d", "N", "max_p_sdp", "closed_form", "canonical", "trace_norm"
            );
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{:<16}{:>3}{:>4}{:>14}{:>14}{:>14}{:>14}{}",
                    r.task,
                    r.d,
                    r.n,
                    fmt_num(r.max_p_sdp),
                    r.closed_form.map(fmt_num).unwrap_or_else(|| "-".into()),
                    fmt_num(r.canonical),
                    fmt_num(r.trace_norm_path),
                    if r.prior_zero_probability { "  (p = 0 by earlier work)" } else { "" }
                );
            }
            s
        }
    };
    Ok(Outcome { stdout, code, warnings })
}

// ---------------------------------------------------------------- certify

#[derive(Serialize)]
struct CertificateDocument<'a> {
    schema: &'static str,
    certificates: &'a [CertificateEntry],
}

#[derive(Serialize)]
struct CertificateEntry {
    #[serde(flatten)]
    certificate: Certificate,
    base_point: String,
    valid: bool,
}

pub fn certify(args: &CertifyArgs) -> CliResult<Outcome> {
    let task = builtin(&args.task)?;
    let dims = parse_dims(&args.dims)?;
    if task.subgroup() != Subgroup::Full && args.u0 != "identity" {
        return Err(CliError::usage("subgroup certificates are evaluated at --u0 identity only"));
    }
    for &d in &dims {
        check_size(Subgroup::Full, d)?;
    }
    let entries = with_dims(&dims, |d| {
        let certificate = if args.u0 == "identity" {
            verify_certificate(task, d)?
        } else {
            verify_certificate_at(task, &resolve_unitary(&args.u0, d)?)?
        };
        let valid = certificate.is_valid();
        Ok(CertificateEntry { certificate, base_point: args.u0.clone(), valid })
    })?;
    let code = if entries.iter().all(|e| e.valid) { EXIT_OK } else { EXIT_INCONSISTENT };
    let warnings = entries
        .iter()
        .filter(|e| !e.valid)
        .map(|e| format!("d={}: certificate for {task} failed", e.certificate.d))
        .collect();
    let stdout = match args.format {
        Format::Json => to_json(&CertificateDocument { schema: "uqc-certificate/1", certificates: &entries }),
        Format::Csv => {
            let mut s = csv_line(
                [
                    "task",
                    "d",
                    "claimed_value",
                    "primal_objective",
                    "dual_objective",
                    "primal_min_eigenvalue",
                    "dual_min_eigenvalue",
                    "dual_constraint_error",
                    "valid",
                ]
                .map(String::from),
            );
            for e in &entries {
                let c = &e.certificate;
                s.push_str(&csv_line([
                    task.to_string(),
                    c.d.to_string(),
                    fmt_num(c.claimed_value),
                    fmt_num(c.primal_objective),
                    fmt_num(c.dual_objective),
                    fmt_num(c.primal_min_eigenvalue),
                    fmt_num(c.dual_min_eigenvalue),
                    fmt_num(c.dual_constraint_error),
                    e.valid.to_string(),
                ]));
            }
            s
        }
        Format::Text => {
            let mut s = String::new();
            for e in &entries {
                let c = &e.certificate;
                let _ = writeln!(
                    s,
                    "{task} d={}: claimed {}, primal {}, dual {}, primal λmin {}, dual λmin {}, constraint error {} -> {}",
                    c.d,
                    fmt_num(c.claimed_value),
                    fmt_num(c.primal_objective),
                    fmt_num(c.dual_objective),
                    fmt_num(c.primal_min_eigenvalue),
                    fmt_num(c.dual_min_eigenvalue),
                    fmt_num(c.dual_constraint_error),
                    if e.valid { "valid" } else { "INVALID" }
                );
            }
            s
        }
    };
    Ok(Outcome { stdout, code, warnings })
}

// ---------------------------------------------------------------- catalysis

#[derive(Serialize)]
struct CatalysisDocument<'a> {
    schema: &'static str,
    verdicts: &'a [CatalysisVerdict],
}

pub fn catalysis(args: &CatalysisArgs) -> CliResult<Outcome> {
    let task = builtin(&args.task)?;
    let dims = parse_dims(&args.dims)?;
    for &d in &dims {
        check_size(task.subgroup(), d)?;
    }
    let verdicts = with_dims(&dims, |d| Ok(catalysis_verdict(task, d, args.known_n)?))?;
    let ratio = |v: &CatalysisVerdict, n: u32| {
        v.scaling_check.iter().find(|c| c.n == n).map(|c| fmt_num(c.measured_ratio)).unwrap_or_default()
    };
    let stdout = match args.format {
        Format::Json => to_json(&CatalysisDocument { schema: "uqc-catalysis/1", verdicts: &verdicts }),
        Format::Csv => {
            let mut s = csv_line(
                ["task", "d", "sdp_value", "known_achievable_n", "ratio_n2", "ratio_n3", "verdict"].map(String::from),
            );
            for v in &verdicts {
                s.push_str(&csv_line([
                    task.to_string(),
                    v.d.to_string(),
                    fmt_num(v.sdp_value),
                    v.known_achievable_n.map(|k| k.to_string()).unwrap_or_default(),
                    ratio(v, 2),
                    ratio(v, 3),
                    enum_text(&v.verdict),
                ]));
            }
            s
        }
        Format::Text => {
            let mut s = String::new();
            for v in &verdicts {
                let known = v.known_achievable_n.map(|k| k.to_string()).unwrap_or_else(|| "unknown".into());
                let _ = writeln!(
                    s,
                    "{task} d={}: SDP {}, known achievable {known}, SDP(2J)/SDP(J) = {}, SDP(3J)/SDP(J) = {} -> {}",
                    v.d,
                    fmt_num(v.sdp_value),
                    ratio(v, 2),
                    ratio(v, 3),
                    enum_text(&v.verdict)
                );
            }
            s
        }
    };
    Ok(Outcome { stdout, code: EXIT_OK, warnings: Vec::new() })
}

// ---------------------------------------------------------------- derivative-check

#[derive(Serialize)]
struct DerivativeDocument<'a> {
    schema: &'static str,
    checks: &'a [DerivativeCheck],
}

#[derive(Serialize)]
pub struct DerivativeCheck {
    expression: String,
    d: usize,
    base_point: String,
    epsilon: f64,
    richardson: bool,
    reference: String,
    frobenius_error: f64,
    tolerance: f64,
    passed: bool,
    /// Plain central-difference error at `ε` over the error at `ε/2`;
    /// absent when the difference is exact to roundoff.
    halving_ratio: Option<f64>,
}

fn provenance_kind(g: &DerivativeMap) -> String {
    serde_json::to_value(g.provenance())
        .ok()
        .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(String::from))
        .unwrap_or_default()
}

pub fn derivative_check(args: &DerivativeCheckArgs) -> CliResult<Outcome> {
    let dims = parse_dims(&args.dims)?;
    for &d in &dims {
        check_size(Subgroup::Full, d)?;
    }
    let target = target(&args.task)?;
    if let Target::Builtin(task) = &target {
        if task.subgroup() != Subgroup::Full {
            return Err(CliError::usage("derivative-check works on the full group; use `inversion` instead"));
        }
    }
    let checks = with_dims(&dims, |d| {
        let u0 = resolve_unitary(&args.u0, d)?;
        let (f, reference) = match &target {
            Target::Builtin(task) => (task.expr(), analytic_derivative(*task, &u0)?),
            Target::Expr(text) => {
                let f = parse_expr(text, d)?;
                let g = dsl_derivative(&f, &u0)?;
                (f, g)
            }
        };
        let exact = choi_gellmann(&reference)?;
        let error_at = |eps: f64, richardson: bool| -> CliResult<f64> {
            let fd = choi_gellmann(&finite_difference_derivative(&f, &u0, eps, richardson)?)?;
            Ok((fd.matrix() - exact.matrix()).norm())
        };
        let frobenius_error = error_at(args.epsilon, !args.no_richardson)?;
        let halving_ratio = if args.epsilon / 2.0 >= 1e-6 {
            let coarse = error_at(args.epsilon, false)?;
            let fine = error_at(args.epsilon / 2.0, false)?;
            (coarse > 1e-11 && fine > 0.0).then(|| coarse / fine)
        } else {
            None
        };
        Ok(DerivativeCheck {
            expression: f.to_string(),
            d,
            base_point: args.u0.clone(),
            epsilon: args.epsilon,
            richardson: !args.no_richardson,
            reference: provenance_kind(&reference),
            frobenius_error,
            tolerance: args.tolerance,
            passed: frobenius_error <= args.tolerance,
            halving_ratio,
        })
    })?;
    let code = if checks.iter().all(|c| c.passed) { EXIT_OK } else { EXIT_INCONSISTENT };
    let warnings = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("d={}: error {} above tolerance {}", c.d, fmt_num(c.frobenius_error), c.tolerance))
        .collect();
    let stdout = match args.format {
        Format::Json => to_json(&DerivativeDocument { schema: "uqc-derivative-check/1", checks: &checks }),
        Format::Csv => {
            let mut s = csv_line(
                ["expression", "d", "base_point", "epsilon", "richardson", "frobenius_error", "halving_ratio", "passed"]
                    .map(String::from),
            );
            for c in &checks {
                s.push_str(&csv_line([
                    c.expression.clone(),
                    c.d.to_string(),
                    c.base_point.clone(),
                    fmt_num(c.epsilon),
                    c.richardson.to_string(),
                    fmt_num(c.frobenius_error),
                    fmt_opt_num(c.halving_ratio),
                    c.passed.to_string(),
                ]));
            }
            s
        }
        Format::Text => {
            let mut s = String::new();
            for c in &checks {
                let _ = writeln!(
                    s,
                    "{} d={} at {}: |J_fd - J_{}|_F = {} (tolerance {}), halving ratio {} -> {}",
                    c.expression,
                    c.d,
                    c.base_point,
                    c.reference,
                    fmt_num(c.frobenius_error),
                    c.tolerance,
                    c.halving_ratio.map(fmt_num).unwrap_or_else(|| "n/a".into()),
                    if c.passed { "ok" } else { "FAILED" }
                );
            }
            s
        }
    };
    Ok(Outcome { stdout, code, warnings })
}
