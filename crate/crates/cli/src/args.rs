use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "uqc", version, about = "Lower bounds on the query complexity of unitary transformations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the deterministic SDP and report it next to the known constants.
    Bound(BoundArgs),
    /// Success-probability curve for N = 1..n-max.
    ProbCurve(ProbCurveArgs),
    /// Check the analytic primal/dual certificate of a built-in task.
    Certify(CertifyArgs),
    /// Decide whether SDP tightness rules out an optimal catalytic protocol.
    Catalysis(CatalysisArgs),
    /// Compare the finite-difference derivative with the exact one.
    DerivativeCheck(DerivativeCheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct TaskSpec {
    /// Built-in task: inversion, transposition, conjugation, iteration, so_inversion, diag_inversion.
    #[arg(long, required_unless_present = "f_expr", conflicts_with = "f_expr")]
    pub task: Option<String>,
    /// Iteration order for `--task iteration`.
    #[arg(long)]
    pub n: Option<u32>,
    /// Transformation written in the expression language, e.g. "conj o inv".
    #[arg(long = "f-expr")]
    pub f_expr: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct BuiltinTask {
    /// Built-in task: inversion, transposition, conjugation, iteration, so_inversion, diag_inversion.
    #[arg(long)]
    pub task: String,
    /// Iteration order for `--task iteration`.
    #[arg(long)]
    pub n: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct Dims {
    /// Dimension d.
    #[arg(long, required_unless_present = "d_range", conflicts_with = "d_range")]
    pub d: Option<usize>,
    /// Inclusive dimension range, e.g. 2..5.
    #[arg(long = "d-range")]
    pub d_range: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct BoundArgs {
    #[command(flatten)]
    pub task: TaskSpec,
    #[command(flatten)]
    pub dims: Dims,
    /// Base point: identity, haar:<seed>, or a matrix file.
    #[arg(long, default_value = "identity")]
    pub u0: String,
    /// Subgroup promise: full, so, diag, tensor:<n>.
    #[arg(long, default_value = "full")]
    pub subgroup: String,
    /// Show the integer query bound in text output.
    #[arg(long)]
    pub round: bool,
    /// Attach the catalysis verdict.
    #[arg(long)]
    pub with_catalysis: bool,
    /// Attach the probability curve for N = 1..this value.
    #[arg(long)]
    pub with_prob: Option<u32>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct ProbCurveArgs {
    #[command(flatten)]
    pub task: BuiltinTask,
    #[command(flatten)]
    pub dims: Dims,
    /// Largest query count N.
    #[arg(long = "n-max", default_value_t = 6)]
    pub n_max: u32,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub task: BuiltinTask,
    #[command(flatten)]
    pub dims: Dims,
    /// Base point: identity, haar:<seed>, or a matrix file.
    #[arg(long, default_value = "identity")]
    pub u0: String,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct CatalysisArgs {
    #[command(flatten)]
    pub task: BuiltinTask,
    #[command(flatten)]
    pub dims: Dims,
    /// Query count known to be achievable; defaults to the registry entry.
    #[arg(long = "known-n")]
    pub known_n: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct DerivativeCheckArgs {
    #[command(flatten)]
    pub task: TaskSpec,
    #[command(flatten)]
    pub dims: Dims,
    /// Base point: identity, haar:<seed>, or a matrix file.
    #[arg(long, default_value = "haar:0")]
    pub u0: String,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
    /// Use plain central differences without Richardson extrapolation.
    #[arg(long)]
    pub no_richardson: bool,
    /// Largest accepted Frobenius distance between the Choi operators.
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}
