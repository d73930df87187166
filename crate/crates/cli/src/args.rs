use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "trajscan", version, about = "Expression trajectories before diagnosis in nested case-control studies")]
pub struct Cli {
    /// Worker threads for per-gene fits (default: available parallelism).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a cohort, draw matched pairs and generate expression data.
    Simulate(SimulateArgs),
    /// Fit one model to every gene.
    Fit(FitArgs),
    /// Append FDR-adjusted q-values and rejection flags to a results table.
    Adjust(AdjustArgs),
    /// Per-pair observed and fitted values for one gene.
    PlotData(PlotDataArgs),
    /// Rejections by simulated gene class and model.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub seed: Option<u64>,

    /// File of key=value settings; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Override any setting as key=value (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output directory (created if needed).
    #[arg(long)]
    pub out: PathBuf,

    #[command(flatten)]
    pub common: Common,

    #[arg(long)]
    pub n_women: Option<usize>,

    #[arg(long)]
    pub n_genes: Option<usize>,

    #[arg(long)]
    pub max_pairs: Option<usize>,

    /// continuous or literal.
    #[arg(long)]
    pub hinge_form: Option<String>,
}

/// Input files. `--data DIR` supplies the default file names of a simulated
/// dataset; explicit paths take precedence.
#[derive(Debug, Args, Clone)]
pub struct DataArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,

    #[arg(long)]
    pub pairs: Option<PathBuf>,

    #[arg(long = "case")]
    pub case_expr: Option<PathBuf>,

    #[arg(long = "control")]
    pub control_expr: Option<PathBuf>,

    #[arg(long)]
    pub exposures: Option<PathBuf>,

    /// Ignore exposures even if present in --data.
    #[arg(long)]
    pub no_exposures: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub common: Common,

    /// hinge, isotonic, interaction, coxncc, coxpen or coxtv.
    #[arg(long)]
    pub model: Option<String>,

    #[arg(long)]
    pub permutations: Option<usize>,

    /// Hinge changepoints: quantile levels (`q:0.1,0.5` or `0.1,0.5`) or times in years (`t:1,2,3`).
    #[arg(long)]
    pub grid: Option<String>,

    #[arg(long)]
    pub knots: Option<usize>,

    #[arg(long)]
    pub hinge_form: Option<String>,

    /// Results table to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AdjustArgs {
    /// Results table with a p_value column.
    #[arg(long)]
    pub input: PathBuf,

    #[command(flatten)]
    pub common: Common,

    /// Target FDR level.
    #[arg(long)]
    pub fdr: Option<f64>,

    /// bh or by.
    #[arg(long)]
    pub method: Option<String>,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotDataArgs {
    #[arg(long)]
    pub results: PathBuf,

    #[arg(long)]
    pub gene: String,

    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub common: Common,

    #[arg(long)]
    pub hinge_form: Option<String>,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub truth: PathBuf,

    /// Results tables, one per model (repeatable).
    #[arg(long, required = true)]
    pub results: Vec<PathBuf>,

    #[command(flatten)]
    pub common: Common,

    #[arg(long)]
    pub fdr: Option<f64>,

    #[arg(long)]
    pub method: Option<String>,

    /// Also write the table here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
