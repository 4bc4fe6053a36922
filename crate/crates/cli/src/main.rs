mod commands;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Null energy condition checks and curvature-bound estimates for metrics
/// given as coordinate expressions.
#[derive(Debug, Parser)]
#[command(name = "nullbound", version)]
struct Cli {
    /// Seed for all sampling.
    #[arg(long, global = true, env = "NULLBOUND_SEED", default_value_t = 42)]
    seed: u64,
    /// Worker threads; 0 uses every core. Output does not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Print timings and summaries to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check F(v,v) >= 0 on null vectors over a region (exit 2 if violated).
    CheckNec(AnalysisArgs),
    /// Estimate curvature bounds and classify them (exit 2 if diverging).
    Bound(BoundArgs),
    /// Trace the cone flow from a direction as CSV.
    Flow(FlowArgs),
    /// Project a non-null direction onto the null cone along the flow.
    Project(PointArgs),
    /// List or export built-in metrics.
    #[command(subcommand)]
    Catalog(CatalogCommand),
}

#[derive(Debug, Args)]
struct MetricArgs {
    /// Catalog name or path to a metric document.
    #[arg(long)]
    metric: String,
}

#[derive(Debug, Args)]
struct AnalysisArgs {
    #[command(flatten)]
    metric: MetricArgs,
    /// ricci, bakry-emery, minus_g, neg_diag, zero, or a path to a field document.
    #[arg(long)]
    field: String,
    /// Box `a,b x c,d x …`; defaults to the catalog entry's region.
    #[arg(long, allow_hyphen_values = true)]
    region: Option<String>,
    /// Grid points per axis: one count for all axes or a comma list.
    #[arg(long)]
    resolution: Option<String>,
    /// Negative and positive eigenspace directions per base point, `a,b`.
    #[arg(long)]
    null_directions: Option<String>,
    /// Uniform sphere directions per base point.
    #[arg(long)]
    sphere_samples: Option<usize>,
    #[arg(long, default_value_t = 1e-9)]
    tol_null: f64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BoundArgs {
    #[command(flatten)]
    analysis: AnalysisArgs,
    /// Write the margin sweep CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    epsilon0: f64,
    #[arg(long, default_value_t = 12)]
    rungs: usize,
    #[arg(long, default_value_t = 20)]
    refine_seeds: usize,
    #[arg(long, default_value_t = 200)]
    refine_iterations: usize,
    #[arg(long, default_value_t = 1.0)]
    divergence_margin: f64,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    divergence_slope: f64,
    #[arg(long, default_value_t = 6)]
    fit_rungs: usize,
}

#[derive(Debug, Args)]
struct PointArgs {
    #[command(flatten)]
    metric: MetricArgs,
    /// Base point `x0,x1,…`; defaults to the centre of the catalog region.
    #[arg(long, allow_hyphen_values = true)]
    point: Option<String>,
    /// Fiber direction `v0,v1,…`; normalized before use.
    #[arg(long, allow_hyphen_values = true)]
    direction: String,
}

#[derive(Debug, Args)]
struct FlowArgs {
    #[command(flatten)]
    at: PointArgs,
    /// Flow times `start,end`.
    #[arg(long, default_value = "0,1", allow_hyphen_values = true)]
    t_range: String,
    /// Rows in the trace, evenly spaced in t.
    #[arg(long, default_value_t = 11)]
    rows: usize,
    /// Add RK4 columns and the deviation from the closed form.
    #[arg(long)]
    oracle: bool,
    /// RK4 steps per row.
    #[arg(long, default_value_t = 1000)]
    steps: usize,
}

#[derive(Debug, Subcommand)]
enum CatalogCommand {
    /// Show the built-in metrics.
    List,
    /// Print the metric document of an entry.
    Export {
        name: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
