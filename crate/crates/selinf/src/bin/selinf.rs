//! Thin command-line front end over the library: run a selection path, run
//! selective inference on a step or variable, or run the Monte Carlo
//! calibration harness. All output is JSON (plus a Q-Q CSV for simulate).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use selinf::cli::{
    cmd_infer, cmd_path, cmd_simulate, error_json, ingest, MethodKind, RunConfig, Scenario,
    SigmaSpec, SimConfig, Target,
};
use selinf::error::Error;

#[derive(Parser)]
#[command(name = "selinf", version, about = "Post-selection inference for sparse linear regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a selection path (lasso at a fixed penalty, lars, or forward stepwise)
    Path(PathArgs),
    /// Selective p-value and confidence interval for a step or variable
    Infer(InferArgs),
    /// Monte Carlo calibration scenarios
    Simulate(SimArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV with a header row
    #[arg(long)]
    input: PathBuf,
    /// Response column (header name or zero-based index)
    #[arg(long)]
    response: String,
    /// Keep columns at their raw scale (centering still applies)
    #[arg(long = "no-normalize")]
    no_normalize: bool,
    /// Rescale each centered column to unit norm (the default)
    #[arg(long, conflicts_with = "no_normalize")]
    normalize: bool,
}

impl DataArgs {
    fn normalize(&self) -> bool {
        !self.no_normalize
    }
}

#[derive(Args)]
struct CommonRunArgs {
    /// Selection method
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Fixed lasso penalty (lasso only; must be chosen independently of y)
    #[arg(long)]
    lambda: Option<f64>,
    /// Number of path steps (lars / fs)
    #[arg(long)]
    steps: Option<usize>,
    /// Noise standard deviation, or "estimate" for the full-OLS plug-in
    #[arg(long, default_value = "1.0")]
    sigma: String,
    /// Test level / CI miscoverage
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Seed echoed into the report (paths are deterministic in the data)
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum MethodArg {
    Lasso,
    Lars,
    Fs,
}

impl From<MethodArg> for MethodKind {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Lasso => MethodKind::Lasso,
            MethodArg::Lars => MethodKind::Lars,
            MethodArg::Fs => MethodKind::Fs,
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit compact JSON
    #[arg(long)]
    compact: bool,
}

#[derive(Args)]
struct PathArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: CommonRunArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct InferArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: CommonRunArgs,
    /// Path step to test (lars / fs)
    #[arg(long)]
    target_step: Option<usize>,
    /// Fitted variable to test (lasso)
    #[arg(long)]
    target_variable: Option<usize>,
    /// Build the lasso region by line search instead of sign enumeration
    #[arg(long)]
    line_search: bool,
    /// Spacing-test variant (lars)
    #[arg(long, value_enum, default_value = "exact")]
    variant: VariantArg,
    /// Skip conditioning: classical z-test sanity mode
    #[arg(long)]
    no_condition: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum VariantArg {
    Exact,
    Simplified,
}

#[derive(Args)]
struct SimArgs {
    /// Scenario name
    #[arg(long)]
    scenario: String,
    /// Sample size per replicate
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Number of candidate variables
    #[arg(long, default_value_t = 20)]
    p: usize,
    /// Number of replicates
    #[arg(long, default_value_t = 2000)]
    reps: usize,
    /// Noise standard deviation
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Master seed; replicates use split streams
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Strong-signal coordinate count (signal_prop1)
    #[arg(long, default_value_t = 2)]
    k_star: usize,
    /// Write the Q-Q pairs CSV here (defaults next to --out)
    #[arg(long)]
    qq_csv: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

fn build_config(run: &CommonRunArgs, method: MethodKind) -> Result<RunConfig, Error> {
    Ok(RunConfig {
        method,
        lambda: run.lambda,
        steps: run.steps,
        sigma: SigmaSpec::parse(&run.sigma)?,
        alpha: run.alpha,
        seed: run.seed,
        ..RunConfig::default()
    })
}

fn emit(value: &serde_json::Value, output: &OutputArgs) -> Result<(), Error> {
    let text = if output.compact {
        serde_json::to_string(value)
    } else {
        serde_json::to_string_pretty(value)
    }
    .map_err(|e| Error::Io(e.to_string()))?;
    match &output.out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn run() -> Result<(), Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Path(args) => {
            let (x, y) = ingest(&args.data.input, &args.data.response, args.data.normalize())?;
            let mut config = build_config(&args.run, args.run.method.into())?;
            config.normalize = args.data.normalize();
            let report = cmd_path(&config, &x, &y)?;
            emit(&report, &args.output)
        }
        Command::Infer(args) => {
            let (x, y) = ingest(&args.data.input, &args.data.response, args.data.normalize())?;
            let mut config = build_config(&args.run, args.run.method.into())?;
            config.normalize = args.data.normalize();
            config.line_search = args.line_search;
            config.spacing_simplified = matches!(args.variant, VariantArg::Simplified);
            config.no_condition = args.no_condition;
            let target = match (args.target_step, args.target_variable) {
                (Some(k), None) => Target::Step(k),
                (None, Some(j)) => Target::Variable(j),
                _ => {
                    return Err(Error::InvalidConfig(
                        "give exactly one of --target-step or --target-variable".into(),
                    ))
                }
            };
            let report = cmd_infer(&config, &x, &y, target)?;
            emit(&report, &args.output)
        }
        Command::Simulate(args) => {
            let cfg = SimConfig {
                scenario: Scenario::parse(&args.scenario)?,
                n: args.n,
                p: args.p,
                reps: args.reps,
                sigma: args.sigma,
                seed: args.seed,
                k_star: args.k_star,
            };
            let report = cmd_simulate(&cfg)?;
            emit(&report.to_json(), &args.output)?;
            let qq_path = args.qq_csv.clone().or_else(|| {
                args.output
                    .out
                    .as_ref()
                    .map(|p: &PathBuf| p.with_extension("qq.csv"))
            });
            if let Some(path) = qq_path {
                write_csv(&path, &report.qq_csv())?;
            }
            Ok(())
        }
    }
}

fn write_csv(path: &Path, content: &str) -> Result<(), Error> {
    std::fs::write(path, content).map_err(Error::from)
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            // Errors are structured JSON too, on stdout, with exit code 1.
            println!(
                "{}",
                serde_json::to_string_pretty(&error_json(&err)).unwrap_or_else(|_| err.to_string())
            );
            ExitCode::FAILURE
        }
    }
}
