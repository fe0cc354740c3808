//! `lab` — command-line front end for the sparselab library.
//!
//! Subcommands cover the full workflow: build a design, sample an instance
//! on it, inspect coherence diagnostics, run each solver, query the
//! exhaustive oracle, and drive Monte Carlo experiments. Every command is
//! deterministic given its arguments; outputs are JSON documents (CSV for
//! the experiment table) written to explicit paths.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sparselab::bench::{
    cells_csv, run_experiment, summary_json, trials_jsonl, ExperimentConfig,
    NOISELESS_VARIANCE_FLOOR,
};
use sparselab::design::{build_design, DesignMatrix, DesignParams};
use sparselab::diagnostics::{coherence_report, worst_case_irrepresentable_value};
use sparselab::instance::{observe, sample_ground_truth, Instance};
use sparselab::oracle::best_subset;
use sparselab::seed::derive_seed;
use sparselab::solvers::lasso::{fit_lasso, lasso_path, LassoConfig};
use sparselab::solvers::omp::fit_omp;
use sparselab::solvers::sbl::{fit_sbl, SblHyper};

#[derive(Parser)]
#[command(
    name = "lab",
    about = "Coherent near-duplicate sparse regression laboratory",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a near-duplicate-group design matrix and write it as JSON.
    Design(DesignArgs),
    /// Sample a ground truth and noisy observation on an existing design.
    Instance(InstanceArgs),
    /// Coherence and irrepresentability diagnostics of a design.
    Ic(IcArgs),
    /// Run one solver on a design/instance pair.
    #[command(subcommand)]
    Solve(SolveCommand),
    /// Exhaustive best-subset search at a fixed support size.
    Oracle(OracleArgs),
    /// Run a Monte Carlo experiment from a JSON configuration.
    Bench(BenchArgs),
}

#[derive(Args)]
struct DesignArgs {
    /// Observation dimension (rows).
    #[arg(long)]
    m: usize,
    /// Number of columns.
    #[arg(long)]
    p: usize,
    /// True support size.
    #[arg(long)]
    k: usize,
    /// Near-duplicates per true column.
    #[arg(long)]
    group_size: usize,
    /// Within-group inner product target, in (0, 1).
    #[arg(long)]
    rho_in: f64,
    /// Between-group inner product bound, in (0, rho_in).
    #[arg(long)]
    rho_out_max: f64,
    /// Inner product among true-support columns, in [0, rho_out_max).
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// RNG seed; identical arguments give byte-identical output.
    #[arg(long)]
    seed: u64,
    /// Output path for the design JSON document.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InstanceArgs {
    /// Path of the design JSON document to sample on.
    #[arg(long)]
    design: PathBuf,
    /// Smallest true coefficient magnitude.
    #[arg(long)]
    beta_min: f64,
    /// Largest true coefficient magnitude.
    #[arg(long)]
    mag_max: f64,
    /// Noise standard deviation (0 for a noiseless observation).
    #[arg(long)]
    sigma: f64,
    /// Master seed; the truth and noise streams are derived from it.
    #[arg(long)]
    seed: u64,
    /// Output path for the instance JSON document.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IcArgs {
    /// Path of the design JSON document to analyze.
    #[arg(long)]
    design: PathBuf,
    /// Sign pattern over the true support, e.g. "+-+" (default: all '+').
    #[arg(long, conflicts_with = "worst_case")]
    signs: Option<String>,
    /// Maximize the irrepresentability statistic over all sign patterns.
    #[arg(long)]
    worst_case: bool,
    /// Output path for the report JSON document.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum SolveCommand {
    /// L1-penalized least squares via cyclic coordinate descent.
    Lasso(LassoArgs),
    /// Greedy orthogonal matching pursuit.
    Omp(OmpArgs),
    /// Concave-penalty MAP estimator via iteratively reweighted ridge.
    Sbl(SblArgs),
}

#[derive(Args)]
struct SolveCommon {
    /// Path of the design JSON document.
    #[arg(long)]
    design: PathBuf,
    /// Path of the instance JSON document (must match the design).
    #[arg(long)]
    instance: PathBuf,
    /// Output path for the estimate JSON document.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LassoArgs {
    #[command(flatten)]
    common: SolveCommon,
    /// Fit a single penalty level.
    #[arg(long, conflicts_with = "path", required_unless_present = "path")]
    lambda: Option<f64>,
    /// Fit the full descending penalty path (output is an array of
    /// {lambda, estimate} records).
    #[arg(long)]
    path: bool,
}

#[derive(Args)]
struct OmpArgs {
    #[command(flatten)]
    common: SolveCommon,
    /// Number of greedy selection steps.
    #[arg(long)]
    k: usize,
}

#[derive(Args)]
struct SblArgs {
    #[command(flatten)]
    common: SolveCommon,
    /// Penalty shape; must exceed 1/2.
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    /// Penalty offset; must be positive.
    #[arg(long, default_value_t = 1e-16)]
    b: f64,
    /// Noise standard deviation weighting the data term. Values near zero
    /// are floored so the weight stays finite.
    #[arg(long)]
    sigma: f64,
    /// Re-estimate the noise level from the residual between solves.
    #[arg(long)]
    estimate_sigma: bool,
    /// Extra perturbed-start runs; the best final objective wins.
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    /// Seed for the perturbed starts.
    #[arg(long, default_value_t = 0)]
    restart_seed: u64,
}

#[derive(Args)]
struct OracleArgs {
    /// Path of the design JSON document.
    #[arg(long)]
    design: PathBuf,
    /// Path of the instance JSON document (must match the design).
    #[arg(long)]
    instance: PathBuf,
    /// Subset size to search exhaustively.
    #[arg(long)]
    k: usize,
    /// Include the full (support, residual) table in the output.
    #[arg(long)]
    full_table: bool,
    /// Output path for the oracle JSON document.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Path of the experiment configuration JSON document.
    #[arg(long)]
    config: PathBuf,
    /// Directory receiving cells.csv, summary.json, and trials.jsonl.
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<(), String> {
    match command {
        Command::Design(args) => run_design(args),
        Command::Instance(args) => run_instance(args),
        Command::Ic(args) => run_ic(args),
        Command::Solve(SolveCommand::Lasso(args)) => run_lasso(args),
        Command::Solve(SolveCommand::Omp(args)) => run_omp(args),
        Command::Solve(SolveCommand::Sbl(args)) => run_sbl(args),
        Command::Oracle(args) => run_oracle(args),
        Command::Bench(args) => run_bench(args),
    }
}

fn run_design(args: DesignArgs) -> Result<(), String> {
    let params = DesignParams {
        m: args.m,
        p: args.p,
        k: args.k,
        group_size: args.group_size,
        rho_in: args.rho_in,
        rho_out_max: args.rho_out_max,
        support_gram_offdiag: args.gamma,
        seed: args.seed,
    };
    let design = build_design(&params).map_err(|e| e.to_string())?;
    write_json(&args.out, &design)
}

fn run_instance(args: InstanceArgs) -> Result<(), String> {
    let design = load_design(&args.design)?;
    let truth = sample_ground_truth(
        &design,
        args.beta_min,
        args.mag_max,
        derive_seed(args.seed, &[1]),
    )
    .map_err(|e| e.to_string())?;
    let observation = observe(&design, &truth, args.sigma, derive_seed(args.seed, &[2]))
        .map_err(|e| e.to_string())?;
    let instance = Instance {
        design,
        truth,
        observation,
    };
    write_json(&args.out, &instance)
}

fn run_ic(args: IcArgs) -> Result<(), String> {
    let design = load_design(&args.design)?;
    let k = design.true_support.len();
    let signs: Vec<i8> = if args.worst_case {
        let (_, signs) = worst_case_irrepresentable_value(&design, &design.true_support)
            .map_err(|e| e.to_string())?;
        signs
    } else if let Some(text) = &args.signs {
        parse_signs(text, k)?
    } else {
        vec![1; k]
    };
    let report = coherence_report(&design, &signs).map_err(|e| e.to_string())?;
    write_json(&args.out, &report)
}

fn run_lasso(args: LassoArgs) -> Result<(), String> {
    let (design, instance) = load_pair(&args.common)?;
    let config = LassoConfig::default();
    if args.path {
        let path =
            lasso_path(&design, &instance.observation, &config).map_err(|e| e.to_string())?;
        write_json(&args.common.out, &path)
    } else {
        let lambda = args.lambda.expect("clap enforces lambda XOR path");
        let estimate = fit_lasso(&design, &instance.observation, lambda, &config)
            .map_err(|e| e.to_string())?;
        write_json(&args.common.out, &estimate)
    }
}

fn run_omp(args: OmpArgs) -> Result<(), String> {
    let (design, instance) = load_pair(&args.common)?;
    let estimate = fit_omp(&design, &instance.observation, args.k).map_err(|e| e.to_string())?;
    write_json(&args.common.out, &estimate)
}

fn run_sbl(args: SblArgs) -> Result<(), String> {
    let (design, instance) = load_pair(&args.common)?;
    let hyper = SblHyper {
        a: args.a,
        b: args.b,
        noise_variance: (args.sigma * args.sigma).max(NOISELESS_VARIANCE_FLOOR),
        estimate_noise: args.estimate_sigma,
        restarts: args.restarts,
        restart_seed: args.restart_seed,
        ..SblHyper::default()
    };
    let estimate = fit_sbl(&design, &instance.observation, &hyper).map_err(|e| e.to_string())?;
    write_json(&args.common.out, &estimate)
}

fn run_oracle(args: OracleArgs) -> Result<(), String> {
    let design = load_design(&args.design)?;
    let instance = load_instance(&args.instance, &design)?;
    let result = best_subset(&design, &instance.observation, args.k, args.full_table)
        .map_err(|e| e.to_string())?;
    write_json(&args.out, &result)
}

fn run_bench(args: BenchArgs) -> Result<(), String> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| format!("reading {}: {e}", args.config.display()))?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| format!("parsing {}: {e}", args.config.display()))?;
    let report = run_experiment(&config).map_err(|e| e.to_string())?;
    fs::create_dir_all(&args.out_dir)
        .map_err(|e| format!("creating {}: {e}", args.out_dir.display()))?;
    let write = |name: &str, contents: String| -> Result<(), String> {
        let path = args.out_dir.join(name);
        fs::write(&path, contents).map_err(|e| format!("writing {}: {e}", path.display()))
    };
    write("cells.csv", cells_csv(&report.cells))?;
    write(
        "summary.json",
        summary_json(&config, &report.cells).map_err(|e| e.to_string())?,
    )?;
    write(
        "trials.jsonl",
        trials_jsonl(&report.trials).map_err(|e| e.to_string())?,
    )?;
    Ok(())
}

fn parse_signs(text: &str, k: usize) -> Result<Vec<i8>, String> {
    let signs: Vec<i8> = text
        .chars()
        .map(|c| match c {
            '+' => Ok(1),
            '-' => Ok(-1),
            other => Err(format!("sign character {other:?} (expected '+' or '-')")),
        })
        .collect::<Result<_, _>>()?;
    if signs.len() != k {
        return Err(format!(
            "sign pattern has {} entries but the true support has {k}",
            signs.len()
        ));
    }
    Ok(signs)
}

fn load_design(path: &Path) -> Result<DesignMatrix, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("parsing {}: {e}", path.display()))
}

fn load_instance(path: &Path, design: &DesignMatrix) -> Result<Instance, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
    let instance: Instance =
        serde_json::from_str(&text).map_err(|e| format!("parsing {}: {e}", path.display()))?;
    if instance.design.params != design.params {
        return Err(format!(
            "instance {} was sampled on a different design than the one supplied",
            path.display()
        ));
    }
    Ok(instance)
}

fn load_pair(common: &SolveCommon) -> Result<(DesignMatrix, Instance), String> {
    let design = load_design(&common.design)?;
    let instance = load_instance(&common.instance, &design)?;
    Ok((design, instance))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| format!("serializing {}: {e}", path.display()))?;
    text.push('\n');
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| format!("creating {}: {e}", parent.display()))?;
        }
    }
    fs::write(path, text).map_err(|e| format!("writing {}: {e}", path.display()))
}
