//! `prescript`: fit learners on observational CSV data, prescribe decisions
//! under variance and bias penalties, and run the seeded benchmark suite.
//!
//! Every command is deterministic for a fixed config and seed; reports are
//! written as JSON or CSV and wall-clock timings go to stderr.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use prescript_core::data::{load_dataset, normalize_covariates, Schema};
use prescript_core::experiments::{run_benchmark, sensitivity_grid, BenchmarkConfig};
use prescript_core::learner::{CostSpec, LearnerSpec, ModelArtifact, TargetKind};
use prescript_core::theory::{
    compute_kn, example1_analytic, example1_montecarlo, theory_lambdas, TheoryInputs,
};
use prescript_core::tree::TreeParams;
use prescript_core::{
    Decomposition, DecisionSpace, ForestOptOptions, ForestParams, ObjectiveMode, PenaltyConfig,
    SolverDiagnostics,
};

#[derive(Parser)]
#[command(name = "prescript", version, about = "Prescriptive decisions from observational data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model on CSV data under a column-role schema.
    Fit(FitArgs),
    /// Prescribe decisions for query covariates with a fitted model.
    Prescribe(PrescribeArgs),
    /// Run a benchmark experiment from a JSON config.
    Benchmark(BenchmarkArgs),
    /// Sweep the penalty multipliers on the dosing benchmark.
    Sensitivity(SensitivityArgs),
    /// Tuning constants and the selection-rule laboratory.
    #[command(subcommand)]
    Theory(TheoryCommand),
}

#[derive(Args)]
struct FitArgs {
    /// Training data CSV (header row required).
    #[arg(long)]
    data: PathBuf,
    /// JSON mapping {column: covariate|decision|outcome|ignore}.
    #[arg(long)]
    schema: PathBuf,
    /// Model family: cart | rf | ols | ridge | lasso.
    #[arg(long)]
    model: String,
    /// Optional JSON with fit parameters (see FitParams).
    #[arg(long)]
    params: Option<PathBuf>,
    /// Output model artifact path.
    #[arg(long)]
    out: PathBuf,
}

/// Fit parameters accepted in the `--params` JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct FitParams {
    /// What the learner predicts: the scalar outcome or the realized cost.
    target: TargetKind,
    cost: CostSpec,
    /// Standardize covariates before fitting (scaler stored on the model).
    normalize: bool,
    min_leaf: usize,
    max_leaves: usize,
    honesty_fraction: f64,
    /// Trees in a forest fit.
    trees: usize,
    /// Candidate features per split (forests); 0 means the default third.
    features_per_split: usize,
    /// Regularization strength for ridge and lasso.
    alpha: f64,
    seed: u64,
}

impl Default for FitParams {
    fn default() -> Self {
        Self {
            target: TargetKind::Outcome,
            cost: CostSpec::default(),
            normalize: false,
            min_leaf: 10,
            max_leaves: 100,
            honesty_fraction: 0.5,
            trees: 50,
            features_per_split: 0,
            alpha: 0.1,
            seed: 0,
        }
    }
}

#[derive(Args)]
struct PrescribeArgs {
    /// Fitted model artifact from `fit`.
    #[arg(long)]
    model: PathBuf,
    /// CSV of query covariates (header row; matched to the model's
    /// covariate names when present).
    #[arg(long)]
    x: PathBuf,
    /// Decision space JSON: {"lower": [...], "upper": [...], "constraints": [...]}.
    #[arg(long)]
    space: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    lambda1: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda2: f64,
    /// plain | squared_mean.
    #[arg(long, default_value = "plain")]
    mode: String,
    /// Noise variance; defaults to the model's training estimate.
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long, default_value_t = 3)]
    restarts: usize,
    #[arg(long, default_value_t = 101)]
    grid_points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Benchmark config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Report JSON output.
    #[arg(long)]
    out: PathBuf,
    /// Figure-ready curves CSV (method, n, replication, metric).
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SensitivityArgs {
    /// Dosing benchmark config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated variance-penalty multipliers.
    #[arg(long, value_delimiter = ',', required = true)]
    l1: Vec<f64>,
    /// Comma-separated bias-penalty multipliers.
    #[arg(long, value_delimiter = ',', required = true)]
    l2: Vec<f64>,
    /// Grid CSV output (lambda1, lambda2, mean_mse).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct TheoryInputArgs {
    /// Maximum number of weight regions (tree leaves).
    #[arg(long, default_value_t = 1)]
    max_regions: usize,
    /// Minimum samples per region.
    #[arg(long, default_value_t = 1)]
    min_leaf: usize,
    #[arg(long, default_value_t = 1.0)]
    diameter: f64,
    /// Weight-function Lipschitz constant within a region.
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Cost Lipschitz constant.
    #[arg(long, default_value_t = 1.0)]
    lipschitz: f64,
    /// Decision dimension.
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
}

impl TheoryInputArgs {
    fn to_inputs(&self) -> TheoryInputs {
        TheoryInputs {
            max_regions: self.max_regions,
            min_leaf: self.min_leaf,
            diameter: self.diameter,
            weight_lipschitz: self.alpha,
            cost_lipschitz: self.lipschitz,
            decision_dim: self.dim,
            delta: self.delta,
        }
    }
}

#[derive(Subcommand)]
enum TheoryCommand {
    /// Covering-number factor K_n.
    Kn(TheoryInputArgs),
    /// Bound-driven penalty multipliers (and K_n).
    Lambdas(TheoryInputArgs),
    /// Analytic and Monte Carlo regrets of the selection laboratory.
    Example1(Example1Args),
}

#[derive(Args)]
struct Example1Args {
    /// Comma-separated action counts.
    #[arg(long, value_delimiter = ',', default_value = "1,4,16")]
    m: Vec<usize>,
    /// Penalty multiplier; defaults to sqrt(2).
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    sims: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional JSON output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf, what: &str) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {what} {path:?}"))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {what} {path:?}"))
}

fn write_output(path: &PathBuf, content: &str) -> Result<()> {
    fs::write(path, content).with_context(|| format!("writing {path:?}"))?;
    Ok(())
}

fn pretty<T: Serialize>(value: &T) -> Result<String> {
    Ok(format!("{}\n", serde_json::to_string_pretty(value)?))
}

fn run_fit(args: FitArgs) -> Result<()> {
    let schema_text =
        fs::read_to_string(&args.schema).with_context(|| format!("reading {:?}", args.schema))?;
    let schema = Schema::from_json_str(&schema_text)?;
    let params: FitParams = match &args.params {
        Some(path) => read_json(path, "fit params")?,
        None => FitParams::default(),
    };
    let (mut ds, report) = load_dataset(&args.data, &schema)?;
    if params.normalize {
        ds = normalize_covariates(&ds)?;
    }

    let spec = match args.model.as_str() {
        "cart" => LearnerSpec::Cart(TreeParams {
            min_leaf: params.min_leaf,
            max_leaves: params.max_leaves,
            honesty_fraction: params.honesty_fraction,
            features_per_split: None,
            seed: params.seed,
        }),
        "rf" => LearnerSpec::Forest(ForestParams {
            trees: params.trees,
            min_leaf: params.min_leaf,
            max_leaves: params.max_leaves,
            features_per_split: (params.features_per_split > 0)
                .then_some(params.features_per_split),
            seed: params.seed,
        }),
        "ols" => LearnerSpec::Ols,
        "ridge" => LearnerSpec::Ridge { alpha: params.alpha },
        "lasso" => LearnerSpec::Lasso { alpha: params.alpha },
        other => bail!("unknown model family {other:?} (expected cart|rf|ols|ridge|lasso)"),
    };
    let artifact = ModelArtifact::build(&spec, &ds, params.target, params.cost)?;
    write_output(&args.out, &format!("{}\n", artifact.to_json()?))?;
    // The load report goes to stdout as JSON.
    print!("{}", pretty(&report)?);
    Ok(())
}

/// Rows of query covariates from a CSV, matched to the model's covariate
/// names when the header carries them, positional otherwise.
fn read_queries(path: &PathBuf, names: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {path:?}"))?;
    let headers = reader.headers()?.clone();
    let by_name: Option<Vec<usize>> = names
        .iter()
        .map(|n| headers.iter().position(|h| h == n))
        .collect();
    let positions: Vec<usize> = match by_name {
        Some(p) if !names.is_empty() => p,
        _ => {
            if headers.len() != names.len() {
                bail!(
                    "query CSV has {} columns but the model expects {} covariates",
                    headers.len(),
                    names.len()
                );
            }
            (0..headers.len()).collect()
        }
    };
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(positions.len());
        for &pos in &positions {
            let cell = record.get(pos).unwrap_or("");
            let value: f64 = cell
                .parse()
                .with_context(|| format!("row {}: bad numeric {cell:?}", i + 1))?;
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("query CSV {path:?} has no rows");
    }
    Ok(rows)
}

#[derive(Serialize)]
struct PrescriptionRow {
    x: Vec<f64>,
    z: Vec<f64>,
    value: f64,
    decomposition: Option<Decomposition>,
    leaf: Option<usize>,
    restart: Option<usize>,
    diagnostics: SolverDiagnostics,
}

fn run_prescribe(args: PrescribeArgs) -> Result<()> {
    let artifact = ModelArtifact::from_json(
        &fs::read_to_string(&args.model).with_context(|| format!("reading {:?}", args.model))?,
    )?;
    let space: DecisionSpace = read_json(&args.space, "decision space")?;
    space.validate()?;
    let mode = match args.mode.as_str() {
        "plain" => ObjectiveMode::Plain,
        "squared_mean" | "squared-mean" => ObjectiveMode::SquaredMean,
        other => bail!("unknown objective mode {other:?}"),
    };
    let cfg = PenaltyConfig::new(
        args.lambda1,
        args.lambda2,
        args.sigma2.unwrap_or(artifact.sigma_sq),
        mode,
    )?;
    let names = match &artifact.train {
        Some(train) => train.covariate_names.clone(),
        None => Vec::new(),
    };
    let queries = read_queries(&args.x, &names)?;
    let mut rows = Vec::with_capacity(queries.len());
    for (i, x) in queries.iter().enumerate() {
        let opts = ForestOptOptions {
            restarts: args.restarts,
            grid_points: args.grid_points,
            max_cycles: 100,
            seed: prescript_core::rng::derive_seed(args.seed, i as u64),
        };
        let transformed = artifact.transform_query(x);
        let p = artifact.prescribe(&transformed, &cfg, &space, &opts)?;
        rows.push(PrescriptionRow {
            x: x.clone(),
            z: p.z,
            value: p.value,
            decomposition: p.decomposition,
            leaf: p.leaf,
            restart: p.restart,
            diagnostics: p.diagnostics,
        });
    }
    write_output(&args.out, &pretty(&rows)?)?;
    Ok(())
}

fn run_benchmark_cmd(args: BenchmarkArgs) -> Result<()> {
    let config: BenchmarkConfig = read_json(&args.config, "benchmark config")?;
    let report = run_benchmark(&config)?;
    write_output(&args.out, &pretty(&report)?)?;
    if let Some(csv_path) = &args.csv {
        write_output(csv_path, &report.to_curves_csv())?;
    }
    eprintln!("benchmark finished in {:.1}s", report.runtime_seconds);
    Ok(())
}

fn run_sensitivity(args: SensitivityArgs) -> Result<()> {
    let config: BenchmarkConfig = read_json(&args.config, "benchmark config")?;
    let report = sensitivity_grid(&config, &args.l1, &args.l2)?;
    write_output(&args.out, &report.to_csv())?;
    eprintln!("sensitivity grid finished in {:.1}s", report.runtime_seconds);
    Ok(())
}

#[derive(Serialize)]
struct Example1Row {
    m: usize,
    lambda: f64,
    analytic_up: f64,
    analytic_pcm: f64,
    mc_up: f64,
    mc_up_se: f64,
    mc_pcm: f64,
    mc_pcm_se: f64,
    state_a_up: f64,
    state_a_up_se: f64,
    state_a_pcm: f64,
    state_a_pcm_se: f64,
}

fn run_theory(cmd: TheoryCommand) -> Result<()> {
    match cmd {
        TheoryCommand::Kn(args) => {
            let inputs = args.to_inputs();
            inputs.validate()?;
            let out = serde_json::json!({ "kn": compute_kn(&inputs) });
            print!("{}\n", serde_json::to_string_pretty(&out)?);
        }
        TheoryCommand::Lambdas(args) => {
            let inputs = args.to_inputs();
            inputs.validate()?;
            let (lambda1, lambda2) = theory_lambdas(&inputs);
            let out = serde_json::json!({
                "kn": compute_kn(&inputs),
                "lambda1": lambda1,
                "lambda2": lambda2,
            });
            print!("{}\n", serde_json::to_string_pretty(&out)?);
        }
        TheoryCommand::Example1(args) => {
            let lambda = args.lambda.unwrap_or(2.0f64.sqrt());
            let mut rows = Vec::new();
            for &m in &args.m {
                let analytic = example1_analytic(m, lambda)?;
                let mc = example1_montecarlo(m, lambda, args.sims, args.seed)?;
                rows.push(Example1Row {
                    m,
                    lambda,
                    analytic_up: analytic.regret_up,
                    analytic_pcm: analytic.regret_pcm,
                    mc_up: mc.up_mean,
                    mc_up_se: mc.up_se,
                    mc_pcm: mc.pcm_mean,
                    mc_pcm_se: mc.pcm_se,
                    state_a_up: mc.state_a.up_mean,
                    state_a_up_se: mc.state_a.up_se,
                    state_a_pcm: mc.state_a.pcm_mean,
                    state_a_pcm_se: mc.state_a.pcm_se,
                });
            }
            let text = format!("{}\n", serde_json::to_string_pretty(&rows)?);
            match &args.out {
                Some(path) => write_output(path, &text)?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Fit(args) => run_fit(args),
        Command::Prescribe(args) => run_prescribe(args),
        Command::Benchmark(args) => run_benchmark_cmd(args),
        Command::Sensitivity(args) => run_sensitivity(args),
        Command::Theory(cmd) => run_theory(cmd),
    }
}
