use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pmse_experiments::config::{Depth, ExperimentConfig, ExperimentKind, Method};
use pmse_experiments::error::{ExperimentError, Result};
use pmse_experiments::synthesize::{synthesize_to_dir, SynthesizeConfig};
use pmse_experiments::{emit_report, run_experiment};

/// Differentially private synthetic data with the pMSE mechanism.
#[derive(Debug, Parser)]
#[command(name = "dp-pmse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Release synthetic copies of a two-column CSV dataset.
    Synthesize(SynthesizeArgs),
    /// Rate at which greedy trees exceed the 1/n sensitivity bound.
    FailureRate(ExperimentArgs),
    /// Regression coefficients recovered from each synthesizer.
    RegressEval(ExperimentArgs),
    /// pMSE of each synthesizer's output against the original data.
    PmseEval(ExperimentArgs),
}

#[derive(Debug, Args)]
struct ChainArgs {
    /// Chain sweeps per draw.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
}

#[derive(Debug, Args)]
struct SynthesizeArgs {
    /// JSON file with any of the fields below; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Positive integer or "unlimited".
    #[arg(long)]
    depth: Option<Depth>,
    #[arg(long)]
    cp: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    chain: ChainArgs,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// JSON file with any experiment fields; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    sims: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    depths: Option<Vec<Depth>>,
    #[arg(long, value_delimiter = ',')]
    cps: Option<Vec<f64>>,
    /// Bound multipliers in population sds.
    #[arg(long, value_delimiter = ',')]
    bounds: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    eval_depth: Option<Depth>,
    #[arg(long)]
    eval_cp: Option<f64>,
    #[arg(long)]
    bins_per_dim: Option<usize>,
    #[command(flatten)]
    chain: ChainArgs,
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn apply_chain(chain: &mut pmse_core::mechanism::ChainConfig, args: ChainArgs) {
    set(&mut chain.iterations, args.iterations);
    set(&mut chain.burn_in, args.burn_in);
    // A shortened burn-in shortens the annealing schedule with it.
    if let Some(a) = chain.anneal.as_mut() {
        a.iterations = a.iterations.min(chain.burn_in);
    }
}

fn experiment_config(kind: ExperimentKind, args: ExperimentArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_json_file(kind, path)?,
        None => ExperimentConfig::defaults(kind),
    };
    set(&mut cfg.sims, args.sims);
    set(&mut cfg.n, args.n);
    set(&mut cfg.seed, args.seed);
    set(&mut cfg.epsilons, args.epsilons);
    set(&mut cfg.depths, args.depths);
    set(&mut cfg.cps, args.cps);
    set(&mut cfg.bounds, args.bounds);
    set(&mut cfg.methods, args.methods);
    set(&mut cfg.l, args.l);
    set(&mut cfg.m, args.m);
    set(&mut cfg.eval_depth, args.eval_depth);
    set(&mut cfg.eval_cp, args.eval_cp);
    set(&mut cfg.bins_per_dim, args.bins_per_dim);
    if args.out.is_some() {
        cfg.output = args.out;
    }
    apply_chain(&mut cfg.chain, args.chain);
    cfg.validate()?;
    Ok(cfg)
}

fn synthesize_config(args: SynthesizeArgs) -> Result<SynthesizeConfig> {
    let mut cfg = match &args.config {
        Some(path) => SynthesizeConfig::from_json_file(path)?,
        None => SynthesizeConfig::default(),
    };
    if args.input.is_some() {
        cfg.input = args.input;
    }
    if args.out.is_some() {
        cfg.output = args.out;
    }
    set(&mut cfg.epsilon, args.epsilon);
    set(&mut cfg.l, args.l);
    set(&mut cfg.m, args.m);
    set(&mut cfg.depth, args.depth);
    set(&mut cfg.cp, args.cp);
    set(&mut cfg.seed, args.seed);
    apply_chain(&mut cfg.chain, args.chain);
    Ok(cfg)
}

fn run(command: Command) -> Result<()> {
    let (kind, args) = match command {
        Command::Synthesize(args) => {
            let cfg = synthesize_config(args)?;
            let dir = cfg.output.clone().ok_or_else(|| {
                ExperimentError::Config("no output directory given (--out)".into())
            })?;
            for path in synthesize_to_dir(&cfg, &dir)? {
                println!("{}", path.display());
            }
            return Ok(());
        }
        Command::FailureRate(args) => (ExperimentKind::FailureRate, args),
        Command::RegressEval(args) => (ExperimentKind::RegressEval, args),
        Command::PmseEval(args) => (ExperimentKind::PmseEval, args),
    };
    let cfg = experiment_config(kind, args)?;
    let dir = cfg
        .output
        .clone()
        .ok_or_else(|| ExperimentError::Config("no output directory given (--out)".into()))?;
    let report = run_experiment(&cfg)?;
    let artifacts = emit_report(&report, &dir)?;
    println!("{}", artifacts.json.display());
    println!("{}", artifacts.csv.display());
    Ok(())
}

/// One-line JSON error record on stderr.
fn report_error(kind: &str, message: &str) {
    let line = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{line}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.kind().to_string();
            let detail = e.to_string();
            let first = detail
                .lines()
                .map(|l| l.trim_start_matches("error: ").trim())
                .find(|l| !l.is_empty())
                .unwrap_or(&text);
            report_error("usage", first);
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            ExitCode::FAILURE
        }
    }
}
