//! `lsa` — experiment CLI for dataset generation, probe training, recursive
//! evaluation, and group-algebra utilities.
//!
//! Exit codes: 0 ok, 1 usage, 2 invariant/acceptance failure, 3 I/O.

mod algebra;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lsa_core::embed::{EncoderSpec, LossKind};
use lsa_core::evalrec::{compare_levels, EvalReport};
use lsa_core::experiment::{
    run_eval, run_generate, run_repro, run_train, ExperimentConfig, ExperimentError,
};

const EXIT_USAGE: u8 = 1;
const EXIT_INVARIANT: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "lsa", version, about = "Latent-space algebra benchmark toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a dataset (frames, manifest, injectivity report).
    Generate(RunArgs),
    /// Train the linear transition probe on a generated dataset.
    Train(TrainArgs),
    /// Recursively evaluate a trained probe on the test split.
    Eval(EvalArgs),
    /// Combine per-level evaluation reports into a hierarchy summary.
    Report(ReportArgs),
    /// Group-algebra utilities: derived series, word evaluation, formula
    /// compilation.
    #[command(subcommand)]
    Algebra(algebra::AlgebraCommand),
    /// Full pipeline: generate, then train + eval for both loss kinds.
    Repro(RunArgs),
}

/// Flags shared by the pipeline subcommands; each overrides the config.
#[derive(Args, Clone)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the global seed (propagates to every RNG stream).
    #[arg(long)]
    seed: Option<u64>,
    /// Override the benchmark level.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    level: Option<u8>,
    /// Override the loss kind (mse|cosine).
    #[arg(long, value_parser = parse_loss)]
    loss: Option<LossKind>,
    /// Override the encoder (downsample|randproj|pca|oracle).
    #[arg(long)]
    encoder: Option<String>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Override the output directory (also: LSA_OUT env var).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fail (exit 2) on injectivity violations.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Dataset directory (defaults to the config's output directory).
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Dataset directory (defaults to the config's output directory).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Trained probe JSON (defaults to probe_<loss>.json in the output dir).
    #[arg(long)]
    probe: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Evaluation report JSON files, one per level.
    reports: Vec<PathBuf>,
    /// Where to write the summary JSON (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    s.parse()
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> CliError {
        CliError { code: EXIT_USAGE, message: message.into() }
    }

    fn invariant(message: impl Into<String>) -> CliError {
        CliError { code: EXIT_INVARIANT, message: message.into() }
    }

    fn io(message: impl Into<String>) -> CliError {
        CliError { code: EXIT_IO, message: message.into() }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> CliError {
        use lsa_core::embed::EmbedError;
        use lsa_core::evalrec::EvalError;
        use lsa_core::scene::SceneError;
        let code = match &e {
            ExperimentError::Io { .. } => EXIT_IO,
            ExperimentError::InvalidConfig(_) => EXIT_USAGE,
            ExperimentError::Scene(SceneError::Io(_)) => EXIT_IO,
            ExperimentError::Embed(EmbedError::Io(_)) => EXIT_IO,
            ExperimentError::Eval(EvalError::Io(_)) => EXIT_IO,
            ExperimentError::Eval(EvalError::Embed(EmbedError::Io(_))) => EXIT_IO,
            _ => EXIT_INVARIANT,
        };
        CliError { code, message: format!("{e}") }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are not usage errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Report(args) => cmd_report(args),
        Command::Algebra(cmd) => algebra::run(cmd),
        Command::Repro(args) => cmd_repro(args),
    }
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load_json(&args.config).map_err(|e| match e {
        ExperimentError::Io { path, source } => {
            CliError::io(format!("cannot read config {}: {source}", path.display()))
        }
        ExperimentError::Json(err) => {
            CliError::usage(format!("config {} is malformed: {err}", args.config.display()))
        }
        other => CliError::from(other),
    })?;
    if let Some(seed) = args.seed {
        cfg.global_seed = seed;
        cfg.train.seed = seed;
    }
    if let Some(level) = args.level {
        cfg.level = level;
    }
    if let Some(name) = &args.encoder {
        cfg.encoder = EncoderSpec::parse(name).map_err(CliError::usage)?;
    }
    if let Some(workers) = args.workers {
        cfg.workers = workers;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    } else if let Ok(env_out) = std::env::var("LSA_OUT") {
        if !env_out.is_empty() {
            cfg.out_dir = PathBuf::from(env_out);
        }
    }
    cfg.validate()?;
    if cfg.workers > 0 {
        // Best effort: the pool can only be set once per process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build_global();
    }
    Ok(cfg)
}

fn loss_kinds(args: &RunArgs) -> Vec<LossKind> {
    match args.loss {
        Some(kind) => vec![kind],
        None => vec![LossKind::Mse, LossKind::Cosine],
    }
}

fn cmd_generate(args: RunArgs) -> Result<(), CliError> {
    let cfg = load_config(&args)?;
    let out = run_generate(&cfg)?;
    println!("manifest: {}", out.manifest_path.display());
    println!(
        "injectivity: {} pairs checked, {} violations (threshold {:.2})",
        out.injectivity.pairs_checked,
        out.injectivity.violations.len(),
        out.injectivity.threshold
    );
    if args.strict && !out.injectivity.passed() {
        return Err(CliError::invariant(format!(
            "injectivity check failed with {} violations",
            out.injectivity.violations.len()
        )));
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.run)?;
    let dataset = args.dataset.unwrap_or_else(|| cfg.out_dir.clone());
    for kind in loss_kinds(&args.run) {
        let out = run_train(&cfg, &dataset, kind)?;
        println!(
            "trained {} probe over {} epochs: final loss {:.6e}",
            kind.label(),
            out.curve.len(),
            out.final_loss
        );
        println!("probe: {}", out.probe_path.display());
        println!("curve: {}", out.curve_path.display());
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.run)?;
    let dataset = args.dataset.unwrap_or_else(|| cfg.out_dir.clone());
    for kind in loss_kinds(&args.run) {
        let probe = args
            .probe
            .clone()
            .unwrap_or_else(|| cfg.out_dir.join(format!("probe_{}.json", kind.label())));
        let out = run_eval(&cfg, &dataset, &probe, kind)?;
        let collapse = out
            .report
            .collapse_step
            .map_or("none".to_string(), |n| n.to_string());
        println!(
            "evaluated {} over N=1..20: collapse_step {collapse}, growth_rate {:.4e}",
            kind.label(),
            out.report.growth_rate
        );
        println!("report: {}", out.report_path.display());
        println!("csv: {}", out.csv_path.display());
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), CliError> {
    if args.reports.is_empty() {
        return Err(CliError::usage("report requires at least one evaluation report"));
    }
    let mut loaded = Vec::new();
    for path in &args.reports {
        let data = std::fs::read(path)
            .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
        let report: EvalReport = serde_json::from_slice(&data)
            .map_err(|e| CliError::usage(format!("{} is not an eval report: {e}", path.display())))?;
        loaded.push(report);
    }
    let refs: Vec<&EvalReport> = loaded.iter().collect();
    let summary = compare_levels(&refs).map_err(|e| CliError::invariant(e.to_string()))?;
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::invariant(e.to_string()))?;
    println!("loss-curve area ordering (hardest first): {:?}", summary.ordering);
    for (level, auc) in &summary.auc {
        println!("  level {level}: auc {auc:.6}");
    }
    match &args.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_repro(args: RunArgs) -> Result<(), CliError> {
    let cfg = load_config(&args)?;
    let out = run_repro(&cfg)?;
    println!("manifest: {}", out.generate.manifest_path.display());
    for (t, e) in out.trains.iter().zip(&out.evals) {
        println!(
            "{}: final train loss {:.6e}, collapse_step {}",
            e.report.metadata.loss_kind.label(),
            t.final_loss,
            e.report.collapse_step.map_or("none".to_string(), |n| n.to_string())
        );
    }
    if args.strict && !out.generate.injectivity.passed() {
        return Err(CliError::invariant("injectivity check failed"));
    }
    Ok(())
}
