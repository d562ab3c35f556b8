use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dualinf::cli::{
    cmd_evaluate, cmd_report, cmd_run, EvaluateConfig, Method, ReportConfig, RunConfig, Subset,
    EXIT_FATAL, EXIT_OK, EXIT_PARTIAL,
};
use dualinf::metrics::MatchMode;

/// Interpretable differential diagnosis: run, evaluate, and compare
/// prompting pipelines over an annotated clinical-note corpus.
#[derive(Parser)]
#[command(name = "dualinf", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a method over the dataset into a run directory.
    Run(RunArgs),
    /// Score a run directory against the gold dataset.
    Evaluate(EvaluateArgs),
    /// Compare one or more eval directories.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Dataset file (JSON Lines).
    #[arg(long)]
    dataset: PathBuf,
    /// Method: cot, diagnosis-cot, sc-cot, self-contrast, or dual-inf.
    #[arg(long)]
    method: String,
    /// Pipeline variant for --method dual-inf: fi, fi-em-star, fi-em,
    /// dual-inf-star.
    #[arg(long)]
    variant: Option<String>,
    /// Minimum supporting interpretations for a confident diagnosis.
    #[arg(long, default_value_t = 3)]
    beta: u32,
    /// Maximum self-reflection iterations.
    #[arg(long = "lambda", default_value_t = 5)]
    lambda: u32,
    #[arg(long, default_value_t = 0.1)]
    temperature: f64,
    #[arg(long, default_value_t = 2048)]
    max_output: u32,
    /// Number of repetitions of the whole run.
    #[arg(long, default_value_t = 5)]
    runs: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Corpus slice: all, rare, or specialty:<name>.
    #[arg(long, default_value = "all")]
    subset: String,
    /// Rare-disease list (one name per line), required for --subset rare.
    #[arg(long)]
    rare_list: Option<PathBuf>,
    /// Backend definitions and role map (JSON).
    #[arg(long)]
    backend_config: PathBuf,
    /// Response cache directory; reruns replay cached responses.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Run output directory.
    #[arg(long)]
    out: PathBuf,
    /// Self-consistency reasoning paths.
    #[arg(long, default_value_t = 5)]
    sc_paths: u32,
    /// Self-consistency vote threshold (default: majority).
    #[arg(long)]
    vote_threshold: Option<u32>,
    /// Sampling temperature for self-consistency paths.
    #[arg(long, default_value_t = 0.7)]
    sample_temperature: f64,
    /// Concurrent notes in flight.
    #[arg(long, default_value_t = 1)]
    concurrency: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Run directory produced by `dualinf run`.
    #[arg(long)]
    run_dir: PathBuf,
    /// Gold dataset; must digest-match the run manifest.
    #[arg(long)]
    dataset: PathBuf,
    /// exact or judge.
    #[arg(long, default_value = "exact")]
    match_mode: String,
    /// Backend id to judge with (defaults to the `judge` role).
    #[arg(long)]
    judge_backend: Option<String>,
    #[arg(long)]
    backend_config: Option<PathBuf>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Eval output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    bootstrap_resamples: u32,
    #[arg(long, default_value_t = 0.95)]
    ci_level: f64,
    /// Optional synonym table (term<TAB>synonym lines) for the unigram
    /// metric's synonym stage.
    #[arg(long)]
    synonym_table: Option<PathBuf>,
    /// Dimension of the builtin hashing embedder.
    #[arg(long, default_value_t = 256)]
    embedding_dim: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// Eval directories to compare.
    #[arg(required = true)]
    eval_dirs: Vec<PathBuf>,
    /// Report output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    bootstrap_resamples: u32,
    #[arg(long, default_value_t = 0.95)]
    ci_level: f64,
}

fn run(args: RunArgs) -> anyhow::Result<i32> {
    let method = Method::parse(&args.method, args.variant.as_deref())?;
    let mut config = RunConfig::new(args.dataset, method, args.backend_config, args.out);
    config.beta = args.beta;
    config.max_iterations = args.lambda;
    config.temperature = args.temperature;
    config.max_output = args.max_output;
    config.runs = args.runs;
    config.seed = args.seed;
    config.subset = Subset::parse(&args.subset)?;
    config.rare_list = args.rare_list;
    config.cache_dir = args.cache_dir;
    config.sc_paths = args.sc_paths;
    config.vote_threshold = args.vote_threshold;
    config.sample_temperature = args.sample_temperature;
    config.concurrency = args.concurrency;

    let summary = cmd_run(&config)?;
    eprintln!(
        "run complete: {} ({} backend calls, {} cache hits)",
        summary.out_dir.display(),
        summary.backend_calls,
        summary.cache_hits
    );
    if summary.failed_notes.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("failed notes: {:?}", summary.failed_notes);
        Ok(EXIT_PARTIAL)
    }
}

fn evaluate(args: EvaluateArgs) -> anyhow::Result<i32> {
    let match_mode = match args.match_mode.as_str() {
        "exact" | "exact_normalized" => MatchMode::ExactNormalized,
        "judge" => MatchMode::Judge,
        other => anyhow::bail!("unknown match mode {other:?}; expected exact or judge"),
    };
    let mut config = EvaluateConfig::new(args.run_dir, args.dataset, args.out);
    config.match_mode = match_mode;
    config.judge_backend = args.judge_backend;
    config.backend_config = args.backend_config;
    config.cache_dir = args.cache_dir;
    config.seed = args.seed;
    config.bootstrap_resamples = args.bootstrap_resamples;
    config.ci_level = args.ci_level;
    config.synonym_table = args.synonym_table;
    config.embedding_dim = args.embedding_dim;

    let summary = cmd_evaluate(&config)?;
    eprintln!("evaluation written to {}", summary.out_dir.display());
    if summary.partial {
        eprintln!(
            "judge coverage {:.4}: report is partial",
            summary.judge_coverage
        );
        Ok(EXIT_PARTIAL)
    } else {
        Ok(EXIT_OK)
    }
}

fn report(args: ReportArgs) -> anyhow::Result<i32> {
    let mut config = ReportConfig::new(args.eval_dirs, args.out);
    config.seed = args.seed;
    config.bootstrap_resamples = args.bootstrap_resamples;
    config.ci_level = args.ci_level;
    cmd_report(&config)?;
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Report(args) => report(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FATAL as u8)
        }
    }
}
