//! Command-line front end. All behavior lives in the library; this file only
//! parses arguments, layers configuration (defaults < file < environment <
//! flags), and dispatches.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use emosim::checkpoint::Checkpoint;
use emosim::config::Config;
use emosim::env::Corpus;
use emosim::error::Result;
use emosim::orchestrator::Runner;
use emosim::rng::derive_stream;

#[derive(Parser)]
#[command(name = "emosim", version, about = "Layered affective agent in a caregiver-mirroring environment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the innate appraisal network on a generated corpus.
    TrainRam(TrainRamArgs),
    /// Start a mirroring run in a fresh directory.
    Run(RunArgs),
    /// Continue a run from its last checkpoint.
    Resume(ResumeArgs),
    /// Produce plots and statistics from finished runs.
    Analyze(AnalyzeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ConditionArg {
    FaceOnly,
    FaceNatural,
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Args)]
struct ConfigArgs {
    /// Configuration file (key=value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<Config> {
        let mut cfg = Config::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)?;
            cfg.merge_text(&text)?;
        }
        cfg.apply_env_overrides(std::env::vars())?;
        for pair in &self.set {
            let (key, value) = pair.split_once('=').ok_or_else(|| {
                emosim::error::Error::invalid(format!("--set expects KEY=VALUE, got `{pair}`"))
            })?;
            cfg.set(key.trim(), value)?;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainRamArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Random seed for corpus generation and training.
    #[arg(long)]
    seed: Option<u64>,
    /// Checkpoint file to write the trained network into.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Caregiver condition.
    #[arg(long)]
    condition: Option<ConditionArg>,
    /// Enable or disable the compensation layer.
    #[arg(long)]
    second_layer: Option<Toggle>,
    /// Number of interaction epochs.
    #[arg(long)]
    epochs: Option<u64>,
    /// Random seed for the run.
    #[arg(long)]
    seed: Option<u64>,
    /// Fresh directory for the run's logs and checkpoint.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct ResumeArgs {
    /// Run directory containing the checkpoint to continue from.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// New target epoch count (defaults to the one recorded in the run).
    #[arg(long)]
    epochs: Option<u64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Run directories to analyze; the first is the comparison baseline.
    #[arg(long, value_name = "DIR", num_args = 1.., required = true)]
    runs: Vec<PathBuf>,
    /// Output directory for plots and tables.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Number of epoch bands for the scatter plots and frequency table.
    #[arg(long)]
    bands: Option<usize>,
}

fn train_ram(args: &TrainRamArgs) -> Result<()> {
    let mut cfg = args.config.load()?;
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    cfg.validate()?;
    let mut corpus_rng = derive_stream(cfg.run.seed, "corpus");
    let corpus =
        Corpus::generate(cfg.env.corpus_size, cfg.image.side, cfg.env.corpus_noise, &mut corpus_rng)?;
    let mut train_rng = derive_stream(cfg.run.seed, "ram-train");
    let (ram, history) = emosim::ram::train(&cfg, &corpus, &mut train_rng, None)?;
    for h in &history {
        println!(
            "epoch {:>3}  train mse {:>8.4}  holdout mae {:.4}/{:.4}",
            h.epoch, h.train_mse, h.holdout_mae[0], h.holdout_mae[1]
        );
    }
    let mut ck = Checkpoint::new();
    ram.save_into(&mut ck, "ram")?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    ck.save(&args.out)?;
    println!("saved appraisal network to {}", args.out.display());
    Ok(())
}

fn run(args: &RunArgs) -> Result<()> {
    let mut cfg = args.config.load()?;
    if let Some(c) = args.condition {
        cfg.run.condition = match c {
            ConditionArg::FaceOnly => emosim::config::Condition::FaceOnly,
            ConditionArg::FaceNatural => emosim::config::Condition::FaceNatural,
        };
    }
    if let Some(t) = args.second_layer {
        cfg.run.with_second_layer = matches!(t, Toggle::On);
    }
    if let Some(e) = args.epochs {
        cfg.run.epochs = e;
    }
    if let Some(s) = args.seed {
        cfg.run.seed = s;
    }
    cfg.validate()?;
    let mut runner = Runner::create(cfg, &args.out)?;
    runner.run_to_completion()?;
    println!("run finished in {}", args.out.display());
    Ok(())
}

fn resume(args: &ResumeArgs) -> Result<()> {
    let mut runner = Runner::resume(&args.out, args.epochs)?;
    runner.run_to_completion()?;
    println!("run continued in {}", args.out.display());
    Ok(())
}

fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let cfg = args.config.load()?;
    let bands = args.bands.unwrap_or(cfg.analysis.bands);
    emosim::analysis::emit_reports(&args.runs, &args.out, bands)?;
    println!("reports written to {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::TrainRam(a) => train_ram(a),
        Command::Run(a) => run(a),
        Command::Resume(a) => resume(a),
        Command::Analyze(a) => analyze(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
