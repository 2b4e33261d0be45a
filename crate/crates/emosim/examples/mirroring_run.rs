//! Runs a short caregiver-infant mirroring session end to end: the frozen
//! appraisal network reads affect off each caregiver image, the fatigue
//! model biases it, the compensation memory corrects systematic category
//! offsets, and the policy learns facial actions that pull interoception
//! toward the homeostatic set point.
//!
//!     cargo run --example mirroring_run

use std::path::PathBuf;

use emosim::checkpoint::Checkpoint;
use emosim::config::Config;
use emosim::env::{Corpus, EXPRESSIONS};
use emosim::orchestrator::{RunLog, Runner, RUNLOG_FILE};
use emosim::rng::derive_stream;

/// Trains (or reuses) a small appraisal network so the example stands alone.
fn prepare_ram(cfg: &Config) -> PathBuf {
    let path = std::env::temp_dir().join("emosim-example-ram.emck");
    if path.exists() {
        println!("reusing appraisal network at {}", path.display());
        return path;
    }
    println!("training a small appraisal network first (one-time, ~10s)");
    let mut quick = cfg.clone();
    quick.env.corpus_size = 600;
    let mut corpus_rng = derive_stream(11, "corpus");
    let corpus = Corpus::generate(
        quick.env.corpus_size,
        quick.image.side,
        quick.env.corpus_noise,
        &mut corpus_rng,
    )
    .expect("corpus");
    let mut rng = derive_stream(11, "ram-train");
    let (ram, _) = emosim::ram::train(&quick, &corpus, &mut rng, Some(0.5)).expect("training");
    let mut ck = Checkpoint::new();
    ram.save_into(&mut ck, "ram").expect("serialize");
    ck.save(&path).expect("save");
    path
}

fn main() {
    let mut cfg = Config::default();
    cfg.run.epochs = 1000;
    cfg.run.seed = 5;
    cfg.run.ram_checkpoint = prepare_ram(&cfg).to_string_lossy().into_owned();

    let dir = std::env::temp_dir().join("emosim-example-run");
    if dir.exists() {
        std::fs::remove_dir_all(&dir).expect("clear previous run");
    }
    println!("running {} interaction epochs into {}", cfg.run.epochs, dir.display());
    let mut runner = Runner::create(cfg, &dir).expect("create run");
    runner.run_to_completion().expect("run");

    let log = RunLog::read(&dir.join(RUNLOG_FILE)).expect("read log");
    let n = log.records.len();
    println!("\n{:>12} {:>10} {:>8} {:>10}", "epochs", "reward", "fatigue", "lstm loss");
    for span in 0..5 {
        let lo = span * n / 5;
        let hi = (span + 1) * n / 5;
        let rows = &log.records[lo..hi];
        let reward: f64 = rows.iter().map(|r| r.reward).sum::<f64>() / rows.len() as f64;
        let ia: f64 = rows.iter().map(|r| r.ia).sum::<f64>() / rows.len() as f64;
        let losses: Vec<f64> = rows.iter().filter_map(|r| r.lstm_loss).collect();
        let loss = losses.iter().sum::<f64>() / losses.len().max(1) as f64;
        println!("{:>5}..{:<6} {:>10.3} {:>8.3} {:>10.3}", lo + 1, hi, reward, ia, loss);
    }

    println!("\nexpression counts over the run:");
    for e in EXPRESSIONS {
        let count = log.records.iter().filter(|r| r.expression == e).count();
        println!("  {:<9} {:>6} ({:.1}%)", e.name(), count, 100.0 * count as f64 / n as f64);
    }
}
