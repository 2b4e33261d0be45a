//! Compares the two stimulus conditions: a caregiver who only ever shows
//! faces against one who mixes faces with natural images. Predicting the
//! mixed stream is harder, so the forward model's loss should settle higher
//! and the reward lower.
//!
//!     cargo run --example compare_conditions

use std::path::PathBuf;

use emosim::checkpoint::Checkpoint;
use emosim::config::{Condition, Config};
use emosim::env::Corpus;
use emosim::orchestrator::{RunLog, Runner, RUNLOG_FILE};
use emosim::rng::derive_stream;

fn prepare_ram(cfg: &Config) -> PathBuf {
    let path = std::env::temp_dir().join("emosim-example-ram.emck");
    if path.exists() {
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

fn tail_stats(dir: &PathBuf) -> (f64, f64) {
    let log = RunLog::read(&dir.join(RUNLOG_FILE)).expect("read log");
    let from = log.records.len() * 3 / 4;
    let tail = &log.records[from..];
    let losses: Vec<f64> = tail.iter().filter_map(|r| r.lstm_loss).collect();
    let loss = losses.iter().sum::<f64>() / losses.len() as f64;
    let reward = tail.iter().map(|r| r.reward).sum::<f64>() / tail.len() as f64;
    (loss, reward)
}

fn main() {
    let mut cfg = Config::default();
    cfg.run.epochs = 1500;
    cfg.run.seed = 3;
    cfg.run.ram_checkpoint = prepare_ram(&cfg).to_string_lossy().into_owned();

    let mut results = Vec::new();
    for condition in [Condition::FaceOnly, Condition::FaceNatural] {
        let mut c = cfg.clone();
        c.run.condition = condition;
        let dir = std::env::temp_dir().join(format!("emosim-example-{}", condition.as_str()));
        if dir.exists() {
            std::fs::remove_dir_all(&dir).expect("clear previous run");
        }
        println!("running {} for {} epochs", condition.as_str(), c.run.epochs);
        Runner::create(c, &dir).expect("create").run_to_completion().expect("run");
        results.push((condition, tail_stats(&dir)));
    }

    println!("\nfinal-quarter means:");
    println!("{:<14} {:>12} {:>10}", "condition", "model loss", "reward");
    for (condition, (loss, reward)) in &results {
        println!("{:<14} {:>12.3} {:>10.3}", condition.as_str(), loss, reward);
    }
    let (_, (l_face, r_face)) = results[0];
    let (_, (l_mixed, r_mixed)) = results[1];
    if l_face < l_mixed && r_face > r_mixed {
        println!("\nthe pure face stream is easier to predict and more rewarding, as expected");
    } else {
        println!("\nno clear separation at this desk scale; longer runs sharpen it");
    }
}
