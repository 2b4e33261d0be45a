//! Demonstrates that a checkpointed run continues bit-exactly: a session
//! stopped halfway and resumed produces byte-identical logs to one that ran
//! straight through.
//!
//!     cargo run --example resume_run

use std::path::{Path, PathBuf};

use emosim::checkpoint::Checkpoint;
use emosim::config::Config;
use emosim::env::Corpus;
use emosim::orchestrator::{Runner, ACTIVATIONS_FILE, CHECKPOINT_FILE, RUNLOG_FILE};
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

fn fresh_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(name);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).expect("clear previous run");
    }
    dir
}

fn same_bytes(a: &Path, b: &Path, name: &str) -> bool {
    std::fs::read(a.join(name)).expect("read") == std::fs::read(b.join(name)).expect("read")
}

fn main() {
    let mut cfg = Config::default();
    cfg.run.epochs = 600;
    cfg.run.seed = 9;
    cfg.run.ram_checkpoint = prepare_ram(&cfg).to_string_lossy().into_owned();

    let straight = fresh_dir("emosim-example-straight");
    println!("straight run: {} epochs", cfg.run.epochs);
    Runner::create(cfg.clone(), &straight).expect("create").run_to_completion().expect("run");

    let split = fresh_dir("emosim-example-split");
    let mut half = cfg.clone();
    half.run.epochs = cfg.run.epochs / 2;
    println!("split run: {} epochs, checkpoint, resume to {}", half.run.epochs, cfg.run.epochs);
    Runner::create(half, &split).expect("create").run_to_completion().expect("first half");
    Runner::resume(&split, Some(cfg.run.epochs)).expect("resume").run_to_completion().expect("second half");

    println!();
    for name in [RUNLOG_FILE, ACTIVATIONS_FILE, CHECKPOINT_FILE] {
        let ok = same_bytes(&straight, &split, name);
        println!("{name}: {}", if ok { "byte-identical" } else { "MISMATCH" });
        assert!(ok, "{name} diverged after resume");
    }
    println!("\nthe resumed session is indistinguishable from the uninterrupted one");
}
