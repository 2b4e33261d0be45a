//! Produces the SVG report set for a finished run: learning curves,
//! interoception stability, expression frequencies per training band, and
//! the policy's middle-layer activations projected onto their principal
//! plane. Runs a short session first if none is lying around.
//!
//!     cargo run --example analyze_run

use std::path::PathBuf;

use emosim::analysis::emit_reports;
use emosim::checkpoint::Checkpoint;
use emosim::config::{Condition, Config};
use emosim::env::Corpus;
use emosim::orchestrator::Runner;
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

fn main() {
    let mut cfg = Config::default();
    cfg.run.condition = Condition::FaceNatural;
    cfg.run.epochs = 2000;
    cfg.run.seed = 23;
    cfg.run.ram_checkpoint = prepare_ram(&cfg).to_string_lossy().into_owned();

    let run_dir = std::env::temp_dir().join("emosim-example-analyze");
    let complete = run_dir.join("checkpoint.emck").exists();
    if !complete {
        if run_dir.exists() {
            std::fs::remove_dir_all(&run_dir).expect("clear previous run");
        }
        println!("running {} epochs into {}", cfg.run.epochs, run_dir.display());
        Runner::create(cfg, &run_dir).expect("create").run_to_completion().expect("run");
    } else {
        println!("reusing the finished run at {}", run_dir.display());
    }

    let out = std::env::temp_dir().join("emosim-example-reports");
    std::fs::create_dir_all(&out).expect("report dir");
    emit_reports(&[run_dir], &out, 5).expect("reports");

    println!("\nreports written to {}:", out.display());
    let mut names: Vec<String> = std::fs::read_dir(&out)
        .expect("list")
        .map(|e| e.expect("entry").file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for name in names {
        println!("  {name}");
    }
}
