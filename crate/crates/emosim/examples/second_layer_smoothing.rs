//! Shows what the compensation memory is for: with it enabled, the agent's
//! interoceptive trajectory jitters less between consecutive steps. Two
//! otherwise identical sessions are trained, then both policies are frozen
//! and replayed while the mean absolute successive difference of the
//! interoceptive state is measured.
//!
//!     cargo run --example second_layer_smoothing

use std::path::PathBuf;

use emosim::analysis::{mad, welch_t_test};
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

fn abs_diffs(series: &[[f64; 2]], component: usize) -> Vec<f64> {
    series.windows(2).map(|p| (p[1][component] - p[0][component]).abs()).collect()
}

fn main() {
    let mut cfg = Config::default();
    cfg.run.condition = Condition::FaceNatural;
    cfg.run.epochs = 2000;
    cfg.run.seed = 17;
    cfg.run.ram_checkpoint = prepare_ram(&cfg).to_string_lossy().into_owned();

    let mut series = Vec::new();
    for with_memory in [true, false] {
        let mut c = cfg.clone();
        c.run.with_second_layer = with_memory;
        let label = if with_memory { "with" } else { "without" };
        let dir = std::env::temp_dir().join(format!("emosim-example-l2-{label}"));
        if dir.exists() {
            std::fs::remove_dir_all(&dir).expect("clear previous run");
        }
        println!("training {} compensation memory ({} epochs)", label, c.run.epochs);
        Runner::create(c, &dir).expect("create").run_to_completion().expect("run");
        let mut frozen = Runner::reload_for_eval(&dir).expect("reload");
        series.push(frozen.eval_series(1000).expect("evaluate"));
    }

    let m_with = mad(&series[0]).expect("mad");
    let m_without = mad(&series[1]).expect("mad");
    println!("\nmean absolute successive difference of interoception (frozen policies):");
    println!("{:<10} {:>10} {:>10}", "", "valence", "arousal");
    println!("{:<10} {:>10.4} {:>10.4}", "with", m_with[0], m_with[1]);
    println!("{:<10} {:>10.4} {:>10.4}", "without", m_without[0], m_without[1]);

    for (component, name) in ["valence", "arousal"].iter().enumerate() {
        let (t, p) = welch_t_test(
            &abs_diffs(&series[0], component),
            &abs_diffs(&series[1], component),
        )
        .expect("test");
        println!("{name}: t = {t:.2}, p = {p:.2e}");
    }
}
