//! Trains the glimpse-based appraisal network on a small synthetic corpus
//! and reports held-out accuracy per epoch. The trained network reads a
//! valence/arousal label out of an image through a handful of foveated
//! glimpses instead of seeing the whole frame at once.
//!
//!     cargo run --example train_first_layer

use emosim::checkpoint::Checkpoint;
use emosim::config::Config;
use emosim::env::Corpus;
use emosim::ram;
use emosim::rng::derive_stream;

fn main() {
    let mut cfg = Config::default();
    cfg.env.corpus_size = 600;
    cfg.ram.epochs = 20;

    let mut corpus_rng = derive_stream(11, "corpus");
    let corpus = Corpus::generate(
        cfg.env.corpus_size,
        cfg.image.side,
        cfg.env.corpus_noise,
        &mut corpus_rng,
    )
    .expect("corpus");
    println!(
        "corpus: {} images of side {}, training until held-out error < 0.5 per dimension",
        corpus.len(),
        cfg.image.side
    );

    let mut rng = derive_stream(11, "ram-train");
    let (ram, history) = ram::train(&cfg, &corpus, &mut rng, Some(0.5)).expect("training");

    println!("{:>5} {:>10} {:>8} {:>16}", "epoch", "train mse", "reward", "held-out mae v/a");
    for s in &history {
        println!(
            "{:>5} {:>10.4} {:>8.3} {:>8.3} {:>7.3}",
            s.epoch, s.train_mse, s.reward_rate, s.holdout_mae[0], s.holdout_mae[1]
        );
    }

    let out = std::env::temp_dir().join("emosim-first-layer.emck");
    let mut ck = Checkpoint::new();
    ram.save_into(&mut ck, "ram").expect("serialize");
    ck.save(&out).expect("save");
    println!("saved the trained network to {}", out.display());
}
