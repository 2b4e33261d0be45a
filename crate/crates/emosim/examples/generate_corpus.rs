//! Renders the stimulus catalogue and a slice of the appraisal training
//! corpus, then prints a few images as ASCII so you can see what the agent
//! actually looks at.
//!
//!     cargo run --example generate_corpus

use emosim::config::Config;
use emosim::env::{Corpus, FaceControls, StimulusSet, render_face};
use emosim::rng::derive_stream;
use emosim::tensor::Tensor;

fn ascii(img: &Tensor) -> String {
    let ramp: Vec<char> = " .:-=+*#%@".chars().collect();
    let side = img.shape()[1];
    let mut out = String::new();
    for r in 0..side {
        for c in 0..side {
            let v = img.data()[r * side + c].clamp(0.0, 1.0);
            let i = ((v * (ramp.len() - 1) as f64).round()) as usize;
            out.push(ramp[i]);
            out.push(ramp[i]);
        }
        out.push('\n');
    }
    out
}

fn main() {
    let cfg = Config::default();

    let stimuli = StimulusSet::build(&cfg).expect("stimulus set");
    println!("stimulus catalogue ({} entries):", stimuli.len());
    print!("{}", stimuli.manifest_csv());

    println!("\na smiling caregiver (mouth corners up):");
    let smile = FaceControls { mouth_corner: 0.9, ..FaceControls::neutral() };
    print!("{}", ascii(&render_face(&smile, 0, cfg.image.side)));

    println!("an angry caregiver (knitted brows, open eyes):");
    let angry = FaceControls {
        mouth_corner: 0.1,
        eyebrow_knit: 0.9,
        eyelid_open: 0.9,
        ..FaceControls::neutral()
    };
    print!("{}", ascii(&render_face(&angry, 0, cfg.image.side)));

    let mut rng = derive_stream(7, "corpus");
    let corpus = Corpus::generate(200, cfg.image.side, cfg.env.corpus_noise, &mut rng)
        .expect("corpus");
    let mean_v: f64 = corpus.labels.iter().map(|l| l[0]).sum::<f64>() / corpus.len() as f64;
    let mean_a: f64 = corpus.labels.iter().map(|l| l[1]).sum::<f64>() / corpus.len() as f64;
    println!(
        "training corpus: {} images, mean label ({:.2}, {:.2}) on the 1..9 affect square",
        corpus.len(),
        mean_v,
        mean_a
    );
    println!("\nfirst corpus sample, label ({:.2}, {:.2}):", corpus.labels[0][0], corpus.labels[0][1]);
    print!("{}", ascii(&corpus.images[0]));
}
