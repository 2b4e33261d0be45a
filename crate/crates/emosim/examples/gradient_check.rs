//! Verifies every analytic gradient in the crate against central finite
//! differences: the primitive layers, the recurrent cell, and the full
//! actor and critic networks.
//!
//!     cargo run --example gradient_check

use emosim::config::Config;
use emosim::ddpg;
use emosim::nn::{fd_check_random_layer, LayerSpec};
use emosim::rng::derive_stream;

fn main() {
    let mut rng = derive_stream(42, "gradient-check");

    let specs = [
        ("dense 5 -> 3", LayerSpec::Dense { input: 5, output: 3 }),
        ("conv 2 -> 3, 3x3", LayerSpec::Conv2d { in_ch: 2, out_ch: 3, kh: 3, kw: 3 }),
        ("batchnorm over 4", LayerSpec::BatchNorm { features: 4 }),
        ("sigmoid", LayerSpec::Sigmoid),
        ("tanh", LayerSpec::Tanh),
        ("relu", LayerSpec::Relu),
    ];
    println!("{:<22} {:>12}  worst block", "layer", "max rel err");
    for (name, spec) in specs {
        let report = fd_check_random_layer(&spec, &mut rng);
        println!(
            "{:<22} {:>12.3e}  {}",
            name,
            report.max_rel_err,
            report.worst_block
        );
        assert!(report.passes(1e-4), "{name} failed: {report:?}");
    }

    let mut cfg = Config::default();
    cfg.ddpg.state_side = 2;
    cfg.ddpg.actor_hidden = vec![12, 8];
    cfg.ddpg.critic_hidden = vec![10];
    let (actor, critic) = ddpg::gradient_check(&cfg, &mut rng).expect("network check");
    println!("{:<22} {:>12.3e}  {}", "actor network", actor.max_rel_err, actor.worst_block);
    println!("{:<22} {:>12.3e}  {}", "critic network", critic.max_rel_err, critic.worst_block);
    assert!(actor.passes(1e-4) && critic.passes(1e-4));

    println!("\nall gradients agree with finite differences to 1e-4");
}
