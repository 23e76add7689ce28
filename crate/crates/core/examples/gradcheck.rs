//! Compares surrogate-gradient BPTT against central differences on a small
//! convolutional network for each loss, across finite-difference steps.

use std::time::Duration;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use snn_hdc::events::FrameSequence;
use snn_hdc::hdc::ClassCodebook;
use snn_hdc::snn::{Architecture, Network, Padding, Shape};
use snn_hdc::train::{gradient_step_sweep, Objective, RateTarget, Sample};

fn main() -> snn_hdc::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let counts = (0..15 * 2 * 6 * 6).map(|_| rng.gen_range(0..2)).collect();
    let sample = Sample {
        frames: FrameSequence::from_counts(15, 6, 6, Duration::from_millis(1), counts)?,
        label: 2,
        group: None,
    };
    let cb = ClassCodebook::generate(3, 12, 0)?;
    let steps = [1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2];
    println!(
        "{:>8} {}",
        "loss",
        steps.map(|h| format!("{h:>9.0e}")).join("")
    );
    for (name, head, obj) in [
        ("rate", 3, Objective::Rate(RateTarget::default())),
        ("latency", 3, Objective::Latency),
        ("hdc", 12, Objective::Hdc(&cb)),
    ] {
        let arch = Architecture::parse(
            &format!("3c3-bn-2p-0.2d-{head}"),
            Shape::new(2, 6, 6),
            Padding::Valid,
        )?;
        let net = Network::new(&arch, 0.85, 1)?;
        let sweep = gradient_step_sweep(&net, &obj, &sample, &steps)?;
        println!(
            "{name:>8} {}",
            sweep
                .iter()
                .map(|(_, e)| format!("{e:>9.1e}"))
                .collect::<String>()
        );
    }
    Ok(())
}
