//! Runs an untrained gesture-sized network on synthetic input and reports
//! spikes, synaptic operations, energy and firing rate per layer.

use std::time::Duration;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use snn_hdc::events::{bin_to_frames, downsample};
use snn_hdc::harness::{synthetic_stream, SyntheticConfig};
use snn_hdc::snn::{
    dvs_gesture, estimate_energy, fan_out, firing_rate, forward, Mode, ModelVariant, Network,
};

fn main() -> snn_hdc::Result<()> {
    let arch = dvs_gesture(ModelVariant::Hdc, 256);
    let net = Network::new(&arch, 0.9, 0)?;
    let cfg = SyntheticConfig {
        width: 64,
        height: 64,
        edge_probability: 1.0,
        noise_hz: 50.0,
        duration_ms: 200,
        ..Default::default()
    };
    let stream = synthetic_stream(&cfg, 1, &mut ChaCha8Rng::seed_from_u64(0))?;
    let frames = downsample(
        &bin_to_frames(
            &stream,
            Duration::from_millis(1),
            Duration::from_millis(200),
        )?,
        (32, 32),
    )?;
    let trace = forward(&net, &frames, Mode::Eval)?;
    let energy = estimate_energy(&trace.sops);
    let rate = firing_rate(&trace, &net, 0.2)?;
    println!("{}\ninput events {}", arch, trace.input_events());
    for (l, pop) in net.populations().iter().enumerate() {
        let fo = fan_out(&net, l)?;
        println!(
            "layer {l}: {:>9} neurons {:>7} spikes {:>9} SOPs {:>9.3e} J {:>7.2} Hz  max fan-out into it {}",
            pop.shape.to_string(),
            trace.layers[l].total(),
            trace.sops[l],
            energy.per_layer_j[l],
            rate.per_layer_hz[l],
            fo.iter().max().unwrap()
        );
    }
    println!(
        "total {} SOPs, {:.3e} J, {:.2} Hz overall",
        energy.total_sops, energy.total_j, rate.overall_hz
    );
    Ok(())
}
