#![allow(dead_code)]

use std::time::Duration;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use snn_hdc::events::FrameSequence;
use snn_hdc::snn::{Architecture, LayerSpec, Network, Padding, RunTrace, Shape, SpikeTrain};
use snn_hdc::train::Sample;

pub fn random_frames(rng: &mut impl Rng, steps: usize, side: usize, density: f64) -> FrameSequence {
    let counts = (0..steps * 2 * side * side)
        .map(|_| {
            if rng.gen_bool(density) {
                rng.gen_range(1..3)
            } else {
                0
            }
        })
        .collect();
    FrameSequence::from_counts(steps, side, side, Duration::from_millis(1), counts).unwrap()
}

pub fn random_sample(seed: u64, steps: usize, side: usize, label: usize) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Sample {
        frames: random_frames(&mut rng, steps, side, 0.3),
        label,
        group: None,
    }
}

pub fn toy(notation: &str, side: usize, seed: u64) -> Network {
    let arch = Architecture::parse(notation, Shape::new(2, side, side), Padding::Valid).unwrap();
    Network::new(&arch, 0.8, seed).unwrap()
}

/// A random net with 1 to 4 LIF populations on 2×side×side input, with
/// roughly a third of its weights zeroed.
pub fn random_net(rng: &mut ChaCha8Rng) -> Network {
    loop {
        let side = rng.gen_range(5..=9);
        let padding = if rng.gen_bool(0.5) {
            Padding::Same
        } else {
            Padding::Valid
        };
        let convs = rng.gen_range(1..=2);
        let dense = rng.gen_range(1..=(4 - convs).min(2));
        let mut tokens = Vec::new();
        for _ in 0..convs {
            tokens.push(format!(
                "{}c{}s{}",
                rng.gen_range(1..=3),
                rng.gen_range(1..=3),
                rng.gen_range(1..=2)
            ));
            if rng.gen_bool(0.3) {
                tokens.push("bn".into());
            }
            if rng.gen_bool(0.5) {
                tokens.push("2p".into());
            }
            if rng.gen_bool(0.3) {
                tokens.push("0.2d".into());
            }
        }
        for _ in 0..dense {
            tokens.push(rng.gen_range(2..=6).to_string());
        }
        let Ok(arch) = Architecture::parse(&tokens.join("-"), Shape::new(2, side, side), padding)
        else {
            continue;
        };
        let mut net = Network::new(&arch, 0.9, rng.gen()).unwrap();
        let mut p = net.flat_parameters();
        for w in &mut p {
            if rng.gen_bool(0.35) {
                *w = 0.0;
            }
        }
        net.set_flat_parameters(&p).unwrap();
        return net;
    }
}

/// Random input events and random spikes in every population.
pub fn random_trace(net: &Network, steps: usize, rng: &mut ChaCha8Rng) -> RunTrace {
    let cells = net.input_shape().len();
    let input = (0..steps)
        .map(|_| {
            (0..cells as u32)
                .filter(|_| rng.gen_bool(0.2))
                .collect::<Vec<_>>()
                .into_iter()
                .map(|i| (i, rng.gen_range(1..4)))
                .collect()
        })
        .collect();
    let layers = net
        .populations()
        .iter()
        .map(|p| {
            let n = p.shape.len();
            let mut ev = Vec::new();
            for t in 0..steps {
                for i in 0..n {
                    if rng.gen_bool(0.25) {
                        ev.push((t, i));
                    }
                }
            }
            SpikeTrain::from_events(n, steps, &ev).unwrap()
        })
        .collect();
    RunTrace {
        input,
        layers,
        sops: Vec::new(),
    }
}

fn out_len(len: usize, k: usize, s: usize, padding: Padding) -> (usize, i64) {
    match padding {
        Padding::Valid => ((len - k) / s + 1, 0),
        Padding::Same => {
            let out = len.div_ceil(s);
            let need = ((out - 1) * s + k) as i64 - len as i64;
            (out, need.max(0) / 2)
        }
    }
}

/// Brute-force SOP count: walks every (target, source) synapse in the
/// forward direction, reading weights straight from the flat parameter
/// vector, and charges the source's spike count whenever the weight is
/// nonzero.
pub fn brute_force_sops(net: &Network, trace: &RunTrace) -> Vec<u64> {
    let arch = net.architecture();
    let params = net.flat_parameters();
    let mut offset = 0;
    // spike counts per source unit of the next connective layer
    let mut source: Vec<u64> = vec![0; arch.input().len()];
    for step in &trace.input {
        for &(i, c) in step {
            source[i as usize] += c as u64;
        }
    }
    let mut shape = arch.input();
    let mut layer = 0;
    let mut sops = Vec::new();
    for spec in arch.layers() {
        match *spec {
            LayerSpec::Conv {
                out_channels,
                kernel,
                stride,
            } => {
                let (oh, pt) = out_len(shape.height, kernel, stride, arch.padding());
                let (ow, pl) = out_len(shape.width, kernel, stride, arch.padding());
                let w = &params[offset..offset + out_channels * shape.channels * kernel * kernel];
                let mut n = 0u64;
                for oc in 0..out_channels {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            for ic in 0..shape.channels {
                                for ky in 0..kernel {
                                    for kx in 0..kernel {
                                        let iy = (oy * stride + ky) as i64 - pt;
                                        let ix = (ox * stride + kx) as i64 - pl;
                                        if iy < 0
                                            || ix < 0
                                            || iy >= shape.height as i64
                                            || ix >= shape.width as i64
                                        {
                                            continue;
                                        }
                                        let wi = ((oc * shape.channels + ic) * kernel + ky)
                                            * kernel
                                            + kx;
                                        if w[wi] != 0.0 {
                                            let si = (ic * shape.height + iy as usize)
                                                * shape.width
                                                + ix as usize;
                                            n += source[si];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                offset += w.len() + out_channels;
                sops.push(n);
                shape = net.populations()[layer].shape;
                source = trace.layers[layer].counts();
                layer += 1;
            }
            LayerSpec::Dense { units } => {
                let inputs = shape.len();
                // weights are stored [in][out]
                let w = &params[offset..offset + inputs * units];
                let mut n = 0u64;
                for o in 0..units {
                    for i in 0..inputs {
                        if w[i * units + o] != 0.0 {
                            n += source[i];
                        }
                    }
                }
                offset += w.len() + units;
                sops.push(n);
                shape = net.populations()[layer].shape;
                source = trace.layers[layer].counts();
                layer += 1;
            }
            LayerSpec::BatchNorm => offset += 2 * shape.channels,
            _ => {}
        }
    }
    sops
}
