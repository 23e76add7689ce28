//! The three output decoders on hand-made spike trains, including their
//! decision latencies and hdc rejection of an unfamiliar pattern.

use std::time::Duration;

use snn_hdc::decoders::{hdc_decode, latency_decode, rate_decode, softmax_max, UnknownPolicy};
use snn_hdc::hdc::{BinaryHypervector, ClassCodebook};
use snn_hdc::snn::SpikeTrain;

fn main() -> snn_hdc::Result<()> {
    let dt = Duration::from_millis(1);
    for c in 5..9 {
        let mut counts = vec![0; 11];
        counts[0] = c;
        println!(
            "softmax confidence with {c} spikes vs 10 silent neurons: {:.4}",
            softmax_max(&counts)
        );
    }

    // neuron 2 starts late but fires every step; neuron 0 fires first
    let mut ev = vec![(1, 0), (4, 0)];
    ev.extend((3..20).map(|t| (t, 2)));
    let train = SpikeTrain::from_events(11, 20, &ev)?;
    let r = rate_decode(&train, dt)?;
    let l = latency_decode(&train, dt)?;
    println!(
        "rate    -> class {} after {:?}",
        r.prediction,
        r.latency.unwrap()
    );
    println!(
        "latency -> class {} after {:?}",
        l.prediction,
        l.latency.unwrap()
    );

    let cb = ClassCodebook::from_vectors(
        vec![
            BinaryHypervector::from_bit_str("11110000")?,
            BinaryHypervector::from_bit_str("00001111")?,
        ],
        0,
    )?;
    let policy = UnknownPolicy::new(0.2)?;
    for (name, ev) in [
        ("close to class 1", vec![(2, 4), (3, 5), (5, 6), (9, 7)]),
        ("mixed", vec![(2, 0), (3, 1), (5, 6), (9, 7)]),
    ] {
        let t = SpikeTrain::from_events(8, 12, &ev)?;
        let d = hdc_decode(&t, &cb, Some(policy), dt)?;
        println!(
            "hdc {name:<17} H = {}  distances {:?} -> {} (settled after {:?})",
            d.hypervector.as_ref().unwrap(),
            d.distances.as_ref().unwrap(),
            d.prediction,
            d.latency.unwrap()
        );
    }
    Ok(())
}
