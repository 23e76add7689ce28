//! Trains an hdc model on two of three synthetic classes and sweeps the
//! rejection threshold over the full test split.

use snn_hdc::harness::{run_unknown_experiment, ExperimentConfig};

fn main() -> snn_hdc::Result<()> {
    let cfg = ExperimentConfig {
        known_classes: Some(vec![0, 1]),
        deltas: vec![0.01, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45],
        ..Default::default()
    };
    let (rows, _) = run_unknown_experiment(&cfg, 0)?;
    println!(
        "{:>6} {:>8} {:>8} {:>8}",
        "delta", "all", "known", "unknown"
    );
    for r in rows {
        println!(
            "{:>6.2} {:>7.1}% {:>7.1}% {:>7.1}%",
            r.delta,
            100.0 * r.full_accuracy,
            100.0 * r.known_accuracy,
            100.0 * r.unknown_accuracy
        );
    }
    Ok(())
}
