//! Trains rate, latency and hdc models on the built-in synthetic gestures and
//! prints the comparison table. Pass an epoch count to shorten the run.

use snn_hdc::harness::{report_text, run_experiment, ExperimentConfig};

fn main() -> snn_hdc::Result<()> {
    let mut cfg = ExperimentConfig::default();
    if let Some(e) = std::env::args().nth(1) {
        cfg.train.epochs = e.parse().expect("epoch count");
    }
    let out = run_experiment(&cfg)?;
    print!("{}", report_text(&out.report));
    for m in &out.models {
        let h = &m.history;
        println!(
            "{}: loss {:.4} -> {:.4} over {} epochs",
            m.decoder,
            h.records[0].train_loss,
            h.last().unwrap().train_loss,
            h.records.len()
        );
    }
    Ok(())
}
