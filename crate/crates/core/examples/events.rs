//! Writes a synthetic recording as an EVS1 file, reads it back, bins it into
//! 1 ms frames and block-downsamples the frames.

use std::time::Duration;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use snn_hdc::events::{bin_to_frames, downsample, load_events, write_events};
use snn_hdc::harness::{synthetic_stream, SyntheticConfig};

fn main() -> snn_hdc::Result<()> {
    let cfg = SyntheticConfig {
        width: 32,
        height: 32,
        ..Default::default()
    };
    let stream = synthetic_stream(&cfg, 0, &mut ChaCha8Rng::seed_from_u64(3))?;
    let path = std::env::temp_dir().join("snn_hdc_example.evs");
    write_events(&path, &stream)?;
    let back = load_events(&path)?;
    assert_eq!(back, stream);
    println!(
        "{} events on a {}x{} sensor, {} bytes on disk",
        back.len(),
        back.width(),
        back.height(),
        std::fs::metadata(&path)?.len()
    );

    let frames = bin_to_frames(&back, Duration::from_millis(1), Duration::from_millis(100))?;
    let small = downsample(&frames, (16, 16))?;
    println!(
        "{} frames of 2x{}x{} -> 2x{}x{}, {} events kept",
        frames.steps(),
        frames.height(),
        frames.width(),
        small.height(),
        small.width(),
        small.total()
    );
    let per_step: Vec<u64> = (0..frames.steps())
        .step_by(10)
        .map(|t| frames.frame(t).iter().map(|&c| c as u64).sum())
        .collect();
    println!("events in every 10th frame: {per_step:?}");
    std::fs::remove_file(path)?;
    Ok(())
}
