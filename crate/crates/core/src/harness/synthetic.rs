//! Built-in event dataset: moving bars and a blinking square over Poisson
//! background noise, so the whole pipeline runs without downloads.
//!
//! | class | pattern |
//! |---|---|
//! | 0 | vertical bar sweeping left to right |
//! | 1 | horizontal bar sweeping top to bottom |
//! | 2 | square blinking in place |
//! | 3 | vertical bar sweeping right to left |
//!
//! Moving edges emit ON events on their leading side and OFF events on their
//! trailing side; the square emits ON at each onset and OFF at each offset.

use std::fs;
use std::path::Path;
use std::time::Duration;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{bin_to_frames, write_events, Event, EventStream, Polarity};
use crate::train::Sample;

pub const SYNTHETIC_CLASSES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub samples_per_class: usize,
    pub height: u16,
    pub width: u16,
    /// Clip length in milliseconds (= timesteps at 1 ms frames).
    pub duration_ms: u64,
    /// Background events per pixel per polarity per second.
    pub noise_hz: f64,
    /// Probability that a pixel on an active edge emits in a given millisecond.
    pub edge_probability: f64,
    /// Number of pseudo-signer groups samples are dealt into.
    pub groups: u32,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            classes: 3,
            samples_per_class: 60,
            height: 16,
            width: 16,
            duration_ms: 100,
            noise_hz: 10.0,
            edge_probability: 0.6,
            groups: 6,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=SYNTHETIC_CLASSES).contains(&self.classes) {
            return Err(Error::Config(format!(
                "synthetic data supports 2..={SYNTHETIC_CLASSES} classes, got {}",
                self.classes
            )));
        }
        if self.height < 8 || self.width < 8 {
            return Err(Error::Config(
                "synthetic frames must be at least 8x8".into(),
            ));
        }
        if self.duration_ms < 10 {
            return Err(Error::Config(
                "synthetic clips must last at least 10 ms".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.edge_probability) || !(self.noise_hz >= 0.0) {
            return Err(Error::Config(
                "edge_probability must be in [0, 1] and noise_hz >= 0".into(),
            ));
        }
        if self.samples_per_class == 0 || self.groups == 0 {
            return Err(Error::Config(
                "samples_per_class and groups must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One generated recording.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub stream: EventStream,
    pub label: usize,
    pub group: u32,
}

struct Emitter<'a> {
    rng: &'a mut ChaCha8Rng,
    events: Vec<Event>,
    p: f64,
}

impl Emitter<'_> {
    fn emit(&mut self, ms: u64, x: i64, y: i64, w: u16, h: u16, polarity: Polarity) {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            return;
        }
        if self.rng.gen_bool(self.p) {
            let t = ms * 1000 + self.rng.gen_range(0..1000);
            self.events
                .push(Event::new(t, x as u16, y as u16, polarity));
        }
    }
}

fn sweep(
    em: &mut Emitter,
    cfg: &SyntheticConfig,
    ms: u64,
    vertical_bar: bool,
    reverse: bool,
    speed: f64,
    start: f64,
) {
    let (w, h) = (cfg.width, cfg.height);
    let extent = if vertical_bar { w } else { h } as f64;
    let span = if vertical_bar { h } else { w } as i64;
    let pos = |t: f64| -> i64 {
        let p = start + speed * t;
        if reverse {
            (extent - 1.0 - p).floor() as i64
        } else {
            p.floor() as i64
        }
    };
    let now = pos(ms as f64);
    let before = pos(ms as f64 - 1.0);
    if now == before {
        return;
    }
    // bar is 2 pixels wide: the cell entered turns on, the cell left behind turns off
    let step = if reverse { -1 } else { 1 };
    let leading = now;
    let trailing = now - 2 * step;
    for k in 0..span {
        let (xl, yl, xt, yt) = if vertical_bar {
            (leading, k, trailing, k)
        } else {
            (k, leading, k, trailing)
        };
        em.emit(ms, xl, yl, w, h, Polarity::On);
        em.emit(ms, xt, yt, w, h, Polarity::Off);
    }
}

/// Generates one recording of class `label`.
pub fn synthetic_stream(
    cfg: &SyntheticConfig,
    label: usize,
    rng: &mut ChaCha8Rng,
) -> Result<EventStream> {
    if label >= cfg.classes {
        return Err(Error::Validation(format!(
            "class {label} outside {} classes",
            cfg.classes
        )));
    }
    let (w, h) = (cfg.width, cfg.height);
    let dur = cfg.duration_ms;
    // per-sample variation
    let extent = if label == 1 { h } else { w } as f64;
    let travel = extent + 3.0;
    let speed = travel / (dur as f64 * rng.gen_range(0.6..1.0));
    let start = rng.gen_range(-2.0..0.0);
    let side = rng.gen_range(4..=6i64);
    let cx = rng.gen_range(1..(w as i64 - side - 1));
    let cy = rng.gen_range(1..(h as i64 - side - 1));
    let period = rng.gen_range(16..=24u64);
    let phase = rng.gen_range(0..period);

    let mut em = Emitter {
        rng,
        events: Vec::new(),
        p: cfg.edge_probability,
    };
    for ms in 0..dur {
        match label {
            0 => sweep(&mut em, cfg, ms, true, false, speed, start),
            1 => sweep(&mut em, cfg, ms, false, false, speed, start),
            3 => sweep(&mut em, cfg, ms, true, true, speed, start),
            2 => {
                let cycle = (ms + phase) % period;
                let polarity = if cycle == 0 {
                    Some(Polarity::On)
                } else if cycle == period / 2 {
                    Some(Polarity::Off)
                } else {
                    None
                };
                if let Some(pol) = polarity {
                    for y in cy..cy + side {
                        for x in cx..cx + side {
                            em.emit(ms, x, y, w, h, pol);
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    let noise_p = (cfg.noise_hz * 1e-3).min(1.0);
    em.p = noise_p;
    if noise_p > 0.0 {
        for ms in 0..dur {
            for y in 0..h as i64 {
                for x in 0..w as i64 {
                    em.emit(ms, x, y, w, h, Polarity::On);
                    em.emit(ms, x, y, w, h, Polarity::Off);
                }
            }
        }
    }
    EventStream::new(w, h, em.events, Some(label as u32))
}

/// The full dataset, classes interleaved (`0, 1, 2, 0, 1, 2, …`), groups
/// dealt round-robin per class.
pub fn synthetic_dataset(cfg: &SyntheticConfig) -> Result<Vec<SyntheticSample>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.classes * cfg.samples_per_class);
    for i in 0..cfg.samples_per_class {
        for label in 0..cfg.classes {
            out.push(SyntheticSample {
                stream: synthetic_stream(cfg, label, &mut rng)?,
                label,
                group: i as u32 % cfg.groups,
            });
        }
    }
    Ok(out)
}

/// Binned training samples at 1 ms frames.
pub fn synthetic_samples(cfg: &SyntheticConfig) -> Result<Vec<Sample>> {
    let dt = Duration::from_millis(1);
    let clip = Duration::from_millis(cfg.duration_ms);
    synthetic_dataset(cfg)?
        .into_iter()
        .map(|s| {
            Ok(Sample {
                frames: bin_to_frames(&s.stream, dt, clip)?,
                label: s.label,
                group: Some(s.group),
            })
        })
        .collect()
}

/// Writes every sample as an EVS1 file plus a `manifest.csv`
/// (`path,label,signer,split`) into `dir`. Every `test_every`-th sample of
/// each class is tagged `test`.
pub fn write_synthetic(cfg: &SyntheticConfig, dir: &Path, test_every: usize) -> Result<usize> {
    fs::create_dir_all(dir)?;
    let data = synthetic_dataset(cfg)?;
    let mut manifest = String::from("path,label,signer,split\n");
    for (i, s) in data.iter().enumerate() {
        let name = format!("sample_{i:05}_c{}.evs", s.label);
        write_events(dir.join(&name), &s.stream)?;
        let split = if test_every > 0 && (i / cfg.classes) % test_every == test_every - 1 {
            "test"
        } else {
            "train"
        };
        manifest.push_str(&format!("{name},{},{},{split}\n", s.label, s.group));
    }
    fs::write(dir.join("manifest.csv"), manifest)?;
    Ok(data.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_labeled() {
        let cfg = SyntheticConfig {
            samples_per_class: 2,
            ..Default::default()
        };
        let a = synthetic_dataset(&cfg).unwrap();
        let b = synthetic_dataset(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        assert_eq!(
            a.iter().map(|s| s.label).collect::<Vec<_>>(),
            vec![0, 1, 2, 0, 1, 2]
        );
        for s in &a {
            assert!(
                s.stream.len() > 100,
                "class {} has {} events",
                s.label,
                s.stream.len()
            );
            assert!(s.stream.events().iter().all(|e| e.t < 100_000));
        }
    }

    #[test]
    fn bars_move_in_their_direction() {
        let cfg = SyntheticConfig {
            classes: 4,
            noise_hz: 0.0,
            edge_probability: 1.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = synthetic_stream(&cfg, 0, &mut rng).unwrap();
        let on: Vec<_> = s
            .events()
            .iter()
            .filter(|e| e.polarity == Polarity::On)
            .collect();
        assert!(on.first().unwrap().x < on.last().unwrap().x);
        let s = synthetic_stream(&cfg, 3, &mut rng).unwrap();
        let on: Vec<_> = s
            .events()
            .iter()
            .filter(|e| e.polarity == Polarity::On)
            .collect();
        assert!(on.first().unwrap().x > on.last().unwrap().x);
    }
}
