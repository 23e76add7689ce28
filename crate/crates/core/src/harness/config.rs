use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::synthetic::{synthetic_dataset, SyntheticConfig};
use crate::decoders::{DecoderKind, UnknownPolicy};
use crate::error::{Error, Result};
use crate::events::{bin_to_frames, downsample, load_events, EventStream};
use crate::snn::{Architecture, Padding, Shape};
use crate::train::{Sample, TrainConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Where samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SyntheticConfig),
    /// A CSV manifest of EVS1 files with at least `path` and `label`
    /// columns, optionally `signer` and `split` (`train`/`test`). Relative
    /// paths resolve against the manifest's directory.
    Evs1 {
        manifest: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    pub data: DataSource,
    /// Network body in bracket notation; the output layer is appended per
    /// decoder (`dims` units for hdc, one per class otherwise).
    pub architecture: String,
    pub padding: Padding,
    /// Downsample frames to `[height, width]` before the network.
    pub input_size: Option<[usize; 2]>,
    pub decoders: Vec<DecoderKind>,
    pub beta: f64,
    pub dims: usize,
    pub codebook_seed: u64,
    /// Unknown-class threshold applied when evaluating the hdc decoder.
    pub delta: Option<f64>,
    /// Thresholds visited by the unknown-class sweep.
    pub deltas: Vec<f64>,
    /// Classes the unknown-class model is trained on; defaults to all but the last.
    pub known_classes: Option<Vec<usize>>,
    pub seeds: Vec<u64>,
    pub clip_ms: u64,
    pub dt_ms: u64,
    /// Without split tags, every `test_every`-th sample of a class is held out.
    pub test_every: usize,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    /// The desk-scale synthetic setup.
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            name: "synthetic".into(),
            data: DataSource::Synthetic(SyntheticConfig::default()),
            architecture: "8c5-2p-0.1d".into(),
            padding: Padding::Valid,
            input_size: None,
            decoders: vec![DecoderKind::Rate, DecoderKind::Latency, DecoderKind::Hdc],
            beta: 0.9,
            dims: 64,
            codebook_seed: 7,
            delta: None,
            deltas: vec![0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4],
            known_classes: None,
            seeds: vec![0],
            clip_ms: 100,
            dt_ms: 1,
            test_every: 4,
            train: TrainConfig {
                batch_size: 8,
                epochs: 50,
                optimizer: crate::train::AdamConfig {
                    learning_rate: 3e-3,
                    ..Default::default()
                },
                ..Default::default()
            },
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_json(&fs::read_to_string(path)?)?;
        if let DataSource::Evs1 { manifest } = &mut cfg.data {
            if manifest.is_relative() {
                if let Some(dir) = path.parent() {
                    *manifest = dir.join(&*manifest);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn dt(&self) -> Duration {
        Duration::from_millis(self.dt_ms)
    }

    pub fn clip(&self) -> Duration {
        Duration::from_millis(self.clip_ms)
    }

    /// Checks everything that can be checked without loading samples.
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return cfg_err(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.decoders.is_empty() {
            return cfg_err("at least one decoder is required".into());
        }
        if self.decoders.contains(&DecoderKind::Hdc) && self.dims == 0 {
            return cfg_err("the hdc decoder needs dims >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return cfg_err(format!("beta must be in [0, 1], got {}", self.beta));
        }
        if let Some(d) = self.delta {
            UnknownPolicy::new(d).map_err(|e| Error::Config(e.to_string()))?;
        }
        for &d in &self.deltas {
            UnknownPolicy::new(d).map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.seeds.is_empty() {
            return cfg_err("at least one seed is required".into());
        }
        if self.dt_ms == 0 || self.clip_ms == 0 {
            return cfg_err("clip_ms and dt_ms must be positive".into());
        }
        if self.test_every < 2 {
            return cfg_err("test_every must be at least 2".into());
        }
        if let DataSource::Synthetic(s) = &self.data {
            s.validate()?;
            if let Some(known) = &self.known_classes {
                if known.iter().any(|&k| k >= s.classes) {
                    return cfg_err(
                        "known_classes refers to a class the data does not have".into(),
                    );
                }
            }
        }
        self.train.validate()?;
        // grammar and layer order; shapes are checked once the input size is known
        Architecture::parse(
            &format!("{}-2", self.architecture),
            Shape::new(2, 1024, 1024),
            self.padding,
        )
        .map_err(|e| Error::Config(format!("architecture {:?}: {e}", self.architecture)))?;
        Ok(())
    }

    /// Output units for `decoder` given the number of classes.
    pub fn head_units(&self, decoder: DecoderKind, classes: usize) -> usize {
        match decoder {
            DecoderKind::Hdc => self.dims,
            _ => classes,
        }
    }

    pub fn architecture_for(
        &self,
        decoder: DecoderKind,
        classes: usize,
        input: Shape,
    ) -> Result<Architecture> {
        let notation = format!(
            "{}-{}",
            self.architecture,
            self.head_units(decoder, classes)
        );
        Architecture::parse(&notation, input, self.padding)
            .map_err(|e| Error::Config(format!("architecture {notation:?} on {input}: {e}")))
    }

    /// Known classes for the unknown-class experiment.
    pub fn known_classes_or_default(&self, classes: usize) -> Vec<usize> {
        self.known_classes
            .clone()
            .unwrap_or_else(|| (0..classes.saturating_sub(1)).collect())
    }
}

/// Samples split into train and test, already binned.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub classes: usize,
    pub input: Shape,
}

#[derive(Debug, Deserialize)]
struct ManifestRow {
    #[serde(alias = "output_path", alias = "file")]
    path: PathBuf,
    label: u32,
    #[serde(default, alias = "signer_id")]
    signer: Option<u32>,
    #[serde(default, alias = "split_tag")]
    split: Option<String>,
}

/// A loaded recording with its label, signer and whether it is tagged `test`.
type ManifestEntry = (EventStream, usize, Option<u32>, Option<bool>);

fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for row in reader.deserialize::<ManifestRow>() {
        let row = row.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let file = if row.path.is_relative() {
            dir.join(&row.path)
        } else {
            row.path
        };
        let stream = load_events(&file)?;
        let is_test = match row.split.as_deref() {
            None | Some("") => None,
            Some("test") => Some(true),
            Some("train") => Some(false),
            Some(other) => return Err(Error::Config(format!("unknown split tag {other:?}"))),
        };
        out.push((stream, row.label as usize, row.signer, is_test));
    }
    if out.is_empty() {
        return Err(Error::Config(format!(
            "{} lists no samples",
            path.display()
        )));
    }
    Ok(out)
}

/// Loads, bins, optionally downsamples and splits the configured data.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    cfg.validate()?;
    let rows: Vec<(EventStream, usize, Option<u32>, Option<bool>)> = match &cfg.data {
        DataSource::Synthetic(s) => synthetic_dataset(s)?
            .into_iter()
            .map(|x| (x.stream, x.label, Some(x.group), None))
            .collect(),
        DataSource::Evs1 { manifest } => read_manifest(manifest)?,
    };
    let classes = rows.iter().map(|r| r.1).max().unwrap_or(0) + 1;
    if classes < 2 {
        return Err(Error::Config("data needs at least two classes".into()));
    }
    let mut seen = vec![0usize; classes];
    let mut data = Dataset {
        train: Vec::new(),
        test: Vec::new(),
        classes,
        input: Shape::new(2, 0, 0),
    };
    for (stream, label, group, is_test) in rows {
        let mut frames = bin_to_frames(&stream, cfg.dt(), cfg.clip())?;
        if let Some([h, w]) = cfg.input_size {
            if (h, w) != (frames.height(), frames.width()) {
                frames = downsample(&frames, (h, w))?;
            }
        }
        let shape = Shape::new(2, frames.height(), frames.width());
        if data.input.is_empty() {
            data.input = shape;
        } else if data.input != shape {
            return Err(Error::Config(format!(
                "samples have mixed sizes {} and {shape}",
                data.input
            )));
        }
        let is_test = is_test.unwrap_or_else(|| seen[label] % cfg.test_every == cfg.test_every - 1);
        seen[label] += 1;
        let sample = Sample {
            frames,
            label,
            group,
        };
        if is_test {
            data.test.push(sample);
        } else {
            data.train.push(sample);
        }
    }
    if data.train.is_empty() || data.test.is_empty() {
        return Err(Error::Config(
            "both the train and the test split need samples".into(),
        ));
    }
    for d in &cfg.decoders {
        cfg.architecture_for(*d, classes, data.input)?;
    }
    if let Some(known) = &cfg.known_classes {
        if known.iter().any(|&k| k >= classes) {
            return Err(Error::Config(
                "known_classes refers to a class the data does not have".into(),
            ));
        }
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_json() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn inconsistencies_are_config_errors() {
        let bad = [
            ExperimentConfig {
                schema_version: 2,
                ..Default::default()
            },
            ExperimentConfig {
                dims: 0,
                ..Default::default()
            },
            ExperimentConfig {
                architecture: "8x5".into(),
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        }
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }
}
