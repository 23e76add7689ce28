use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::Objective;
use super::optim::{clip_global_norm, Adam, AdamConfig};
use crate::decoders::{decode, Prediction};
use crate::error::{Error, Result};
use crate::events::FrameSequence;
use crate::snn::engine::{backward, run_batch, Mode, RunOptions};
use crate::snn::{Network, Signal, SpikeMode, SpikeTrain};

/// One labeled training or test example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub frames: FrameSequence,
    pub label: usize,
    /// Signer or other grouping id used for leave-groups-out splits.
    pub group: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub surrogate_slope: f64,
    pub spike_mode: SpikeMode,
    pub optimizer: AdamConfig,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 50,
            seed: 0,
            surrogate_slope: 2.0,
            spike_mode: SpikeMode::Hard,
            optimizer: AdamConfig::default(),
            clip_norm: Some(10.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.surrogate_slope > 0.0 && self.surrogate_slope.is_finite()) {
            return Err(Error::Config(format!(
                "surrogate_slope must be > 0, got {}",
                self.surrogate_slope
            )));
        }
        if !(self.optimizer.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if matches!(self.clip_norm, Some(c) if !(c > 0.0)) {
            return Err(Error::Config("clip_norm must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.train_loss).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,train_acc,test_acc,wall_time_s\n");
        for r in &self.records {
            let test = r.test_accuracy.map_or(String::new(), |a| format!("{a:.6}"));
            writeln!(
                s,
                "{},{:.9},{:.6},{},{:.3}",
                r.epoch, r.train_loss, r.train_accuracy, test, r.wall_time_s
            )
            .unwrap();
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Loss, correct predictions and flat parameter gradient of one mini-batch.
pub(crate) struct BatchGradient {
    pub loss: f64,
    pub correct: usize,
    pub grads: Vec<f64>,
    pub running: Vec<(Vec<f64>, Vec<f64>)>,
}

fn frame_dt(samples: &[&Sample]) -> Duration {
    samples[0].frames.dt()
}

pub(crate) fn batch_gradient(
    net: &Network,
    batch: &[&Sample],
    objective: &Objective,
    mode: Mode,
    spike: SpikeMode,
    dropout_seed: u64,
) -> Result<BatchGradient> {
    let frames: Vec<&FrameSequence> = batch.iter().map(|s| &s.frames).collect();
    let run = run_batch(
        net,
        &frames,
        &RunOptions {
            mode,
            spike,
            tape: true,
            trace: false,
            dropout_seed,
        },
    )?;
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut correct = 0;
    let mut grad_out: Vec<Signal> = Vec::with_capacity(batch.len());
    let dt = frame_dt(batch);
    for (out, sample) in run.outputs.iter().zip(batch) {
        let (l, mut g) = objective.loss(out, sample.label)?;
        loss += l * scale;
        for t in 0..g.steps() {
            for i in 0..g.neurons() {
                g.set(t, i, g.get(t, i) * scale);
            }
        }
        grad_out.push(g);
        let spikes = SpikeTrain::from_signal(out, 0.5);
        let d = decode(objective.kind(), &spikes, objective.codebook(), None, dt)?;
        if d.prediction == Prediction::Class(sample.label) {
            correct += 1;
        }
    }
    let tape = run.tape.expect("tape requested");
    let grads = backward(net, &tape, &grad_out)?.concat();
    Ok(BatchGradient {
        loss,
        correct,
        grads,
        running: run.running,
    })
}

/// Fraction of `samples` the eval-mode network classifies correctly with
/// the objective's decoder.
pub fn evaluate_accuracy(net: &Network, samples: &[Sample], objective: &Objective) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Validation("no samples to evaluate".into()));
    }
    let mut correct = 0;
    for chunk in samples.chunks(32) {
        let frames: Vec<&FrameSequence> = chunk.iter().map(|s| &s.frames).collect();
        let run = run_batch(
            net,
            &frames,
            &RunOptions {
                mode: Mode::Eval,
                spike: SpikeMode::Hard,
                tape: false,
                trace: true,
                dropout_seed: 0,
            },
        )?;
        for (trace, s) in run.traces.iter().zip(chunk) {
            let d = decode(
                objective.kind(),
                trace.output(),
                objective.codebook(),
                None,
                s.frames.dt(),
            )?;
            if d.prediction == Prediction::Class(s.label) {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

/// Mini-batch surrogate-gradient BPTT with Adam. The network is updated in
/// place; `(seed, data, cfg)` fully determine the weight trajectory.
pub fn bptt_train(
    net: &mut Network,
    data: &[Sample],
    test: Option<&[Sample]>,
    cfg: &TrainConfig,
    objective: &Objective,
) -> Result<TrainHistory> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Validation("no training data".into()));
    }
    net.set_surrogate_slope(cfg.surrogate_slope)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(cfg.optimizer, net.trainable_len());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = TrainHistory::default();
    let start = Instant::now();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = idx.iter().map(|&i| &data[i]).collect();
            let mut step = batch_gradient(
                net,
                &batch,
                objective,
                Mode::Train,
                cfg.spike_mode,
                rng.gen(),
            )?;
            if !step.loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    reason: format!("loss is {}", step.loss),
                });
            }
            if step.grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Training {
                    epoch,
                    reason: "non-finite gradient".into(),
                });
            }
            if let Some(max) = cfg.clip_norm {
                clip_global_norm(&mut step.grads, max);
            }
            let mut params = net.flat_parameters();
            adam.step(&mut params, &step.grads);
            net.set_flat_parameters(&params)?;
            for ((mean, var), (new_mean, new_var)) in
                net.batchnorm_running_mut().into_iter().zip(step.running)
            {
                *mean = new_mean;
                *var = new_var;
            }
            loss_sum += step.loss * batch.len() as f64;
            correct += step.correct;
        }
        let test_accuracy = match test {
            Some(t) if !t.is_empty() => Some(evaluate_accuracy(net, t, objective)?),
            _ => None,
        };
        history.records.push(EpochRecord {
            epoch,
            train_loss: loss_sum / data.len() as f64,
            train_accuracy: correct as f64 / data.len() as f64,
            test_accuracy,
            wall_time_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(history)
}
