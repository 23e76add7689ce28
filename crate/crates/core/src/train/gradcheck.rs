//! Finite-difference verification of the BPTT gradients.
//!
//! The check runs the network in soft mode, where the forward spike is the
//! surrogate's smooth primitive, so the loss is differentiable everywhere and
//! central differences are meaningful. Batchnorm uses batch statistics and
//! dropout a fixed mask, so every trainable stage is exercised.

use serde::Serialize;

use super::bptt::{batch_gradient, Sample};
use super::loss::Objective;
use crate::error::{Error, Result};
use crate::events::FrameSequence;
use crate::snn::engine::{run_batch, Mode, RunOptions};
use crate::snn::{Network, SpikeMode};

/// Largest network the check accepts.
pub const MAX_GRADCHECK_PARAMETERS: usize = 500;
/// Default central-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;
/// Magnitude below which errors are measured absolutely rather than relatively.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

const DROPOUT_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub worst_index: usize,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

fn soft_loss(net: &Network, sample: &Sample, objective: &Objective) -> Result<f64> {
    let frames: [&FrameSequence; 1] = [&sample.frames];
    let run = run_batch(
        net,
        &frames,
        &RunOptions {
            mode: Mode::Train,
            spike: SpikeMode::Soft,
            tape: false,
            trace: false,
            dropout_seed: DROPOUT_SEED,
        },
    )?;
    Ok(objective.loss(&run.outputs[0], sample.label)?.0)
}

/// Analytic soft-mode gradient of `objective` on one sample.
pub fn soft_gradient(net: &Network, objective: &Objective, sample: &Sample) -> Result<Vec<f64>> {
    Ok(batch_gradient(
        net,
        &[sample],
        objective,
        Mode::Train,
        SpikeMode::Soft,
        DROPOUT_SEED,
    )?
    .grads)
}

/// Central-difference gradient with step `h`.
pub fn numeric_gradient(
    net: &Network,
    objective: &Objective,
    sample: &Sample,
    h: f64,
) -> Result<Vec<f64>> {
    let base = net.flat_parameters();
    let mut probe = net.clone();
    let mut out = Vec::with_capacity(base.len());
    let mut params = base.clone();
    for i in 0..base.len() {
        params[i] = base[i] + h;
        probe.set_flat_parameters(&params)?;
        let up = soft_loss(&probe, sample, objective)?;
        params[i] = base[i] - h;
        probe.set_flat_parameters(&params)?;
        let down = soft_loss(&probe, sample, objective)?;
        params[i] = base[i];
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// Compares BPTT and finite-difference gradients for every trainable scalar.
pub fn soft_gradient_check(
    net: &Network,
    objective: &Objective,
    sample: &Sample,
    h: f64,
) -> Result<GradientCheck> {
    if net.trainable_len() >= MAX_GRADCHECK_PARAMETERS {
        return Err(Error::Validation(format!(
            "gradient check needs fewer than {MAX_GRADCHECK_PARAMETERS} parameters, network has {}",
            net.trainable_len()
        )));
    }
    if !(h > 0.0) {
        return Err(Error::Validation(format!("step must be > 0, got {h}")));
    }
    let analytic = soft_gradient(net, objective, sample)?;
    let numeric = numeric_gradient(net, objective, sample, h)?;
    let (worst_index, max_relative_error) = analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .enumerate()
        .fold(
            (0, 0.0),
            |best, (i, e)| if e > best.1 { (i, e) } else { best },
        );
    Ok(GradientCheck {
        max_relative_error,
        worst_index,
        analytic,
        numeric,
    })
}

/// Maximum relative error for each finite-difference step in `steps`.
pub fn gradient_step_sweep(
    net: &Network,
    objective: &Objective,
    sample: &Sample,
    steps: &[f64],
) -> Result<Vec<(f64, f64)>> {
    steps
        .iter()
        .map(|&h| {
            Ok((
                h,
                soft_gradient_check(net, objective, sample, h)?.max_relative_error,
            ))
        })
        .collect()
}
