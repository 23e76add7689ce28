use serde::Serialize;

use super::network::{Network, Stage};
use super::trace::RunTrace;
use crate::error::{shape_err, Error, Result};
use crate::ENERGY_PER_SOP_J;

/// Nonzero synapses leaving each input unit of connective stage `stage`.
pub(crate) fn stage_fan_out(net: &Network, stage: usize) -> Vec<u64> {
    match &net.stages[stage] {
        Stage::Conv(conv) => {
            let shape = conv.geom.input;
            (0..shape.len())
                .map(|idx| {
                    let (ic, y, x) = (
                        idx / shape.spatial(),
                        (idx / shape.width) % shape.height,
                        idx % shape.width,
                    );
                    let mut n = 0;
                    conv.for_each_synapse(ic, y, x, |_, w| {
                        if conv.weight[w] != 0.0 {
                            n += 1;
                        }
                    });
                    n
                })
                .collect()
        }
        Stage::Dense(dense) => dense
            .weight
            .chunks(dense.outputs)
            .map(|row| row.iter().filter(|w| **w != 0.0).count() as u64)
            .collect(),
        _ => panic!("stage {stage} has no synapses"),
    }
}

/// Fan-out of every source unit feeding population `layer`: the input cells
/// for layer 0, otherwise the (post-pool) units of population `layer − 1`.
pub fn fan_out(net: &Network, layer: usize) -> Result<Vec<u64>> {
    let pops = net.populations();
    if layer >= pops.len() {
        return Err(shape_err(format!(
            "network has {} populations, asked for {layer}",
            pops.len()
        )));
    }
    let stage = if layer == 0 {
        0
    } else {
        pops[layer - 1]
            .target_stage
            .expect("every population but the last has a target")
    };
    Ok(stage_fan_out(net, stage))
}

fn check_trace(net: &Network, trace: &RunTrace) -> Result<()> {
    let pops = net.populations();
    if trace.layers.len() != pops.len() {
        return Err(shape_err(format!(
            "trace has {} layers, network has {} populations",
            trace.layers.len(),
            pops.len()
        )));
    }
    for (l, (train, pop)) in trace.layers.iter().zip(pops).enumerate() {
        if train.neurons() != pop.shape.len() {
            return Err(shape_err(format!(
                "layer {l} trace has {} neurons, population has {}",
                train.neurons(),
                pop.shape.len()
            )));
        }
    }
    let cells = net.input_shape().len() as u32;
    if trace.input.iter().flatten().any(|&(i, _)| i >= cells) {
        return Err(shape_err("input cell outside the network input"));
    }
    Ok(())
}

/// Synaptic operations attributed to each population (the receiving side).
/// Input events into layer 0 are weighted by their count.
pub fn count_sops(trace: &RunTrace, net: &Network) -> Result<Vec<u64>> {
    check_trace(net, trace)?;
    let layers = net.populations().len();
    let mut sops = Vec::with_capacity(layers);
    let first = fan_out(net, 0)?;
    sops.push(
        trace
            .input
            .iter()
            .flatten()
            .map(|&(i, c)| c as u64 * first[i as usize])
            .sum(),
    );
    for l in 1..layers {
        let fo = fan_out(net, l)?;
        sops.push(
            trace.layers[l - 1]
                .iter_steps()
                .flatten()
                .map(|&i| fo[i as usize])
                .sum(),
        );
    }
    Ok(sops)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyEstimate {
    pub per_layer_j: Vec<f64>,
    pub total_sops: u64,
    pub total_j: f64,
}

/// Energy at 26 pJ per synaptic operation.
pub fn estimate_energy(sops: &[u64]) -> EnergyEstimate {
    let total_sops = sops.iter().sum();
    EnergyEstimate {
        per_layer_j: sops.iter().map(|&s| s as f64 * ENERGY_PER_SOP_J).collect(),
        total_sops,
        total_j: total_sops as f64 * ENERGY_PER_SOP_J,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiringRate {
    pub per_layer_hz: Vec<f64>,
    pub overall_hz: f64,
}

/// Mean spikes per neuron per second.
pub fn firing_rate_from_totals(spikes: f64, neurons: usize, duration_s: f64) -> Result<f64> {
    if !(duration_s > 0.0) {
        return Err(Error::Validation(format!(
            "duration must be > 0, got {duration_s}"
        )));
    }
    if neurons == 0 {
        return Err(Error::Validation("no neurons".into()));
    }
    Ok(spikes / (neurons as f64 * duration_s))
}

pub fn firing_rate(trace: &RunTrace, net: &Network, duration_s: f64) -> Result<FiringRate> {
    check_trace(net, trace)?;
    let per_layer_hz = trace
        .layers
        .iter()
        .map(|l| firing_rate_from_totals(l.total() as f64, l.neurons(), duration_s))
        .collect::<Result<_>>()?;
    let overall_hz =
        firing_rate_from_totals(trace.total_spikes() as f64, net.count_neurons(), duration_s)?;
    Ok(FiringRate {
        per_layer_hz,
        overall_hz,
    })
}
