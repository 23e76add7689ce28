//! LIF networks: architecture grammar, simulation, training backend and
//! spike/SOP instrumentation.

mod arch;
pub(crate) mod engine;
mod lif;
mod network;
mod sops;
mod trace;

pub use arch::{dvs_gesture, sl_animals, Architecture, LayerSpec, ModelVariant, Padding, Shape};
pub use engine::Mode;
pub use lif::{lif_step, ArctanSurrogate, LifParams, SpikeMode, RESET, THRESHOLD};
pub use network::{Network, Population};
pub use sops::{
    count_sops, estimate_energy, fan_out, firing_rate, firing_rate_from_totals, EnergyEstimate,
    FiringRate,
};
pub use trace::{RunTrace, Signal, SpikeTrain};

use crate::error::Result;
use crate::events::FrameSequence;
use engine::{run_batch, RunOptions};

/// Simulates one sample and returns its spike trace with SOP counts filled in.
///
/// In train mode dropout is sampled from the network seed and batchnorm uses
/// the statistics of this single sample; the network itself is never modified.
pub fn forward(net: &Network, input: &FrameSequence, mode: Mode) -> Result<RunTrace> {
    Ok(forward_batch(net, &[input], mode)?
        .pop()
        .expect("one trace per input"))
}

/// [`forward`] over several samples at once. Eval-mode results are identical
/// to running each sample alone.
pub fn forward_batch(
    net: &Network,
    inputs: &[&FrameSequence],
    mode: Mode,
) -> Result<Vec<RunTrace>> {
    let run = run_batch(
        net,
        inputs,
        &RunOptions {
            mode,
            spike: SpikeMode::Hard,
            tape: false,
            trace: true,
            dropout_seed: net.seed(),
        },
    )?;
    run.traces
        .into_iter()
        .map(|mut t| {
            t.sops = count_sops(&t, net)?;
            Ok(t)
        })
        .collect()
}
