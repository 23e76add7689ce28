//! Event-driven spiking neural network toolkit with hyperdimensional output decoding.
//!
//! The crate simulates convolutional leaky integrate-and-fire networks over
//! 1 ms event frames and decodes their output layer three ways:
//!
//! - **rate**: the output neuron with the most spikes wins;
//! - **latency**: the output neuron that spikes first wins;
//! - **hdc**: every output neuron is one dimension of a binary hypervector that
//!   flips to 1 on that neuron's first spike, and the accumulated vector is
//!   matched against random class hypervectors by Hamming distance.
//!
//! Every run is instrumented with per-layer spike counts, synaptic operation
//! (SOP) counts, energy estimates at 26 pJ per SOP and per-decoder decision
//! latency.
//!
//! | module | contents |
//! |---|---|
//! | [`events`] | EVS1 event files, 1 ms frame binning, block-sum downsampling |
//! | [`hdc`] | packed binary hypervectors, similarity, class codebooks, capacity model |
//! | [`snn`] | architectures, LIF simulation with one-step spike delay, SOP/energy accounting |
//! | [`decoders`] | rate / latency / HDC decoding, decision latency, unknown-class rejection |
//! | [`train`] | losses, surrogate-gradient BPTT, Adam, gradient checking, leave-signers-out folds |
//! | [`harness`] | experiment configs, synthetic data, reports, δ sweeps, capacity tables |
//!
//! See the `examples/` directory of this crate for one runnable program per capability.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decoders;
pub mod error;
pub mod events;
pub mod harness;
pub mod hdc;
pub mod snn;
pub mod train;

pub use error::{Error, Result};

/// Joules consumed by one synaptic operation.
pub const ENERGY_PER_SOP_J: f64 = 26e-12;
