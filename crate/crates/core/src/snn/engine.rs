//! Batched time-stepped simulation and its reverse-mode derivative.
//!
//! Every LIF population follows
//!
//! ```text
//! u[t]   = β·m[t−1] + drive[t]
//! c[t]   = spike(u[t] − 1)           (Heaviside, or the smooth primitive in soft mode)
//! m[t]   = u[t]·(1 − c[t])           (reset to zero)
//! out[t] = c[t−1],  out[0] = 0       (one-step propagation delay)
//! ```
//!
//! so a spike caused by input at step `t` reaches the next population at
//! `t + 1`. The backward pass unrolls this recurrence exactly, replacing
//! `∂c/∂u` by the arctan surrogate, and treats the reset as part of the graph.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lif::SpikeMode;
use super::network::{BatchNorm, Conv2d, Dense, MaxPool, Network, Stage, BN_EPS, BN_MOMENTUM};
use super::trace::{RunTrace, Signal, SpikeTrain};
use crate::error::{shape_err, Result};
use crate::events::FrameSequence;

/// Train mode enables dropout and batch statistics in batchnorm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct RunOptions {
    pub mode: Mode,
    pub spike: SpikeMode,
    pub tape: bool,
    pub trace: bool,
    pub dropout_seed: u64,
}

type Sparse = Vec<(u32, f64)>;

pub(crate) enum StageTape {
    Connective {
        inputs: Vec<Vec<Sparse>>,
    },
    BatchNorm {
        xhat: Vec<Vec<f64>>,
        inv_std: Vec<Vec<f64>>,
        batch_stats: bool,
    },
    Lif {
        u: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
    },
    MaxPool {
        argmax: Vec<Vec<u32>>,
    },
    Dropout {
        mask: Option<Vec<f64>>,
    },
}

pub(crate) struct Tape {
    batch: usize,
    steps: usize,
    stages: Vec<StageTape>,
}

pub(crate) struct BatchRun {
    /// Final-population output per sample, `[T × K]`.
    pub outputs: Vec<Signal>,
    pub traces: Vec<RunTrace>,
    pub tape: Option<Tape>,
    /// Batchnorm running statistics after this run, in stage order.
    pub running: Vec<(Vec<f64>, Vec<f64>)>,
}

fn sparsify(dense: &[f64]) -> Sparse {
    dense
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(i, &v)| (i as u32, v))
        .collect()
}

pub(crate) fn run_batch(
    net: &Network,
    inputs: &[&FrameSequence],
    opts: &RunOptions,
) -> Result<BatchRun> {
    let batch = inputs.len();
    if batch == 0 {
        return Err(shape_err("empty batch"));
    }
    let shape = net.input_shape();
    let steps = inputs[0].steps();
    for f in inputs {
        if f.height() != shape.height
            || f.width() != shape.width
            || shape.channels != FrameSequence::CHANNELS
        {
            return Err(shape_err(format!(
                "input frames 2x{}x{} do not match network input {shape}",
                f.height(),
                f.width()
            )));
        }
        if f.steps() != steps {
            return Err(shape_err(
                "all samples in a batch need the same number of timesteps",
            ));
        }
    }
    assert!(
        !(opts.trace && opts.spike == SpikeMode::Soft),
        "spike traces are only recorded in hard mode"
    );

    let beta = net.beta();
    let surrogate = net.surrogate();
    let train = opts.mode == Mode::Train;
    let in_len = shape.len();

    // per-stage persistent state
    let mut membranes: Vec<Vec<f64>> = Vec::new();
    let mut previous: Vec<Vec<f64>> = Vec::new();
    let mut masks: Vec<Option<Vec<f64>>> = Vec::new();
    let mut running: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.dropout_seed);
    for stage in &net.stages {
        let n = batch * stage.output_len();
        match stage {
            Stage::Lif { .. } => {
                membranes.push(vec![0.0; n]);
                previous.push(vec![0.0; n]);
            }
            _ => {
                membranes.push(Vec::new());
                previous.push(Vec::new());
            }
        }
        masks.push(match stage {
            Stage::Dropout { rate, .. } if train && *rate > 0.0 => {
                let keep = 1.0 / (1.0 - rate);
                Some(
                    (0..n)
                        .map(|_| if rng.gen::<f64>() < *rate { 0.0 } else { keep })
                        .collect(),
                )
            }
            _ => None,
        });
        if let Stage::BatchNorm(bn) = stage {
            running.push((bn.running_mean.clone(), bn.running_var.clone()));
        }
    }

    let mut tape = opts.tape.then(|| Tape {
        batch,
        steps,
        stages: net
            .stages
            .iter()
            .zip(&masks)
            .map(|(s, mask)| match s {
                Stage::Conv(_) | Stage::Dense(_) => StageTape::Connective {
                    inputs: Vec::with_capacity(steps),
                },
                Stage::BatchNorm(_) => StageTape::BatchNorm {
                    xhat: Vec::with_capacity(steps),
                    inv_std: Vec::with_capacity(steps),
                    batch_stats: train,
                },
                Stage::Lif { .. } => StageTape::Lif {
                    u: Vec::with_capacity(steps),
                    c: Vec::with_capacity(steps),
                },
                Stage::MaxPool(_) => StageTape::MaxPool {
                    argmax: Vec::with_capacity(steps),
                },
                Stage::Dropout { .. } => StageTape::Dropout { mask: mask.clone() },
            })
            .collect(),
    });

    let out_units = net.output_units();
    let mut outputs: Vec<Vec<f64>> = vec![Vec::with_capacity(steps * out_units); batch];
    let pops = net.populations();
    let mut traces: Vec<RunTrace> = if opts.trace {
        (0..batch)
            .map(|_| RunTrace {
                input: Vec::with_capacity(steps),
                layers: pops
                    .iter()
                    .map(|p| SpikeTrain::new(p.shape.len()))
                    .collect(),
                sops: Vec::new(),
            })
            .collect()
    } else {
        Vec::new()
    };

    for t in 0..steps {
        let mut cur: Vec<f64> = Vec::with_capacity(batch * in_len);
        for (b, f) in inputs.iter().enumerate() {
            let frame = f.frame(t);
            cur.extend(frame.iter().map(|&c| c as f64));
            if opts.trace {
                traces[b].input.push(
                    frame
                        .iter()
                        .enumerate()
                        .filter(|(_, &c)| c != 0)
                        .map(|(i, &c)| (i as u32, c))
                        .collect(),
                );
            }
        }
        let mut bn_index = 0;
        for (s, stage) in net.stages.iter().enumerate() {
            let in_n = cur.len() / batch;
            let next = match stage {
                Stage::Conv(conv) => {
                    let sparse: Vec<Sparse> = cur.chunks(in_n).map(sparsify).collect();
                    let y = conv_forward(conv, &sparse);
                    if let Some(StageTape::Connective { inputs }) =
                        tape.as_mut().map(|tp| &mut tp.stages[s])
                    {
                        inputs.push(sparse);
                    }
                    y
                }
                Stage::Dense(dense) => {
                    let sparse: Vec<Sparse> = cur.chunks(in_n).map(sparsify).collect();
                    let y = dense_forward(dense, &sparse);
                    if let Some(StageTape::Connective { inputs }) =
                        tape.as_mut().map(|tp| &mut tp.stages[s])
                    {
                        inputs.push(sparse);
                    }
                    y
                }
                Stage::BatchNorm(bn) => {
                    let (run_mean, run_var) = &mut running[bn_index];
                    bn_index += 1;
                    let (y, xhat, inv_std) =
                        batchnorm_forward(bn, &cur, batch, train, run_mean, run_var);
                    if let Some(StageTape::BatchNorm {
                        xhat: xs,
                        inv_std: is,
                        ..
                    }) = tape.as_mut().map(|tp| &mut tp.stages[s])
                    {
                        xs.push(xhat);
                        is.push(inv_std);
                    }
                    y
                }
                Stage::Lif { .. } => {
                    let m = &mut membranes[s];
                    let prev = &mut previous[s];
                    let mut u = cur;
                    let mut c = vec![0.0; u.len()];
                    let mut y = vec![0.0; u.len()];
                    for i in 0..u.len() {
                        let ui = beta * m[i] + u[i];
                        let ci = surrogate.spike(ui, opts.spike);
                        u[i] = ui;
                        c[i] = ci;
                        m[i] = ui * (1.0 - ci);
                        y[i] = prev[i];
                        prev[i] = ci;
                    }
                    if let Some(StageTape::Lif { u: us, c: cs }) =
                        tape.as_mut().map(|tp| &mut tp.stages[s])
                    {
                        us.push(u);
                        cs.push(c);
                    }
                    y
                }
                Stage::MaxPool(pool) => {
                    let (y, argmax) = maxpool_forward(pool, &cur, batch);
                    if let Some(StageTape::MaxPool { argmax: a }) =
                        tape.as_mut().map(|tp| &mut tp.stages[s])
                    {
                        a.push(argmax);
                    }
                    y
                }
                Stage::Dropout { .. } => match &masks[s] {
                    Some(mask) => cur.iter().zip(mask).map(|(x, m)| x * m).collect(),
                    None => cur,
                },
            };
            cur = next;
            if opts.trace {
                for (p, pop) in pops.iter().enumerate() {
                    if pop.record_stage == s {
                        let n = pop.shape.len();
                        for (b, tr) in traces.iter_mut().enumerate() {
                            let spikes = cur[b * n..(b + 1) * n]
                                .iter()
                                .enumerate()
                                .filter(|(_, &v)| v > 0.0)
                                .map(|(i, _)| i as u32)
                                .collect();
                            tr.layers[p].push_step(spikes);
                        }
                    }
                }
            }
        }
        for (b, out) in outputs.iter_mut().enumerate() {
            out.extend_from_slice(&cur[b * out_units..(b + 1) * out_units]);
        }
    }

    let outputs = outputs
        .into_iter()
        .map(|v| Signal::from_values(steps, out_units, v))
        .collect::<Result<Vec<_>>>()?;
    Ok(BatchRun {
        outputs,
        traces,
        tape,
        running,
    })
}

fn conv_forward(conv: &Conv2d, sparse: &[Sparse]) -> Vec<f64> {
    let out_n = conv.geom.output.len();
    let spatial_out = conv.geom.output.spatial();
    let (h, w) = (conv.geom.input.height, conv.geom.input.width);
    let mut y = vec![0.0; sparse.len() * out_n];
    y.par_chunks_mut(out_n)
        .zip(sparse.par_iter())
        .for_each(|(out, xs)| {
            for (oc, chunk) in out.chunks_mut(spatial_out).enumerate() {
                chunk.fill(conv.bias[oc]);
            }
            for &(idx, v) in xs {
                let idx = idx as usize;
                let (ic, y_, x_) = (idx / (h * w), (idx / w) % h, idx % w);
                conv.for_each_synapse(ic, y_, x_, |o, wi| out[o] += conv.weight[wi] * v);
            }
        });
    y
}

fn dense_forward(dense: &Dense, sparse: &[Sparse]) -> Vec<f64> {
    let n = dense.outputs;
    let mut y = vec![0.0; sparse.len() * n];
    y.par_chunks_mut(n)
        .zip(sparse.par_iter())
        .for_each(|(out, xs)| {
            out.copy_from_slice(&dense.bias);
            for &(j, v) in xs {
                let row = &dense.weight[j as usize * n..(j as usize + 1) * n];
                for (o, w) in out.iter_mut().zip(row) {
                    *o += w * v;
                }
            }
        });
    y
}

/// Returns `(output, xhat, inv_std)`.
fn batchnorm_forward(
    bn: &BatchNorm,
    x: &[f64],
    batch: usize,
    batch_stats: bool,
    running_mean: &mut [f64],
    running_var: &mut [f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let channels = bn.shape.channels;
    let spatial = bn.shape.spatial();
    let per_sample = channels * spatial;
    let count = (batch * spatial) as f64;
    let mut mean = vec![0.0; channels];
    let mut inv_std = vec![0.0; channels];
    if batch_stats {
        for ch in 0..channels {
            let mut sum = 0.0;
            for b in 0..batch {
                let off = b * per_sample + ch * spatial;
                sum += x[off..off + spatial].iter().sum::<f64>();
            }
            let mu = sum / count;
            let mut sq = 0.0;
            for b in 0..batch {
                let off = b * per_sample + ch * spatial;
                sq += x[off..off + spatial]
                    .iter()
                    .map(|v| (v - mu) * (v - mu))
                    .sum::<f64>();
            }
            let var = sq / count;
            mean[ch] = mu;
            inv_std[ch] = 1.0 / (var + BN_EPS).sqrt();
            let unbiased = if count > 1.0 {
                var * count / (count - 1.0)
            } else {
                var
            };
            running_mean[ch] = (1.0 - BN_MOMENTUM) * running_mean[ch] + BN_MOMENTUM * mu;
            running_var[ch] = (1.0 - BN_MOMENTUM) * running_var[ch] + BN_MOMENTUM * unbiased;
        }
    } else {
        for ch in 0..channels {
            mean[ch] = running_mean[ch];
            inv_std[ch] = 1.0 / (running_var[ch] + BN_EPS).sqrt();
        }
    }
    let mut xhat = vec![0.0; x.len()];
    let mut y = vec![0.0; x.len()];
    for (i, (&xi, (xh, yi))) in x.iter().zip(xhat.iter_mut().zip(y.iter_mut())).enumerate() {
        let ch = (i % per_sample) / spatial;
        *xh = (xi - mean[ch]) * inv_std[ch];
        *yi = bn.gamma[ch] * *xh + bn.shift[ch];
    }
    (y, xhat, inv_std)
}

fn maxpool_forward(pool: &MaxPool, x: &[f64], batch: usize) -> (Vec<f64>, Vec<u32>) {
    let (ih, iw) = (pool.input.height, pool.input.width);
    let (oh, ow) = (pool.output.height, pool.output.width);
    let win = pool.window;
    let in_n = pool.input.len();
    let out_n = pool.output.len();
    let mut y = vec![0.0; batch * out_n];
    let mut argmax = vec![0u32; batch * out_n];
    for b in 0..batch {
        let xs = &x[b * in_n..(b + 1) * in_n];
        for c in 0..pool.output.channels {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_i = 0;
                    for dy in 0..win {
                        for dx in 0..win {
                            let i = (c * ih + oy * win + dy) * iw + ox * win + dx;
                            if xs[i] > best {
                                best = xs[i];
                                best_i = i;
                            }
                        }
                    }
                    let o = b * out_n + (c * oh + oy) * ow + ox;
                    y[o] = best;
                    argmax[o] = best_i as u32;
                }
            }
        }
    }
    (y, argmax)
}

/// Gradients in [`Network::parameters`] order.
pub(crate) fn backward(
    net: &Network,
    tape: &Tape,
    grad_outputs: &[Signal],
) -> Result<Vec<Vec<f64>>> {
    let batch = tape.batch;
    let steps = tape.steps;
    if grad_outputs.len() != batch {
        return Err(shape_err("one output gradient per sample is required"));
    }
    let k = net.output_units();
    if grad_outputs
        .iter()
        .any(|g| g.steps() != steps || g.neurons() != k)
    {
        return Err(shape_err(format!(
            "output gradients must be [{steps} x {k}]"
        )));
    }
    let beta = net.beta();
    let surrogate = net.surrogate();

    let mut grads: Vec<Vec<Vec<f64>>> = net
        .stages
        .iter()
        .map(|s| match s {
            Stage::Conv(c) => vec![vec![0.0; c.weight.len()], vec![0.0; c.bias.len()]],
            Stage::Dense(d) => vec![vec![0.0; d.weight.len()], vec![0.0; d.bias.len()]],
            Stage::BatchNorm(b) => vec![vec![0.0; b.gamma.len()], vec![0.0; b.shift.len()]],
            _ => Vec::new(),
        })
        .collect();
    let mut carry_c: Vec<Vec<f64>> = net
        .stages
        .iter()
        .map(|s| match s {
            Stage::Lif { size } => vec![0.0; batch * size],
            _ => Vec::new(),
        })
        .collect();
    let mut carry_m = carry_c.clone();

    for t in (0..steps).rev() {
        let mut g: Vec<f64> = Vec::with_capacity(batch * k);
        for go in grad_outputs {
            g.extend_from_slice(go.row(t));
        }
        for (s, stage) in net.stages.iter().enumerate().rev() {
            let need_input_grad = s > 0;
            g = match (stage, &tape.stages[s]) {
                (Stage::Dense(dense), StageTape::Connective { inputs }) => {
                    let sg = &mut grads[s];
                    let n = dense.outputs;
                    for (b, xs) in inputs[t].iter().enumerate() {
                        let gb = &g[b * n..(b + 1) * n];
                        for (acc, v) in sg[1].iter_mut().zip(gb) {
                            *acc += v;
                        }
                        for &(j, v) in xs {
                            let row = &mut sg[0][j as usize * n..(j as usize + 1) * n];
                            for (acc, gv) in row.iter_mut().zip(gb) {
                                *acc += v * gv;
                            }
                        }
                    }
                    if need_input_grad {
                        dense_input_grad(dense, &g, batch)
                    } else {
                        Vec::new()
                    }
                }
                (Stage::Conv(conv), StageTape::Connective { inputs }) => {
                    conv_param_grad(conv, &inputs[t], &g, &mut grads[s]);
                    if need_input_grad {
                        conv_input_grad(conv, &g, batch)
                    } else {
                        Vec::new()
                    }
                }
                (
                    Stage::BatchNorm(bn),
                    StageTape::BatchNorm {
                        xhat,
                        inv_std,
                        batch_stats,
                    },
                ) => batchnorm_backward(
                    bn,
                    &g,
                    &xhat[t],
                    &inv_std[t],
                    batch,
                    *batch_stats,
                    &mut grads[s],
                ),
                (Stage::Lif { .. }, StageTape::Lif { u, c }) => {
                    let (u, c) = (&u[t], &c[t]);
                    let gc_next = &mut carry_c[s];
                    let gm = &mut carry_m[s];
                    let mut gd = vec![0.0; g.len()];
                    for i in 0..g.len() {
                        let gc = gc_next[i] - gm[i] * u[i];
                        let gu = gc * surrogate.derivative(u[i] - 1.0) + gm[i] * (1.0 - c[i]);
                        gd[i] = gu;
                        gm[i] = beta * gu;
                        // out[t] = c[t-1]
                        gc_next[i] = g[i];
                    }
                    gd
                }
                (Stage::MaxPool(pool), StageTape::MaxPool { argmax }) => {
                    let in_n = pool.input.len();
                    let out_n = pool.output.len();
                    let mut gi = vec![0.0; batch * in_n];
                    for (o, (&a, &gv)) in argmax[t].iter().zip(&g).enumerate() {
                        let b = o / out_n;
                        gi[b * in_n + a as usize] += gv;
                    }
                    gi
                }
                (Stage::Dropout { .. }, StageTape::Dropout { mask }) => match mask {
                    Some(m) => g.iter().zip(m).map(|(a, b)| a * b).collect(),
                    None => g,
                },
                _ => unreachable!("tape layout mirrors the stage list"),
            };
        }
    }
    Ok(grads.into_iter().flatten().collect())
}

fn dense_input_grad(dense: &Dense, g: &[f64], batch: usize) -> Vec<f64> {
    let (n_in, n_out) = (dense.inputs, dense.outputs);
    let mut gi = vec![0.0; batch * n_in];
    gi.par_chunks_mut(n_in)
        .zip(g.par_chunks(n_out))
        .for_each(|(gi_b, g_b)| {
            for (j, slot) in gi_b.iter_mut().enumerate() {
                let row = &dense.weight[j * n_out..(j + 1) * n_out];
                *slot = row.iter().zip(g_b).map(|(w, gv)| w * gv).sum();
            }
        });
    gi
}

fn conv_param_grad(conv: &Conv2d, inputs: &[Sparse], g: &[f64], grads: &mut [Vec<f64>]) {
    let out_n = conv.geom.output.len();
    let spatial = conv.geom.output.spatial();
    let (h, w) = (conv.geom.input.height, conv.geom.input.width);
    let (gw, gb) = grads.split_at_mut(1);
    let (gw, gb) = (&mut gw[0], &mut gb[0]);
    for (b, xs) in inputs.iter().enumerate() {
        let g_b = &g[b * out_n..(b + 1) * out_n];
        for (oc, chunk) in g_b.chunks(spatial).enumerate() {
            gb[oc] += chunk.iter().sum::<f64>();
        }
        for &(idx, v) in xs {
            let idx = idx as usize;
            let (ic, y, x) = (idx / (h * w), (idx / w) % h, idx % w);
            conv.for_each_synapse(ic, y, x, |o, wi| gw[wi] += v * g_b[o]);
        }
    }
}

fn conv_input_grad(conv: &Conv2d, g: &[f64], batch: usize) -> Vec<f64> {
    let in_shape = conv.geom.input;
    let in_n = in_shape.len();
    let out_n = conv.geom.output.len();
    let mut gi = vec![0.0; batch * in_n];
    gi.par_chunks_mut(in_n)
        .zip(g.par_chunks(out_n))
        .for_each(|(gi_b, g_b)| {
            for (idx, slot) in gi_b.iter_mut().enumerate() {
                let (ic, y, x) = (
                    idx / in_shape.spatial(),
                    (idx / in_shape.width) % in_shape.height,
                    idx % in_shape.width,
                );
                let mut acc = 0.0;
                conv.for_each_synapse(ic, y, x, |o, wi| acc += conv.weight[wi] * g_b[o]);
                *slot = acc;
            }
        });
    gi
}

fn batchnorm_backward(
    bn: &BatchNorm,
    g: &[f64],
    xhat: &[f64],
    inv_std: &[f64],
    batch: usize,
    batch_stats: bool,
    grads: &mut [Vec<f64>],
) -> Vec<f64> {
    let channels = bn.shape.channels;
    let spatial = bn.shape.spatial();
    let per_sample = channels * spatial;
    let count = (batch * spatial) as f64;
    let mut sum_g = vec![0.0; channels];
    let mut sum_gx = vec![0.0; channels];
    for (i, (&gv, &xh)) in g.iter().zip(xhat).enumerate() {
        let ch = (i % per_sample) / spatial;
        sum_g[ch] += gv;
        sum_gx[ch] += gv * xh;
    }
    for ch in 0..channels {
        grads[0][ch] += sum_gx[ch];
        grads[1][ch] += sum_g[ch];
    }
    g.iter()
        .zip(xhat)
        .enumerate()
        .map(|(i, (&gv, &xh))| {
            let ch = (i % per_sample) / spatial;
            let scale = bn.gamma[ch] * inv_std[ch];
            if batch_stats {
                scale / count * (count * gv - sum_g[ch] - xh * sum_gx[ch])
            } else {
                scale * gv
            }
        })
        .collect()
}
