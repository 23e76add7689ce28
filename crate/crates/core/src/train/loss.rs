//! Losses on the output layer's `[T × K]` signal. Each returns the scalar
//! loss together with its gradient with respect to every output value.
//!
//! Hard-mode outputs are 0/1 spikes; soft-mode outputs lie in `(0, 1)` and the
//! same formulas apply, which is what makes finite-difference checks possible.

use crate::decoders::DecoderKind;
use crate::error::{shape_err, Error, Result};
use crate::hdc::{BinaryHypervector, ClassCodebook};
use crate::snn::Signal;

/// Target firing fractions for the rate loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTarget {
    pub correct: f64,
    pub incorrect: f64,
}

impl Default for RateTarget {
    fn default() -> Self {
        Self {
            correct: 0.8,
            incorrect: 0.2,
        }
    }
}

fn check_label(out: &Signal, label: usize) -> Result<()> {
    if out.neurons() < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 output neurons, got {}",
            out.neurons()
        )));
    }
    if label >= out.neurons() {
        return Err(shape_err(format!(
            "label {label} outside {} output neurons",
            out.neurons()
        )));
    }
    if out.steps() == 0 {
        return Err(shape_err("output signal has no timesteps"));
    }
    Ok(())
}

/// MSE between per-neuron firing fractions `count / T` and the rate targets.
pub fn rate_loss(out: &Signal, label: usize, target: RateTarget) -> Result<(f64, Signal)> {
    check_label(out, label)?;
    let (steps, k) = (out.steps(), out.neurons());
    let rates: Vec<f64> = out.totals().iter().map(|c| c / steps as f64).collect();
    let err: Vec<f64> = rates
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r - if i == label {
                target.correct
            } else {
                target.incorrect
            }
        })
        .collect();
    let loss = err.iter().map(|e| e * e).sum::<f64>() / k as f64;
    let mut grad = Signal::zeros(steps, k);
    for t in 0..steps {
        for (i, e) in err.iter().enumerate() {
            grad.set(t, i, 2.0 * e / (k as f64 * steps as f64));
        }
    }
    Ok((loss, grad))
}

/// Expected normalized first-spike time of one neuron and its gradient.
///
/// Treating `s[t]` as the probability of firing at `t` given no earlier
/// spike, `l = Σ_t τ_t s_t Π_{t'<t}(1 − s_t') + Π_t(1 − s_t)` with
/// `τ_t = t / (T − 1)`. For 0/1 spikes this is exactly the first-spike time,
/// or 1 for a silent neuron.
fn first_spike_time(s: impl Fn(usize) -> f64, steps: usize) -> (f64, Vec<f64>) {
    let tau = |t: usize| {
        if steps > 1 {
            t as f64 / (steps - 1) as f64
        } else {
            0.0
        }
    };
    // survival[t] = Π_{t'<t}(1 − s_t')
    let mut survival = Vec::with_capacity(steps + 1);
    survival.push(1.0);
    for t in 0..steps {
        survival.push(survival[t] * (1.0 - s(t)));
    }
    // tail[t] = value of l given survival up to t
    let mut tail = vec![0.0; steps + 1];
    tail[steps] = 1.0;
    for t in (0..steps).rev() {
        tail[t] = tau(t) * s(t) + (1.0 - s(t)) * tail[t + 1];
    }
    let grad = (0..steps)
        .map(|t| survival[t] * (tau(t) - tail[t + 1]))
        .collect();
    (tail[0], grad)
}

/// MSE between normalized first-spike times and 0 (true class) / 1 (others).
pub fn latency_loss(out: &Signal, label: usize) -> Result<(f64, Signal)> {
    check_label(out, label)?;
    let (steps, k) = (out.steps(), out.neurons());
    let mut loss = 0.0;
    let mut grad = Signal::zeros(steps, k);
    for i in 0..k {
        let (l, dl) = first_spike_time(|t| out.get(t, i), steps);
        let e = l - if i == label { 0.0 } else { 1.0 };
        loss += e * e;
        for (t, d) in dl.iter().enumerate() {
            grad.set(t, i, 2.0 * e * d / k as f64);
        }
    }
    Ok((loss / k as f64, grad))
}

/// Per-dimension loss on total spike counts `h` against target bits `c`;
/// counts above 1 on target-on dimensions are clamped to 1.
/// Returns the loss and `∂loss/∂h`.
pub fn hdc_loss_counts(h: &[f64], target: &BinaryHypervector) -> Result<(f64, Vec<f64>)> {
    if h.len() != target.dims() {
        return Err(shape_err(format!(
            "{} output neurons for a {}-dimensional target",
            h.len(),
            target.dims()
        )));
    }
    let d = h.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; h.len()];
    for (i, (&hi, g)) in h.iter().zip(grad.iter_mut()).enumerate() {
        let c = if target.bit(i) { 1.0 } else { 0.0 };
        if c == 1.0 && hi > 1.0 {
            continue;
        }
        loss += (hi - c) * (hi - c);
        *g = 2.0 * (hi - c) / d;
    }
    Ok((loss / d, grad))
}

pub fn hdc_loss(out: &Signal, target: &BinaryHypervector) -> Result<(f64, Signal)> {
    let (loss, dh) = hdc_loss_counts(&out.totals(), target)?;
    let mut grad = Signal::zeros(out.steps(), out.neurons());
    for t in 0..out.steps() {
        for (i, g) in dh.iter().enumerate() {
            grad.set(t, i, *g);
        }
    }
    Ok((loss, grad))
}

/// A decoder's training loss, bound to whatever it needs besides the label.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    Rate(RateTarget),
    Latency,
    Hdc(&'a ClassCodebook),
}

impl<'a> Objective<'a> {
    pub fn new(kind: DecoderKind, codebook: Option<&'a ClassCodebook>) -> Result<Self> {
        Ok(match kind {
            DecoderKind::Rate => Objective::Rate(RateTarget::default()),
            DecoderKind::Latency => Objective::Latency,
            DecoderKind::Hdc => Objective::Hdc(
                codebook.ok_or_else(|| Error::Config("hdc loss needs a codebook".into()))?,
            ),
        })
    }

    pub fn kind(&self) -> DecoderKind {
        match self {
            Objective::Rate(_) => DecoderKind::Rate,
            Objective::Latency => DecoderKind::Latency,
            Objective::Hdc(_) => DecoderKind::Hdc,
        }
    }

    pub fn codebook(&self) -> Option<&'a ClassCodebook> {
        match self {
            Objective::Hdc(cb) => Some(cb),
            _ => None,
        }
    }

    pub fn loss(&self, out: &Signal, label: usize) -> Result<(f64, Signal)> {
        match self {
            Objective::Rate(target) => rate_loss(out, label, *target),
            Objective::Latency => latency_loss(out, label),
            Objective::Hdc(cb) => {
                if label >= cb.len() {
                    return Err(shape_err(format!(
                        "label {label} outside {}-class codebook",
                        cb.len()
                    )));
                }
                hdc_loss(out, cb.class(label))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::SpikeTrain;

    fn sig(k: usize, t: usize, ev: &[(usize, usize)]) -> Signal {
        SpikeTrain::from_events(k, t, ev).unwrap().to_signal()
    }

    #[test]
    fn rate_silent_and_perfect() {
        let (l, _) = rate_loss(&Signal::zeros(10, 11), 0, RateTarget::default()).unwrap();
        assert!((l - 26.0 / 275.0).abs() <= 4.0 * f64::EPSILON * l);
        let mut ev: Vec<_> = (0..8).map(|t| (t, 1)).collect();
        ev.extend((0..2).map(|t| (t, 0)));
        ev.extend((5..7).map(|t| (t, 2)));
        let (l, _) = rate_loss(&sig(3, 10, &ev), 1, RateTarget::default()).unwrap();
        assert!(l < 1e-30);
    }

    #[test]
    fn latency_values() {
        let (l, _) = latency_loss(&Signal::zeros(10, 11), 3).unwrap();
        assert_eq!(l, 1.0 / 11.0);
        let (l, _) = latency_loss(&sig(3, 10, &[(0, 2)]), 2).unwrap();
        assert_eq!(l, 0.0);
        let (early, _) = latency_loss(&sig(3, 10, &[(2, 2)]), 2).unwrap();
        let (late, _) = latency_loss(&sig(3, 10, &[(5, 2)]), 2).unwrap();
        assert!(late > early && early > 0.0);
    }

    #[test]
    fn first_spike_time_binary() {
        let s = [0.0, 0.0, 1.0, 1.0, 0.0];
        let (l, _) = first_spike_time(|t| s[t], 5);
        assert_eq!(l, 0.5);
    }

    #[test]
    fn hdc_clamp() {
        let c = BinaryHypervector::from_bit_str("101").unwrap();
        assert_eq!(hdc_loss_counts(&[2.0, 0.0, 3.0], &c).unwrap().0, 0.0);
        assert_eq!(hdc_loss_counts(&[0.0, 2.0, 1.0], &c).unwrap().0, 5.0 / 3.0);
        assert!(hdc_loss_counts(&[0.0, 2.0], &c).is_err());
    }
}
