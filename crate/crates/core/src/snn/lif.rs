use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};

/// Firing threshold of every LIF neuron.
pub const THRESHOLD: f64 = 1.0;
/// Membrane value after a spike.
pub const RESET: f64 = 0.0;

/// Leaky integrate-and-fire parameters. Threshold and reset are fixed at 1 and 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifParams {
    pub beta: f64,
}

impl LifParams {
    pub fn new(beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Validation(format!(
                "beta must be in [0, 1], got {beta}"
            )));
        }
        Ok(Self { beta })
    }
}

/// How the spike nonlinearity behaves in the forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpikeMode {
    /// Heaviside forward, arctan surrogate backward.
    #[default]
    Hard,
    /// Forward uses the surrogate's smooth primitive so the whole graph is differentiable.
    Soft,
}

/// Arctan surrogate of slope `k`: `d/dx = (k/2) / (1 + (π k x / 2)²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArctanSurrogate {
    pub slope: f64,
}

impl Default for ArctanSurrogate {
    fn default() -> Self {
        Self { slope: 2.0 }
    }
}

impl ArctanSurrogate {
    /// Smooth primitive `1/2 + atan(π k x / 2) / π`.
    #[inline]
    pub fn primitive(&self, x: f64) -> f64 {
        0.5 + (PI * self.slope * x / 2.0).atan() / PI
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        let a = PI * self.slope * x / 2.0;
        self.slope / 2.0 / (1.0 + a * a)
    }

    /// Spike value for a membrane `u` under `mode`.
    #[inline]
    pub fn spike(&self, u: f64, mode: SpikeMode) -> f64 {
        match mode {
            SpikeMode::Hard => {
                if u >= THRESHOLD {
                    1.0
                } else {
                    0.0
                }
            }
            SpikeMode::Soft => self.primitive(u - THRESHOLD),
        }
    }
}

/// One LIF update: `M' = β·M + drive`; every `M' >= 1` spikes and resets to 0.
pub fn lif_step(membrane: &[f64], drive: &[f64], beta: f64) -> Result<(Vec<f64>, Vec<bool>)> {
    if membrane.len() != drive.len() {
        return Err(shape_err(format!(
            "membrane has {} neurons, drive has {}",
            membrane.len(),
            drive.len()
        )));
    }
    if let Some(i) = drive.iter().position(|d| !d.is_finite()) {
        return Err(Error::Math(format!(
            "non-finite drive {} at neuron {i}",
            drive[i]
        )));
    }
    let mut state = Vec::with_capacity(membrane.len());
    let mut spikes = Vec::with_capacity(membrane.len());
    for (&m, &d) in membrane.iter().zip(drive) {
        let u = beta * m + d;
        if u >= THRESHOLD {
            state.push(RESET);
            spikes.push(true);
        } else {
            state.push(u);
            spikes.push(false);
        }
    }
    Ok((state, spikes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sub_threshold_integrates() {
        let (m, s) = lif_step(&[0.0], &[0.5], 0.9).unwrap();
        assert_eq!(m, vec![0.5]);
        assert_eq!(s, vec![false]);
    }

    #[test]
    fn crossing_spikes_and_resets() {
        let (m, s) = lif_step(&[0.6], &[0.5], 0.9).unwrap();
        assert_eq!(m, vec![0.0]);
        assert_eq!(s, vec![true]);
    }

    #[test]
    fn zero_beta_forgets_history() {
        let (m, s) = lif_step(&[0.7], &[0.3], 0.0).unwrap();
        assert_eq!(m, vec![0.3]);
        assert_eq!(s, vec![false]);
    }

    #[test]
    fn exact_threshold_fires() {
        let (_, s) = lif_step(&[0.0], &[1.0], 0.5).unwrap();
        assert!(s[0]);
    }

    #[test]
    fn non_finite_drive_is_math_error() {
        assert!(matches!(
            lif_step(&[0.0], &[f64::NAN], 0.9),
            Err(Error::Math(_))
        ));
        assert!(matches!(
            lif_step(&[0.0, 0.0], &[1.0], 0.9),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn surrogate_is_derivative_of_primitive() {
        let s = ArctanSurrogate::default();
        for &x in &[-2.0, -0.3, 0.0, 0.1, 1.5] {
            let h = 1e-6;
            let fd = (s.primitive(x + h) - s.primitive(x - h)) / (2.0 * h);
            assert!((fd - s.derivative(x)).abs() < 1e-8);
        }
        assert_eq!(s.derivative(0.0), 1.0);
        assert_eq!(s.primitive(0.0), 0.5);
    }

    #[test]
    fn beta_range_validated() {
        assert!(LifParams::new(1.2).is_err());
        assert!(LifParams::new(0.9).is_ok());
    }
}
