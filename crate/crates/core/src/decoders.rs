//! Output-layer decoding: rate, first-spike latency and hypervector matching.
//!
//! Every decoder reports a per-timestep prediction (what it would answer if
//! the clip ended after that step) and a decision latency measured from the
//! start of the sample to the *end* of the deciding timestep, i.e.
//! `dt · (t + 1)`. Ties always go to the lowest class index.

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::hdc::{BinaryHypervector, ClassCodebook};
use crate::snn::SpikeTrain;

/// Softmax confidence a rate decoder must reach before it counts as decided.
pub const RATE_CONFIDENCE: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Prediction {
    Class(usize),
    Unknown,
}

impl Prediction {
    pub fn class(self) -> Option<usize> {
        match self {
            Prediction::Class(c) => Some(c),
            Prediction::Unknown => None,
        }
    }
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prediction::Class(c) => write!(f, "{c}"),
            Prediction::Unknown => f.write_str("unknown"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    Rate,
    Latency,
    Hdc,
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecoderKind::Rate => "rate",
            DecoderKind::Latency => "latency",
            DecoderKind::Hdc => "hdc",
        })
    }
}

impl std::str::FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rate" => Ok(DecoderKind::Rate),
            "latency" => Ok(DecoderKind::Latency),
            "hdc" => Ok(DecoderKind::Hdc),
            _ => Err(Error::Config(format!(
                "unknown decoder {s:?}; expected rate, latency or hdc"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderOutput {
    pub prediction: Prediction,
    /// `None` if the decision criterion was never met inside the clip.
    pub latency: Option<Duration>,
    pub per_timestep: Vec<Prediction>,
    /// Final accumulated hypervector (HDC only).
    pub hypervector: Option<BinaryHypervector>,
    /// Normalized Hamming distance to each codeword (HDC only).
    pub distances: Option<Vec<f64>>,
}

impl DecoderOutput {
    pub fn latency_ms(&self) -> Option<f64> {
        self.latency.map(|d| d.as_secs_f64() * 1e3)
    }

    pub fn min_distance(&self) -> Option<f64> {
        self.distances
            .as_ref()
            .and_then(|d| d.iter().copied().min_by(f64::total_cmp))
    }
}

/// Rejects a hypervector match whose normalized Hamming distance is not below `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnknownPolicy {
    delta: f64,
}

impl UnknownPolicy {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 0.5) {
            return Err(Error::Validation(format!(
                "delta must be in (0, 0.5], got {delta}"
            )));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

fn end_of_step(dt: Duration, t: usize) -> Duration {
    dt * (t as u32 + 1)
}

fn check_classes(train: &SpikeTrain) -> Result<()> {
    if train.neurons() < 2 {
        return Err(Error::Validation(format!(
            "decoding needs at least 2 output neurons, got {}",
            train.neurons()
        )));
    }
    Ok(())
}

/// Index of the largest value; ties go to the lowest index.
fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Largest softmax probability of `counts`.
pub fn softmax_max(counts: &[u64]) -> f64 {
    let top = counts.iter().copied().max().unwrap_or(0);
    let denom: f64 = counts.iter().map(|&c| (c as f64 - top as f64).exp()).sum();
    1.0 / denom
}

/// Most spikes wins. Decided once the softmax of the cumulative counts
/// reaches [`RATE_CONFIDENCE`].
pub fn rate_decode(train: &SpikeTrain, dt: Duration) -> Result<DecoderOutput> {
    check_classes(train)?;
    let mut counts = vec![0u64; train.neurons()];
    let mut per_timestep = Vec::with_capacity(train.steps());
    let mut latency = None;
    for (t, spikes) in train.iter_steps().enumerate() {
        for &i in spikes {
            counts[i as usize] += 1;
        }
        per_timestep.push(Prediction::Class(argmax(&counts)));
        if latency.is_none() && softmax_max(&counts) >= RATE_CONFIDENCE {
            latency = Some(end_of_step(dt, t));
        }
    }
    Ok(DecoderOutput {
        prediction: Prediction::Class(argmax(&counts)),
        latency,
        per_timestep,
        hypervector: None,
        distances: None,
    })
}

/// First spike wins; a silent output is [`Prediction::Unknown`].
pub fn latency_decode(train: &SpikeTrain, dt: Duration) -> Result<DecoderOutput> {
    check_classes(train)?;
    let mut decided: Option<(usize, usize)> = None;
    let mut per_timestep = Vec::with_capacity(train.steps());
    for (t, spikes) in train.iter_steps().enumerate() {
        if decided.is_none() {
            if let Some(&first) = spikes.first() {
                decided = Some((first as usize, t));
            }
        }
        per_timestep.push(decided.map_or(Prediction::Unknown, |(c, _)| Prediction::Class(c)));
    }
    Ok(DecoderOutput {
        prediction: decided.map_or(Prediction::Unknown, |(c, _)| Prediction::Class(c)),
        latency: decided.map(|(_, t)| end_of_step(dt, t)),
        per_timestep,
        hypervector: None,
        distances: None,
    })
}

/// Presence accumulation: bit `i` of `H(t)` is set once neuron `i` has spiked
/// at any step up to `t`. Returns the final vector and every partial.
pub fn hdc_accumulate(train: &SpikeTrain) -> (BinaryHypervector, Vec<BinaryHypervector>) {
    let mut h = BinaryHypervector::zeros(train.neurons());
    let mut partials = Vec::with_capacity(train.steps());
    for spikes in train.iter_steps() {
        for &i in spikes {
            h.set(i as usize, true);
        }
        partials.push(h.clone());
    }
    (h, partials)
}

fn nearest(distances: &[f64], policy: Option<UnknownPolicy>) -> Prediction {
    let mut best = 0;
    for (i, &d) in distances.iter().enumerate() {
        if d < distances[best] {
            best = i;
        }
    }
    match policy {
        Some(p) if distances[best] >= p.delta => Prediction::Unknown,
        _ => Prediction::Class(best),
    }
}

/// Nearest codeword by normalized Hamming distance, optionally rejecting
/// matches that are not closer than the policy's threshold.
pub fn hdc_classify(
    h: &BinaryHypervector,
    codebook: &ClassCodebook,
    policy: Option<UnknownPolicy>,
) -> Result<DecoderOutput> {
    if codebook.is_empty() {
        return Err(Error::Validation("empty codebook".into()));
    }
    let distances = codebook.distances(h)?;
    let prediction = nearest(&distances, policy);
    Ok(DecoderOutput {
        prediction,
        latency: None,
        per_timestep: vec![prediction],
        hypervector: Some(h.clone()),
        distances: Some(distances),
    })
}

/// Time after which the prediction never changes again. Always defined for a
/// nonempty sequence.
pub fn hdc_latency(per_timestep: &[Prediction], dt: Duration) -> Result<Duration> {
    let last = *per_timestep
        .last()
        .ok_or_else(|| Error::Validation("empty prediction sequence".into()))?;
    let settle = per_timestep
        .iter()
        .rposition(|&p| p != last)
        .map_or(0, |i| i + 1);
    Ok(end_of_step(dt, settle))
}

/// Accumulates, classifies every partial hypervector and reports the settle time.
pub fn hdc_decode(
    train: &SpikeTrain,
    codebook: &ClassCodebook,
    policy: Option<UnknownPolicy>,
    dt: Duration,
) -> Result<DecoderOutput> {
    if train.neurons() != codebook.dims() {
        return Err(shape_err(format!(
            "output layer has {} neurons, codebook has {} dimensions",
            train.neurons(),
            codebook.dims()
        )));
    }
    if train.steps() == 0 {
        return Err(Error::Validation("empty spike train".into()));
    }
    let (h, partials) = hdc_accumulate(train);
    let mut per_timestep = Vec::with_capacity(partials.len());
    let mut previous: Option<(&BinaryHypervector, Prediction)> = None;
    for p in &partials {
        // partials only change when a new dimension turns on
        let pred = match previous {
            Some((q, pred)) if q == p => pred,
            _ => nearest(&codebook.distances(p)?, policy),
        };
        per_timestep.push(pred);
        previous = Some((p, pred));
    }
    let mut out = hdc_classify(&h, codebook, policy)?;
    out.latency = Some(hdc_latency(&per_timestep, dt)?);
    out.per_timestep = per_timestep;
    Ok(out)
}

/// Runs the named decoder. `codebook` is required for [`DecoderKind::Hdc`].
pub fn decode(
    kind: DecoderKind,
    train: &SpikeTrain,
    codebook: Option<&ClassCodebook>,
    policy: Option<UnknownPolicy>,
    dt: Duration,
) -> Result<DecoderOutput> {
    match kind {
        DecoderKind::Rate => rate_decode(train, dt),
        DecoderKind::Latency => latency_decode(train, dt),
        DecoderKind::Hdc => {
            let cb =
                codebook.ok_or_else(|| Error::Config("hdc decoding needs a codebook".into()))?;
            hdc_decode(train, cb, policy, dt)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MS: Duration = Duration::from_millis(1);

    #[test]
    fn rate_argmax_and_tie() {
        let mut ev = Vec::new();
        for (n, c) in [3usize, 10, 1].iter().enumerate() {
            for t in 0..*c {
                ev.push((t, n));
            }
        }
        let tr = SpikeTrain::from_events(3, 12, &ev).unwrap();
        assert_eq!(
            rate_decode(&tr, MS).unwrap().prediction,
            Prediction::Class(1)
        );

        let silent = SpikeTrain::silent(4, 10);
        let out = rate_decode(&silent, MS).unwrap();
        assert_eq!(out.prediction, Prediction::Class(0));
        assert_eq!(out.latency, None);
    }

    #[test]
    fn rate_latency_crosses_at_seven() {
        let ev: Vec<_> = (0..20).map(|t| (t, 5)).collect();
        let tr = SpikeTrain::from_events(11, 20, &ev).unwrap();
        let out = rate_decode(&tr, MS).unwrap();
        assert_eq!(out.latency, Some(7 * MS));
        assert!(softmax_max(&[6, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]) < 0.99);
    }

    #[test]
    fn latency_first_spike() {
        let tr = SpikeTrain::from_events(5, 12, &[(7, 4), (9, 2)]).unwrap();
        let out = latency_decode(&tr, MS).unwrap();
        assert_eq!(out.prediction, Prediction::Class(4));
        assert_eq!(out.latency, Some(8 * MS));

        let tie = SpikeTrain::from_events(5, 12, &[(5, 3), (5, 1)]).unwrap();
        assert_eq!(
            latency_decode(&tie, MS).unwrap().prediction,
            Prediction::Class(1)
        );

        let silent = latency_decode(&SpikeTrain::silent(5, 3), MS).unwrap();
        assert_eq!(silent.prediction, Prediction::Unknown);
        assert_eq!(silent.latency, None);
    }

    #[test]
    fn settle_time() {
        use Prediction::Class as C;
        assert_eq!(
            hdc_latency(&[C(0), C(0), C(1), C(2), C(2), C(2)], MS).unwrap(),
            4 * MS
        );
        assert_eq!(hdc_latency(&[C(3); 4], MS).unwrap(), MS);
        assert!(hdc_latency(&[], MS).is_err());
    }

    #[test]
    fn accumulate_presence() {
        let tr = SpikeTrain::from_events(5, 12, &[(2, 3), (9, 3)]).unwrap();
        let (h, partials) = hdc_accumulate(&tr);
        assert_eq!(h.count_ones(), 1);
        assert!(h.bit(3));
        assert!(!partials[1].bit(3) && partials[2].bit(3));
    }

    #[test]
    fn classify_with_policy() {
        let cb = ClassCodebook::generate(4, 1024, 7).unwrap();
        let out = hdc_classify(cb.class(2), &cb, None).unwrap();
        assert_eq!(out.prediction, Prediction::Class(2));
        assert_eq!(out.min_distance(), Some(0.0));

        let zero = BinaryHypervector::zeros(1024);
        let policy = UnknownPolicy::new(0.25).unwrap();
        let out = hdc_classify(&zero, &cb, Some(policy)).unwrap();
        assert_eq!(out.prediction, Prediction::Unknown);
        assert!((out.min_distance().unwrap() - 0.5).abs() < 0.06);
        assert!(UnknownPolicy::new(0.0).is_err());
        assert!(UnknownPolicy::new(0.6).is_err());
    }
}
