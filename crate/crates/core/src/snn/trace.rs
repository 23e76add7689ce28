use crate::error::{shape_err, Result};

/// Binary spike raster stored sparsely: the sorted indices of the neurons
/// that spiked at each timestep.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SpikeTrain {
    neurons: usize,
    steps: Vec<Vec<u32>>,
}

impl SpikeTrain {
    pub fn new(neurons: usize) -> Self {
        Self {
            neurons,
            steps: Vec::new(),
        }
    }

    pub fn silent(neurons: usize, steps: usize) -> Self {
        Self {
            neurons,
            steps: vec![Vec::new(); steps],
        }
    }

    /// Builds from `(timestep, neuron)` pairs; duplicates collapse.
    pub fn from_events(neurons: usize, steps: usize, events: &[(usize, usize)]) -> Result<Self> {
        let mut train = Self::silent(neurons, steps);
        for &(t, i) in events {
            if t >= steps || i >= neurons {
                return Err(shape_err(format!(
                    "spike ({t}, {i}) outside [{steps} x {neurons}] train"
                )));
            }
            train.steps[t].push(i as u32);
        }
        for s in &mut train.steps {
            s.sort_unstable();
            s.dedup();
        }
        Ok(train)
    }

    /// Builds from a dense `[T][N]` boolean raster.
    pub fn from_dense(rows: &[Vec<bool>]) -> Result<Self> {
        let neurons = rows.first().map_or(0, Vec::len);
        let mut train = Self::new(neurons);
        for row in rows {
            if row.len() != neurons {
                return Err(shape_err("ragged spike raster"));
            }
            train.push_step(
                row.iter()
                    .enumerate()
                    .filter(|(_, &s)| s)
                    .map(|(i, _)| i as u32)
                    .collect(),
            );
        }
        Ok(train)
    }

    /// Spikes wherever `signal` is at least `threshold`.
    pub fn from_signal(signal: &Signal, threshold: f64) -> Self {
        let mut train = Self::new(signal.neurons());
        for t in 0..signal.steps() {
            train.push_step(
                signal
                    .row(t)
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v >= threshold)
                    .map(|(i, _)| i as u32)
                    .collect(),
            );
        }
        train
    }

    pub(crate) fn push_step(&mut self, spikes: Vec<u32>) {
        debug_assert!(spikes.windows(2).all(|w| w[0] < w[1]));
        self.steps.push(spikes);
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    pub fn steps(&self) -> usize {
        self.steps.len()
    }

    pub fn spikes_at(&self, t: usize) -> &[u32] {
        &self.steps[t]
    }

    pub fn iter_steps(&self) -> impl Iterator<Item = &[u32]> {
        self.steps.iter().map(Vec::as_slice)
    }

    pub fn fired(&self, t: usize, neuron: usize) -> bool {
        self.steps[t].binary_search(&(neuron as u32)).is_ok()
    }

    pub fn total(&self) -> u64 {
        self.steps.iter().map(|s| s.len() as u64).sum()
    }

    pub fn counts(&self) -> Vec<u64> {
        let mut c = vec![0; self.neurons];
        for s in &self.steps {
            for &i in s {
                c[i as usize] += 1;
            }
        }
        c
    }

    /// Timestep of each neuron's first spike.
    pub fn first_spikes(&self) -> Vec<Option<usize>> {
        let mut first = vec![None; self.neurons];
        for (t, s) in self.steps.iter().enumerate() {
            for &i in s {
                first[i as usize].get_or_insert(t);
            }
        }
        first
    }

    /// Dense `[T × N]` 0/1 values, row-major.
    pub fn to_signal(&self) -> Signal {
        let mut sig = Signal::zeros(self.steps(), self.neurons);
        for (t, s) in self.steps.iter().enumerate() {
            for &i in s {
                sig.set(t, i as usize, 1.0);
            }
        }
        sig
    }

    /// The same train played twice back to back.
    pub fn repeated(&self) -> Self {
        let mut steps = self.steps.clone();
        steps.extend(self.steps.iter().cloned());
        Self {
            neurons: self.neurons,
            steps,
        }
    }
}

/// A dense real-valued `[T × N]` output signal, row-major. Hard-mode spikes
/// are 0/1; soft-mode forward passes produce values in `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    steps: usize,
    neurons: usize,
    values: Vec<f64>,
}

impl Signal {
    pub fn zeros(steps: usize, neurons: usize) -> Self {
        Self {
            steps,
            neurons,
            values: vec![0.0; steps * neurons],
        }
    }

    pub fn from_values(steps: usize, neurons: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != steps * neurons {
            return Err(shape_err(format!(
                "{} values for a [{steps} x {neurons}] signal",
                values.len()
            )));
        }
        Ok(Self {
            steps,
            neurons,
            values,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    #[inline]
    pub fn get(&self, t: usize, i: usize) -> f64 {
        self.values[t * self.neurons + i]
    }

    #[inline]
    pub fn set(&mut self, t: usize, i: usize, v: f64) {
        self.values[t * self.neurons + i] = v;
    }

    #[inline]
    pub fn add(&mut self, t: usize, i: usize, v: f64) {
        self.values[t * self.neurons + i] += v;
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.neurons..(t + 1) * self.neurons]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Per-neuron sum over time.
    pub fn totals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.neurons];
        for t in 0..self.steps {
            for (o, v) in out.iter_mut().zip(self.row(t)) {
                *o += v;
            }
        }
        out
    }
}

/// Everything observed while running one sample.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    /// Nonzero input cells per timestep as `(flat index, event count)`.
    pub input: Vec<Vec<(u32, u32)>>,
    /// Spike trains of each LIF population, observed after any max-pool.
    pub layers: Vec<SpikeTrain>,
    /// Synaptic operations attributed to each population (the receiving side).
    pub sops: Vec<u64>,
}

impl RunTrace {
    pub fn steps(&self) -> usize {
        self.input.len()
    }

    pub fn output(&self) -> &SpikeTrain {
        self.layers
            .last()
            .expect("a trace has at least one population")
    }

    pub fn spike_totals(&self) -> Vec<u64> {
        self.layers.iter().map(SpikeTrain::total).collect()
    }

    pub fn total_spikes(&self) -> u64 {
        self.spike_totals().iter().sum()
    }

    pub fn total_sops(&self) -> u64 {
        self.sops.iter().sum()
    }

    pub fn input_events(&self) -> u64 {
        self.input
            .iter()
            .flat_map(|s| s.iter().map(|&(_, c)| c as u64))
            .sum()
    }

    /// The trace with every timestep played twice, input included.
    pub fn repeated(&self) -> Self {
        let mut input = self.input.clone();
        input.extend(self.input.iter().cloned());
        Self {
            input,
            layers: self.layers.iter().map(SpikeTrain::repeated).collect(),
            sops: self.sops.iter().map(|s| 2 * s).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_first_spikes() {
        let tr = SpikeTrain::from_events(3, 5, &[(1, 2), (3, 2), (4, 0), (4, 0)]).unwrap();
        assert_eq!(tr.counts(), vec![1, 0, 2]);
        assert_eq!(tr.first_spikes(), vec![Some(4), None, Some(1)]);
        assert_eq!(tr.total(), 3);
        assert!(tr.fired(3, 2) && !tr.fired(3, 0));
        assert!(SpikeTrain::from_events(3, 5, &[(5, 0)]).is_err());
    }

    #[test]
    fn signal_totals() {
        let tr = SpikeTrain::from_events(2, 3, &[(0, 1), (2, 1)]).unwrap();
        assert_eq!(tr.to_signal().totals(), vec![0.0, 2.0]);
    }
}
