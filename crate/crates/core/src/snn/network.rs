use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::arch::{Architecture, ConvGeometry, LayerSpec, Shape};
use super::lif::{ArctanSurrogate, LifParams};
use crate::error::{Error, Result};

pub(crate) const BN_EPS: f64 = 1e-5;
pub(crate) const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone)]
pub(crate) struct Conv2d {
    pub geom: ConvGeometry,
    /// `[out_c][in_c][ky][kx]`
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    #[inline]
    pub fn w_index(&self, oc: usize, ic: usize, ky: usize, kx: usize) -> usize {
        let k = self.geom.kernel;
        ((oc * self.geom.input.channels + ic) * k + ky) * k + kx
    }

    /// Calls `f(out_index, weight_index)` for every synapse leaving input unit `(ic, y, x)`.
    #[inline]
    pub fn for_each_synapse(&self, ic: usize, y: usize, x: usize, mut f: impl FnMut(usize, usize)) {
        let g = &self.geom;
        let (k, s) = (g.kernel, g.stride);
        let (oh, ow) = (g.output.height, g.output.width);
        for ky in 0..k {
            // oy * s + ky - pad_top == y
            let ny = y + g.pad_top;
            if ny < ky || !(ny - ky).is_multiple_of(s) {
                continue;
            }
            let oy = (ny - ky) / s;
            if oy >= oh {
                continue;
            }
            for kx in 0..k {
                let nx = x + g.pad_left;
                if nx < kx || !(nx - kx).is_multiple_of(s) {
                    continue;
                }
                let ox = (nx - kx) / s;
                if ox >= ow {
                    continue;
                }
                for oc in 0..g.output.channels {
                    f((oc * oh + oy) * ow + ox, self.w_index(oc, ic, ky, kx));
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `[in][out]`, so one input spike touches one contiguous row.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct BatchNorm {
    pub shape: Shape,
    pub gamma: Vec<f64>,
    pub shift: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct MaxPool {
    pub input: Shape,
    pub output: Shape,
    pub window: usize,
}

#[derive(Debug, Clone)]
pub(crate) enum Stage {
    Conv(Conv2d),
    BatchNorm(BatchNorm),
    Lif { size: usize },
    MaxPool(MaxPool),
    Dropout { rate: f64, size: usize },
    Dense(Dense),
}

impl Stage {
    pub fn output_len(&self) -> usize {
        match self {
            Stage::Conv(c) => c.geom.output.len(),
            Stage::BatchNorm(b) => b.shape.len(),
            Stage::Lif { size } | Stage::Dropout { size, .. } => *size,
            Stage::MaxPool(p) => p.output.len(),
            Stage::Dense(d) => d.outputs,
        }
    }
}

/// A LIF population: where it integrates and where its spikes are observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Population {
    /// Stage holding the membranes.
    pub(crate) lif_stage: usize,
    /// Stage whose output is recorded (the LIF itself, or the max-pool after it).
    pub(crate) record_stage: usize,
    /// Connective stage that receives this population's spikes, if any.
    pub(crate) target_stage: Option<usize>,
    pub shape: Shape,
}

/// A compiled network: architecture, weights, LIF parameters.
#[derive(Debug, Clone)]
pub struct Network {
    arch: Architecture,
    lif: LifParams,
    surrogate: ArctanSurrogate,
    seed: u64,
    pub(crate) stages: Vec<Stage>,
    populations: Vec<Population>,
}

impl Network {
    /// Builds the network with uniform `±1/√fan_in` weights drawn from ChaCha8(`seed`),
    /// zero biases and identity batchnorm.
    pub fn new(arch: &Architecture, beta: f64, seed: u64) -> Result<Self> {
        let lif = LifParams::new(beta)?;
        let resolved = arch.resolve()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut stages = Vec::new();
        let mut populations: Vec<Population> = Vec::new();
        let mut i = 0;
        while i < resolved.len() {
            let layer = resolved[i];
            match layer.spec {
                LayerSpec::Conv { .. } => {
                    let geom = layer.conv.expect("resolved conv has geometry");
                    let fan_in = geom.input.channels * geom.kernel * geom.kernel;
                    let n = geom.output.channels * fan_in;
                    link_previous(&mut populations, stages.len());
                    stages.push(Stage::Conv(Conv2d {
                        geom,
                        weight: uniform(&mut rng, n, fan_in),
                        bias: vec![0.0; geom.output.channels],
                    }));
                    if let Some(LayerSpec::BatchNorm) = resolved.get(i + 1).map(|l| l.spec) {
                        let c = geom.output.channels;
                        stages.push(Stage::BatchNorm(BatchNorm {
                            shape: geom.output,
                            gamma: vec![1.0; c],
                            shift: vec![0.0; c],
                            running_mean: vec![0.0; c],
                            running_var: vec![1.0; c],
                        }));
                        i += 1;
                    }
                    stages.push(Stage::Lif {
                        size: geom.output.len(),
                    });
                    populations.push(Population {
                        lif_stage: stages.len() - 1,
                        record_stage: stages.len() - 1,
                        target_stage: None,
                        shape: geom.output,
                    });
                }
                LayerSpec::Dense { units } => {
                    let inputs = layer.input.len();
                    stages.push(Stage::Dense(Dense {
                        inputs,
                        outputs: units,
                        weight: uniform(&mut rng, inputs * units, inputs),
                        bias: vec![0.0; units],
                    }));
                    link_previous(&mut populations, stages.len() - 1);
                    stages.push(Stage::Lif { size: units });
                    populations.push(Population {
                        lif_stage: stages.len() - 1,
                        record_stage: stages.len() - 1,
                        target_stage: None,
                        shape: Shape::flat(units),
                    });
                }
                LayerSpec::MaxPool { window } => {
                    stages.push(Stage::MaxPool(MaxPool {
                        input: layer.input,
                        output: layer.output,
                        window,
                    }));
                    let pop = populations
                        .last_mut()
                        .expect("validated: pool follows population");
                    pop.record_stage = stages.len() - 1;
                    pop.shape = layer.output;
                }
                LayerSpec::Dropout { rate } => stages.push(Stage::Dropout {
                    rate,
                    size: layer.output.len(),
                }),
                LayerSpec::BatchNorm => unreachable!("validated: batchnorm consumed after conv"),
            }
            i += 1;
        }
        Ok(Self {
            arch: arch.clone(),
            lif,
            surrogate: ArctanSurrogate::default(),
            seed,
            stages,
            populations,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn beta(&self) -> f64 {
        self.lif.beta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn surrogate(&self) -> ArctanSurrogate {
        self.surrogate
    }

    pub fn set_surrogate_slope(&mut self, slope: f64) -> Result<()> {
        if !(slope > 0.0 && slope.is_finite()) {
            return Err(Error::Validation(format!(
                "surrogate slope must be > 0, got {slope}"
            )));
        }
        self.surrogate = ArctanSurrogate { slope };
        Ok(())
    }

    pub fn populations(&self) -> &[Population] {
        &self.populations
    }

    pub fn input_shape(&self) -> Shape {
        self.arch.input()
    }

    pub fn output_units(&self) -> usize {
        self.arch.output_units()
    }

    pub fn count_neurons(&self) -> usize {
        self.populations.iter().map(|p| p.shape.len()).sum()
    }

    pub fn count_parameters(&self) -> usize {
        self.arch.count_parameters()
    }

    /// Trainable tensors in a fixed order: per stage, weight then bias
    /// (conv, dense) or gamma then shift (batchnorm).
    pub(crate) fn parameters(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for s in &self.stages {
            match s {
                Stage::Conv(c) => out.extend([c.weight.as_slice(), c.bias.as_slice()]),
                Stage::Dense(d) => out.extend([d.weight.as_slice(), d.bias.as_slice()]),
                Stage::BatchNorm(b) => out.extend([b.gamma.as_slice(), b.shift.as_slice()]),
                _ => {}
            }
        }
        out
    }

    pub(crate) fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for s in &mut self.stages {
            match s {
                Stage::Conv(c) => out.extend([c.weight.as_mut_slice(), c.bias.as_mut_slice()]),
                Stage::Dense(d) => out.extend([d.weight.as_mut_slice(), d.bias.as_mut_slice()]),
                Stage::BatchNorm(b) => out.extend([b.gamma.as_mut_slice(), b.shift.as_mut_slice()]),
                _ => {}
            }
        }
        out
    }

    /// Number of trainable scalars, batchnorm affine included.
    pub fn trainable_len(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }

    /// All trainable scalars flattened in [`Network::parameters`] order.
    pub fn flat_parameters(&self) -> Vec<f64> {
        self.parameters().concat()
    }

    pub fn set_flat_parameters(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.trainable_len() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                flat.len(),
                self.trainable_len()
            )));
        }
        let mut offset = 0;
        for p in self.parameters_mut() {
            p.copy_from_slice(&flat[offset..offset + p.len()]);
            offset += p.len();
        }
        Ok(())
    }

    /// Every stored value (trainable plus batchnorm running statistics) in
    /// layer order; this is the checkpoint body.
    fn state_values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for s in &self.stages {
            match s {
                Stage::Conv(c) => {
                    out.extend(&c.weight);
                    out.extend(&c.bias);
                }
                Stage::Dense(d) => {
                    out.extend(&d.weight);
                    out.extend(&d.bias);
                }
                Stage::BatchNorm(b) => {
                    out.extend(&b.gamma);
                    out.extend(&b.shift);
                    out.extend(&b.running_mean);
                    out.extend(&b.running_var);
                }
                _ => {}
            }
        }
        out
    }

    fn set_state_values(&mut self, values: &[f64]) {
        let mut it = values.iter().copied();
        let mut fill = |dst: &mut [f64]| dst.iter_mut().for_each(|d| *d = it.next().unwrap());
        for s in &mut self.stages {
            match s {
                Stage::Conv(c) => {
                    fill(&mut c.weight);
                    fill(&mut c.bias);
                }
                Stage::Dense(d) => {
                    fill(&mut d.weight);
                    fill(&mut d.bias);
                }
                Stage::BatchNorm(b) => {
                    fill(&mut b.gamma);
                    fill(&mut b.shift);
                    fill(&mut b.running_mean);
                    fill(&mut b.running_var);
                }
                _ => {}
            }
        }
    }

    /// Rounds every stored value to the nearest `f32`, making the network
    /// exactly representable by its checkpoint.
    pub fn round_to_f32(&mut self) {
        let v: Vec<f64> = self
            .state_values()
            .into_iter()
            .map(|x| x as f32 as f64)
            .collect();
        self.set_state_values(&v);
    }

    pub(crate) fn batchnorm_running_mut(&mut self) -> Vec<(&mut Vec<f64>, &mut Vec<f64>)> {
        self.stages
            .iter_mut()
            .filter_map(|s| match s {
                Stage::BatchNorm(b) => Some((&mut b.running_mean, &mut b.running_var)),
                _ => None,
            })
            .collect()
    }

    /// Stable 64-bit fingerprint of architecture notation, input shape and padding.
    pub fn architecture_hash(&self) -> u64 {
        architecture_hash(&self.arch)
    }

    /// Checkpoint layout (little-endian):
    /// `"SNNC" | u32 version | u64 arch hash | f64 beta | u64 seed | u64 n | n × f32`.
    pub fn checkpoint_bytes(&self) -> Vec<u8> {
        let values = self.state_values();
        let mut out = Vec::with_capacity(40 + 4 * values.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.architecture_hash().to_le_bytes());
        out.extend_from_slice(&self.lif.beta.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(values.len() as u64).to_le_bytes());
        for v in values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_checkpoint_bytes(arch: &Architecture, bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 40 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::Format("missing SNNC checkpoint header".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let hash = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        if hash != architecture_hash(arch) {
            return Err(Error::Format(format!(
                "checkpoint was written for a different architecture than {arch}"
            )));
        }
        let beta = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let seed = u64::from_le_bytes(bytes[24..32].try_into().unwrap());
        let n = u64::from_le_bytes(bytes[32..40].try_into().unwrap()) as usize;
        let body = &bytes[40..];
        let mut net = Network::new(arch, beta, seed)?;
        if body.len() != 4 * n || n != net.state_values().len() {
            return Err(Error::Format(format!(
                "checkpoint body holds {} bytes for {n} values; network stores {}",
                body.len(),
                net.state_values().len()
            )));
        }
        let values: Vec<f64> = body
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        net.set_state_values(&values);
        Ok(net)
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.checkpoint_bytes())?;
        Ok(())
    }

    pub fn load_checkpoint(arch: &Architecture, path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint_bytes(arch, &fs::read(path)?)
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"SNNC";
const CHECKPOINT_VERSION: u32 = 1;

fn architecture_hash(arch: &Architecture) -> u64 {
    let key = format!("{arch}");
    let digest = Sha256::digest(key.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, fan_in: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
}

fn link_previous(populations: &mut [Population], target: usize) {
    if let Some(prev) = populations.last_mut() {
        prev.target_stage = Some(target);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::arch::{dvs_gesture, ModelVariant, Padding};

    #[test]
    fn stage_layout_inserts_lif_after_batchnorm() {
        let arch =
            Architecture::parse("4c3-bn-2p-0.2d-6", Shape::new(2, 8, 8), Padding::Valid).unwrap();
        let net = Network::new(&arch, 0.9, 1).unwrap();
        let kinds: Vec<&str> = net
            .stages
            .iter()
            .map(|s| match s {
                Stage::Conv(_) => "conv",
                Stage::BatchNorm(_) => "bn",
                Stage::Lif { .. } => "lif",
                Stage::MaxPool(_) => "pool",
                Stage::Dropout { .. } => "drop",
                Stage::Dense(_) => "dense",
            })
            .collect();
        assert_eq!(kinds, ["conv", "bn", "lif", "pool", "drop", "dense", "lif"]);
        let pops = net.populations();
        assert_eq!(pops[0].lif_stage, 2);
        assert_eq!(pops[0].record_stage, 3);
        assert_eq!(pops[0].target_stage, Some(5));
        assert_eq!(pops[1].target_stage, None);
    }

    #[test]
    fn neuron_count_matches_architecture() {
        let arch = dvs_gesture(ModelVariant::Hdc, 1024);
        let net = Network::new(&arch, 0.9, 0).unwrap();
        assert_eq!(net.count_neurons(), arch.count_neurons());
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let arch = Architecture::parse("4c3-5", Shape::new(2, 6, 6), Padding::Same).unwrap();
        let a = Network::new(&arch, 0.5, 3).unwrap();
        let b = Network::new(&arch, 0.5, 3).unwrap();
        let c = Network::new(&arch, 0.5, 4).unwrap();
        assert_eq!(a.flat_parameters(), b.flat_parameters());
        assert_ne!(a.flat_parameters(), c.flat_parameters());
        let bound = 1.0 / 18f64.sqrt();
        if let Stage::Conv(conv) = &a.stages[0] {
            assert!(conv.weight.iter().all(|w| w.abs() <= bound));
            assert!(conv.bias.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn checkpoint_round_trip_after_f32_rounding() {
        let arch = Architecture::parse("4c3-bn-2p-5", Shape::new(2, 6, 6), Padding::Same).unwrap();
        let mut net = Network::new(&arch, 0.7, 9).unwrap();
        net.round_to_f32();
        let back = Network::from_checkpoint_bytes(&arch, &net.checkpoint_bytes()).unwrap();
        assert_eq!(back.state_values(), net.state_values());
        assert_eq!(back.beta(), 0.7);
        assert_eq!(back.seed(), 9);

        let other = Architecture::parse("4c3-bn-2p-6", Shape::new(2, 6, 6), Padding::Same).unwrap();
        assert!(Network::from_checkpoint_bytes(&other, &net.checkpoint_bytes()).is_err());
    }
}
