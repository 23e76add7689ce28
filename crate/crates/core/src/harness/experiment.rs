use serde::Serialize;

use super::config::{load_dataset, Dataset, ExperimentConfig};
use crate::decoders::{decode, hdc_accumulate, DecoderKind, Prediction, UnknownPolicy};
use crate::error::{Error, Result};
use crate::events::FrameSequence;
use crate::hdc::ClassCodebook;
use crate::snn::{forward_batch, Mode, Network, RunTrace};
use crate::train::{bptt_train, Objective, Sample, TrainHistory};
use crate::ENERGY_PER_SOP_J;

/// A trained network with what is needed to decode it.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub decoder: DecoderKind,
    pub seed: u64,
    pub net: Network,
    pub codebook: Option<ClassCodebook>,
    pub history: TrainHistory,
}

/// Evaluation of one test sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRecord {
    pub seed: u64,
    pub decoder: DecoderKind,
    pub sample: usize,
    pub true_class: usize,
    pub predicted: Prediction,
    pub correct: bool,
    pub latency_ms: Option<f64>,
    pub min_distance: Option<f64>,
    pub spikes: Vec<u64>,
    pub sops: Vec<u64>,
}

/// Codebook over all `classes` so codeword `i` always belongs to class `i`.
pub fn experiment_codebook(cfg: &ExperimentConfig, classes: usize) -> Result<ClassCodebook> {
    ClassCodebook::generate(classes, cfg.dims, cfg.codebook_seed)
}

/// Builds and trains one model. `codebook` is required for hdc and must have
/// one codeword per label in `train`.
pub fn train_model(
    cfg: &ExperimentConfig,
    data: &Dataset,
    train: &[Sample],
    decoder: DecoderKind,
    seed: u64,
    codebook: Option<ClassCodebook>,
) -> Result<TrainedModel> {
    let classes = codebook.as_ref().map_or(data.classes, ClassCodebook::len);
    let arch = cfg.architecture_for(decoder, classes, data.input)?;
    let mut net = Network::new(&arch, cfg.beta, seed)?;
    let objective = Objective::new(decoder, codebook.as_ref())?;
    let mut tc = cfg.train.clone();
    tc.seed = seed;
    let history = bptt_train(&mut net, train, None, &tc, &objective)?;
    net.round_to_f32();
    Ok(TrainedModel {
        decoder,
        seed,
        net,
        codebook,
        history,
    })
}

fn traces(net: &Network, samples: &[Sample]) -> Result<Vec<RunTrace>> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(32) {
        let frames: Vec<&FrameSequence> = chunk.iter().map(|s| &s.frames).collect();
        out.extend(forward_batch(net, &frames, Mode::Eval)?);
    }
    Ok(out)
}

/// Runs every sample through the eval-mode network and decodes it.
pub fn evaluate_model(
    model: &TrainedModel,
    samples: &[Sample],
    policy: Option<UnknownPolicy>,
) -> Result<Vec<SampleRecord>> {
    let policy = if model.decoder == DecoderKind::Hdc {
        policy
    } else {
        None
    };
    traces(&model.net, samples)?
        .iter()
        .zip(samples)
        .enumerate()
        .map(|(i, (trace, s))| {
            let d = decode(
                model.decoder,
                trace.output(),
                model.codebook.as_ref(),
                policy,
                s.frames.dt(),
            )?;
            Ok(SampleRecord {
                seed: model.seed,
                decoder: model.decoder,
                sample: i,
                true_class: s.label,
                predicted: d.prediction,
                correct: d.prediction == Prediction::Class(s.label),
                latency_ms: d.latency_ms(),
                min_distance: d.min_distance(),
                spikes: trace.spike_totals(),
                sops: trace.sops.clone(),
            })
        })
        .collect()
}

/// Per-seed aggregate of one decoder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub accuracy: f64,
    pub mean_spikes: f64,
    pub mean_sops_per_layer: Vec<f64>,
    pub latency_mean_ms: Option<f64>,
    pub latency_sd_ms: Option<f64>,
    pub undecided: usize,
}

/// One report row. Relative columns are ratios to the hdc row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelMetrics {
    pub decoder: DecoderKind,
    pub architecture: String,
    pub neurons: usize,
    pub parameters: usize,
    pub per_seed: Vec<SeedMetrics>,
    pub accuracy_mean: f64,
    pub accuracy_min: f64,
    pub accuracy_max: f64,
    pub accuracy_sd: f64,
    pub mean_spikes: f64,
    pub mean_sops_per_layer: Vec<f64>,
    pub mean_sops: f64,
    pub energy_per_layer_j: Vec<f64>,
    pub energy_j: f64,
    pub latency_mean_ms: Option<f64>,
    pub latency_sd_ms: Option<f64>,
    pub undecided: usize,
    pub evaluated: usize,
    pub relative_spikes: Option<f64>,
    pub relative_energy: Option<f64>,
    pub relative_latency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub name: String,
    pub clip_ms: u64,
    pub rows: Vec<ModelMetrics>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
fn sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn layer_means(records: &[&SampleRecord]) -> Vec<f64> {
    let layers = records.first().map_or(0, |r| r.sops.len());
    (0..layers)
        .map(|l| records.iter().map(|r| r.sops[l] as f64).sum::<f64>() / records.len() as f64)
        .collect()
}

fn latency_stats(records: &[&SampleRecord]) -> (Option<f64>, Option<f64>, usize) {
    let lat: Vec<f64> = records.iter().filter_map(|r| r.latency_ms).collect();
    let undecided = records.len() - lat.len();
    if lat.is_empty() {
        (None, None, undecided)
    } else {
        (Some(mean(&lat)), Some(sd(&lat)), undecided)
    }
}

fn ratio(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if b != 0.0 => Some(a / b),
        _ => None,
    }
}

fn apply_relative(rows: &mut [ModelMetrics]) {
    let reference = rows.iter().find(|r| r.decoder == DecoderKind::Hdc).cloned();
    for r in rows.iter_mut() {
        let Some(h) = &reference else {
            r.relative_spikes = None;
            r.relative_energy = None;
            r.relative_latency = None;
            continue;
        };
        r.relative_spikes = ratio(Some(r.mean_spikes), Some(h.mean_spikes));
        r.relative_energy = ratio(Some(r.energy_j), Some(h.energy_j));
        r.relative_latency = ratio(r.latency_mean_ms, h.latency_mean_ms);
    }
}

/// Aggregates per-sample records into report rows, one per decoder in
/// `models` order.
pub fn aggregate(
    name: &str,
    clip_ms: u64,
    models: &[&TrainedModel],
    records: &[SampleRecord],
) -> Result<MetricsReport> {
    let mut decoders: Vec<DecoderKind> = Vec::new();
    for m in models {
        if !decoders.contains(&m.decoder) {
            decoders.push(m.decoder);
        }
    }
    let mut rows = Vec::new();
    for decoder in decoders {
        let mine: Vec<&SampleRecord> = records.iter().filter(|r| r.decoder == decoder).collect();
        if mine.is_empty() {
            return Err(Error::Validation(format!(
                "no evaluated samples for {decoder}"
            )));
        }
        let net = &models
            .iter()
            .find(|m| m.decoder == decoder)
            .expect("decoder taken from models")
            .net;
        let mut seeds: Vec<u64> = mine.iter().map(|r| r.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        let per_seed: Vec<SeedMetrics> = seeds
            .iter()
            .map(|&seed| {
                let rs: Vec<&SampleRecord> =
                    mine.iter().copied().filter(|r| r.seed == seed).collect();
                let (lm, ls, undecided) = latency_stats(&rs);
                SeedMetrics {
                    seed,
                    accuracy: rs.iter().filter(|r| r.correct).count() as f64 / rs.len() as f64,
                    mean_spikes: rs
                        .iter()
                        .map(|r| r.spikes.iter().sum::<u64>() as f64)
                        .sum::<f64>()
                        / rs.len() as f64,
                    mean_sops_per_layer: layer_means(&rs),
                    latency_mean_ms: lm,
                    latency_sd_ms: ls,
                    undecided,
                }
            })
            .collect();
        let acc: Vec<f64> = per_seed.iter().map(|s| s.accuracy).collect();
        let mean_sops_per_layer = layer_means(&mine);
        let mean_sops: f64 = mean_sops_per_layer.iter().sum();
        let (latency_mean_ms, latency_sd_ms, undecided) = latency_stats(&mine);
        rows.push(ModelMetrics {
            decoder,
            architecture: net.architecture().notation(),
            neurons: net.count_neurons(),
            parameters: net.count_parameters(),
            accuracy_mean: mean(&acc),
            accuracy_min: acc.iter().copied().fold(f64::INFINITY, f64::min),
            accuracy_max: acc.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            accuracy_sd: sd(&acc),
            per_seed,
            mean_spikes: mine
                .iter()
                .map(|r| r.spikes.iter().sum::<u64>() as f64)
                .sum::<f64>()
                / mine.len() as f64,
            energy_per_layer_j: mean_sops_per_layer
                .iter()
                .map(|s| s * ENERGY_PER_SOP_J)
                .collect(),
            energy_j: mean_sops * ENERGY_PER_SOP_J,
            mean_sops_per_layer,
            mean_sops,
            latency_mean_ms,
            latency_sd_ms,
            undecided,
            evaluated: mine.len(),
            relative_spikes: None,
            relative_energy: None,
            relative_latency: None,
        });
    }
    apply_relative(&mut rows);
    let report = MetricsReport {
        name: name.to_string(),
        clip_ms,
        rows,
    };
    report.audit()?;
    Ok(report)
}

impl MetricsReport {
    /// Recomputes every derived column from the absolute ones and fails on
    /// any disagreement.
    pub fn audit(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(format!("report audit: {m}")));
        for r in &self.rows {
            if r.energy_j != r.mean_sops * ENERGY_PER_SOP_J {
                return fail(format!("{} energy is not SOPs x 26 pJ", r.decoder));
            }
            for (e, s) in r.energy_per_layer_j.iter().zip(&r.mean_sops_per_layer) {
                if *e != s * ENERGY_PER_SOP_J {
                    return fail(format!("{} layer energy is not SOPs x 26 pJ", r.decoder));
                }
            }
        }
        let mut check = self.rows.clone();
        apply_relative(&mut check);
        for (a, b) in check.iter().zip(&self.rows) {
            if (a.relative_spikes, a.relative_energy, a.relative_latency)
                != (b.relative_spikes, b.relative_energy, b.relative_latency)
            {
                return fail(format!(
                    "{} relative columns do not match the hdc row",
                    a.decoder
                ));
            }
        }
        Ok(())
    }

    pub fn row(&self, decoder: DecoderKind) -> Option<&ModelMetrics> {
        self.rows.iter().find(|r| r.decoder == decoder)
    }
}

/// Everything a full run produces.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: MetricsReport,
    pub records: Vec<SampleRecord>,
    pub models: Vec<TrainedModel>,
}

/// Trains every configured decoder for every seed, evaluates the test split
/// and aggregates the report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let data = load_dataset(cfg)?;
    let policy = cfg.delta.map(UnknownPolicy::new).transpose()?;
    let mut models = Vec::new();
    let mut records = Vec::new();
    for &seed in &cfg.seeds {
        for &decoder in &cfg.decoders {
            let codebook = (decoder == DecoderKind::Hdc)
                .then(|| experiment_codebook(cfg, data.classes))
                .transpose()?;
            let model = train_model(cfg, &data, &data.train, decoder, seed, codebook)?;
            records.extend(evaluate_model(&model, &data.test, policy)?);
            models.push(model);
        }
    }
    let refs: Vec<&TrainedModel> = models.iter().collect();
    let report = aggregate(&cfg.name, cfg.clip_ms, &refs, &records)?;
    Ok(ExperimentOutput {
        report,
        records,
        models,
    })
}

/// One row of the unknown-class sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub delta: f64,
    /// Correct over every sample, known and unknown.
    pub full_accuracy: f64,
    /// Known-class samples matched to their class below the threshold.
    pub known_accuracy: f64,
    /// Held-out-class samples rejected by every codeword.
    pub unknown_accuracy: f64,
    pub known_samples: usize,
    pub unknown_samples: usize,
}

/// Evaluates an hdc model whose codeword `i` stands for class
/// `known_classes[i]` over samples labeled in the original class space.
pub fn sweep_delta(
    net: &Network,
    codebook: &ClassCodebook,
    known_classes: &[usize],
    samples: &[Sample],
    deltas: &[f64],
) -> Result<Vec<DeltaRow>> {
    if codebook.len() != known_classes.len() {
        return Err(Error::Validation(format!(
            "{} codewords for {} known classes",
            codebook.len(),
            known_classes.len()
        )));
    }
    let policies = deltas
        .iter()
        .map(|&d| UnknownPolicy::new(d))
        .collect::<Result<Vec<_>>>()?;
    // nearest codeword and its distance, per sample
    let nearest: Vec<(bool, f64, bool)> = traces(net, samples)?
        .iter()
        .zip(samples)
        .map(|(trace, s)| {
            let (h, _) = hdc_accumulate(trace.output());
            let d = codebook.distances(&h)?;
            let mut best = 0;
            for (i, &v) in d.iter().enumerate() {
                if v < d[best] {
                    best = i;
                }
            }
            let known = known_classes.contains(&s.label);
            Ok((known && known_classes[best] == s.label, d[best], known))
        })
        .collect::<Result<_>>()?;
    let known_n = nearest.iter().filter(|n| n.2).count();
    let unknown_n = nearest.len() - known_n;
    Ok(policies
        .iter()
        .map(|p| {
            let known_ok = nearest
                .iter()
                .filter(|&&(hit, d, k)| k && hit && d < p.delta())
                .count();
            let unknown_ok = nearest
                .iter()
                .filter(|&&(_, d, k)| !k && d >= p.delta())
                .count();
            let frac = |a: usize, n: usize| if n == 0 { 0.0 } else { a as f64 / n as f64 };
            DeltaRow {
                delta: p.delta(),
                full_accuracy: frac(known_ok + unknown_ok, nearest.len()),
                known_accuracy: frac(known_ok, known_n),
                unknown_accuracy: frac(unknown_ok, unknown_n),
                known_samples: known_n,
                unknown_samples: unknown_n,
            }
        })
        .collect())
}

/// Trains an hdc model on the known classes only and sweeps the
/// configured thresholds over the full test split.
pub fn run_unknown_experiment(
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(Vec<DeltaRow>, TrainedModel)> {
    let data = load_dataset(cfg)?;
    let known = cfg.known_classes_or_default(data.classes);
    if known.is_empty() || known.len() >= data.classes {
        return Err(Error::Config(
            "the unknown-class experiment needs at least one known and one held-out class".into(),
        ));
    }
    let codebook = experiment_codebook(cfg, data.classes)?.subset(&known)?;
    let train: Vec<Sample> = data
        .train
        .iter()
        .filter_map(|s| {
            known.iter().position(|&k| k == s.label).map(|i| Sample {
                label: i,
                ..s.clone()
            })
        })
        .collect();
    let model = train_model(cfg, &data, &train, DecoderKind::Hdc, seed, Some(codebook))?;
    let rows = sweep_delta(
        &model.net,
        model.codebook.as_ref().expect("hdc model has a codebook"),
        &known,
        &data.test,
        &cfg.deltas,
    )?;
    Ok((rows, model))
}
