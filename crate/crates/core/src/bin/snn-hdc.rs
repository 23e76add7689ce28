use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use snn_hdc::decoders::{DecoderKind, UnknownPolicy};
use snn_hdc::events::FrameSequence;
use snn_hdc::harness::{
    aggregate, capacity_table, default_capacity_dims, evaluate_model, experiment_codebook,
    load_dataset, report_text, run_experiment, run_unknown_experiment, train_model, write_capacity,
    write_delta_sweep, write_report, write_synthetic, DataSource, ExperimentConfig, TrainedModel,
};
use snn_hdc::hdc::ClassCodebook;
use snn_hdc::snn::{Architecture, Network, Padding, Shape};
use snn_hdc::train::{soft_gradient_check, Objective, Sample, TrainHistory, DEFAULT_STEP};

#[derive(Parser)]
#[command(
    name = "snn-hdc",
    version,
    about = "Spiking networks with rate, latency and hyperdimensional decoding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and save its checkpoint
    Train(Common),
    /// Evaluate a saved checkpoint on the test split
    Eval(EvalArgs),
    /// Train and evaluate every configured decoder and seed, then write the report
    Report(Common),
    /// Train on the known classes and sweep the unknown-class threshold
    SweepDelta(Common),
    /// Print the hypervector capacity table
    Capacity(Common),
    /// Write the synthetic dataset as EVS1 files plus a manifest
    SynthData(Common),
    /// Compare BPTT gradients against finite differences on a toy network
    Gradcheck(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment config; the built-in synthetic setup when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_decoder)]
    decoder: Option<DecoderKind>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    dims: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Checkpoint to load; defaults to `<out>/model.snnc`
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

fn parse_decoder(s: &str) -> std::result::Result<DecoderKind, String> {
    s.parse().map_err(|e: snn_hdc::Error| e.to_string())
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seeds = vec![s];
    }
    if let Some(d) = c.decoder {
        cfg.decoders = vec![d];
    }
    if let Some(b) = c.beta {
        cfg.beta = b;
    }
    if let Some(d) = c.dims {
        cfg.dims = d;
    }
    if let Some(d) = c.delta {
        cfg.delta = Some(d);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_metadata(dir: &Path, cfg: &ExperimentConfig, model: &TrainedModel) -> Result<()> {
    let meta = json!({
        "config": cfg,
        "decoder": model.decoder,
        "seed": model.seed,
        "architecture": model.net.architecture().to_string(),
        "architecture_hash": format!("{:016x}", model.net.architecture_hash()),
        "neurons": model.net.count_neurons(),
        "parameters": model.net.count_parameters(),
        "surrogate": { "kind": "arctan", "slope": model.net.surrogate().slope },
        "rng": "ChaCha8 (rand_chacha), seeded with seed_from_u64",
        "weight_init": "uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero bias",
        "version": env!("CARGO_PKG_VERSION"),
    });
    fs::write(dir.join("run.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

fn train(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let data = load_dataset(&cfg)?;
    let decoder = cfg.decoders[0];
    let seed = cfg.seeds[0];
    let codebook = (decoder == DecoderKind::Hdc)
        .then(|| experiment_codebook(&cfg, data.classes))
        .transpose()?;
    eprintln!(
        "training {decoder} model, seed {seed}, on {} samples ({} classes)",
        data.train.len(),
        data.classes
    );
    let model = train_model(&cfg, &data, &data.train, decoder, seed, codebook)?;
    fs::create_dir_all(&c.out)?;
    model.net.save_checkpoint(c.out.join("model.snnc"))?;
    if let Some(cb) = &model.codebook {
        cb.save(c.out.join("codebook.hdcb"))?;
    }
    model.history.write_csv(c.out.join("history.csv"))?;
    write_metadata(&c.out, &cfg, &model)?;
    if let Some(last) = model.history.last() {
        println!(
            "epoch {}: loss {:.5}, train accuracy {:.2}%",
            last.epoch,
            last.train_loss,
            100.0 * last.train_accuracy
        );
    }
    println!(
        "checkpoint written to {}",
        c.out.join("model.snnc").display()
    );
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let c = &a.common;
    let cfg = load_config(c)?;
    let data = load_dataset(&cfg)?;
    let decoder = cfg.decoders[0];
    let arch = cfg.architecture_for(decoder, data.classes, data.input)?;
    let path = a
        .checkpoint
        .clone()
        .unwrap_or_else(|| c.out.join("model.snnc"));
    let net = Network::load_checkpoint(&arch, &path)
        .with_context(|| format!("loading {}", path.display()))?;
    let codebook = if decoder == DecoderKind::Hdc {
        let p = path.with_file_name("codebook.hdcb");
        Some(if p.exists() {
            ClassCodebook::load(&p)?
        } else {
            experiment_codebook(&cfg, data.classes)?
        })
    } else {
        None
    };
    let model = TrainedModel {
        decoder,
        seed: net.seed(),
        net,
        codebook,
        history: TrainHistory::default(),
    };
    let policy = cfg.delta.map(UnknownPolicy::new).transpose()?;
    let records = evaluate_model(&model, &data.test, policy)?;
    let report = aggregate(&cfg.name, cfg.clip_ms, &[&model], &records)?;
    write_report(&c.out, &report, &records, &[])?;
    print!("{}", report_text(&report));
    Ok(())
}

fn report(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let out = run_experiment(&cfg)?;
    write_report(&c.out, &out.report, &out.records, &out.models)?;
    print!("{}", report_text(&out.report));
    println!("report written to {}", c.out.display());
    Ok(())
}

fn sweep(c: &Common) -> Result<()> {
    let mut cfg = load_config(c)?;
    if let Some(d) = c.delta {
        cfg.deltas = vec![d];
    }
    let (rows, _) = run_unknown_experiment(&cfg, cfg.seeds[0])?;
    write_delta_sweep(&c.out, &rows)?;
    println!(
        "{:>6}  {:>12}  {:>12}  {:>13}",
        "delta", "full dataset", "known classes", "unknown class"
    );
    for r in &rows {
        println!(
            "{:>6.3}  {:>11.2}%  {:>12.2}%  {:>12.2}%",
            r.delta,
            100.0 * r.full_accuracy,
            100.0 * r.known_accuracy,
            100.0 * r.unknown_accuracy
        );
    }
    Ok(())
}

fn capacity(c: &Common) -> Result<()> {
    let dims = c.dims.map_or_else(default_capacity_dims, |d| vec![d]);
    let table = capacity_table(&dims)?;
    println!("{table}");
    if c.out != Path::new("out") || c.out.exists() {
        write_capacity(&c.out, &table)?;
    }
    Ok(())
}

fn synth(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let DataSource::Synthetic(mut s) = cfg.data.clone() else {
        bail!("synth-data needs a config with synthetic data");
    };
    if let Some(seed) = c.seed {
        s.seed = seed;
    }
    let n = write_synthetic(&s, &c.out, cfg.test_every)?;
    println!(
        "wrote {n} EVS1 files and manifest.csv to {}",
        c.out.display()
    );
    Ok(())
}

fn gradcheck(c: &Common) -> Result<()> {
    let seed = c.seed.unwrap_or(0);
    let decoders = c.decoder.map_or_else(
        || vec![DecoderKind::Rate, DecoderKind::Latency, DecoderKind::Hdc],
        |d| vec![d],
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (side, steps) = (6, 12);
    let counts = (0..steps * 2 * side * side)
        .map(|_| {
            if rng.gen_bool(0.3) {
                rng.gen_range(1..3)
            } else {
                0
            }
        })
        .collect();
    let sample = Sample {
        frames: FrameSequence::from_counts(steps, side, side, Duration::from_millis(1), counts)?,
        label: 1,
        group: None,
    };
    let dims = c.dims.unwrap_or(16);
    let codebook = ClassCodebook::generate(3, dims, seed)?;
    let mut worst: f64 = 0.0;
    for d in decoders {
        let head = if d == DecoderKind::Hdc { dims } else { 3 };
        let arch = Architecture::parse(
            &format!("2c3-bn-2p-0.2d-{head}"),
            Shape::new(2, side, side),
            Padding::Valid,
        )?;
        let net = Network::new(&arch, c.beta.unwrap_or(0.8), seed)?;
        let check = soft_gradient_check(
            &net,
            &Objective::new(d, Some(&codebook))?,
            &sample,
            DEFAULT_STEP,
        )?;
        println!(
            "{d:<8} {} parameters, max relative error {:.3e}",
            net.trainable_len(),
            check.max_relative_error
        );
        worst = worst.max(check.max_relative_error);
    }
    if worst > 1e-4 {
        bail!("gradient check failed: max relative error {worst:.3e} > 1e-4");
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(c) => train(&c),
        Command::Eval(a) => eval(&a),
        Command::Report(c) => report(&c),
        Command::SweepDelta(c) => sweep(&c),
        Command::Capacity(c) => capacity(&c),
        Command::SynthData(c) => synth(&c),
        Command::Gradcheck(c) => gradcheck(&c),
    }
}
