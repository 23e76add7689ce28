//! Report files. Everything written here is a pure function of the results,
//! so a rerun with the same configuration produces identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::capacity::CapacityTable;
use super::experiment::{DeltaRow, MetricsReport, SampleRecord, TrainedModel};
use crate::error::Result;

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or(String::new(), |x| format!("{x:.prec$}"))
}

fn join(v: &[f64], prec: usize) -> String {
    v.iter()
        .map(|x| format!("{x:.prec$}"))
        .collect::<Vec<_>>()
        .join(";")
}

/// `metrics.csv`: one aggregate row per decoder followed by one row per seed.
pub fn metrics_csv(report: &MetricsReport) -> String {
    let mut s = String::from(
        "decoder,seed,architecture,neurons,parameters,accuracy_mean,accuracy_min,accuracy_max,accuracy_sd,\
         mean_spikes,mean_sops,sops_per_layer,energy_j,energy_per_layer_j,latency_mean_ms,latency_sd_ms,\
         undecided,relative_spikes,relative_energy,relative_latency\n",
    );
    for r in &report.rows {
        writeln!(
            s,
            "{},all,{},{},{},{:.6},{:.6},{:.6},{:.6},{:.3},{:.3},{},{:.6e},{},{},{},{},{},{},{}",
            r.decoder,
            r.architecture,
            r.neurons,
            r.parameters,
            r.accuracy_mean,
            r.accuracy_min,
            r.accuracy_max,
            r.accuracy_sd,
            r.mean_spikes,
            r.mean_sops,
            join(&r.mean_sops_per_layer, 3),
            r.energy_j,
            r.energy_per_layer_j
                .iter()
                .map(|e| format!("{e:.6e}"))
                .collect::<Vec<_>>()
                .join(";"),
            opt(r.latency_mean_ms, 3),
            opt(r.latency_sd_ms, 3),
            r.undecided,
            opt(r.relative_spikes, 6),
            opt(r.relative_energy, 6),
            opt(r.relative_latency, 6),
        )
        .unwrap();
        for p in &r.per_seed {
            let sops: f64 = p.mean_sops_per_layer.iter().sum();
            writeln!(
                s,
                "{},{},{},{},{},{:.6},{:.6},{:.6},,{:.3},{:.3},{},{:.6e},,{},{},{},,,",
                r.decoder,
                p.seed,
                r.architecture,
                r.neurons,
                r.parameters,
                p.accuracy,
                p.accuracy,
                p.accuracy,
                p.mean_spikes,
                sops,
                join(&p.mean_sops_per_layer, 3),
                sops * crate::ENERGY_PER_SOP_J,
                opt(p.latency_mean_ms, 3),
                opt(p.latency_sd_ms, 3),
                p.undecided,
            )
            .unwrap();
        }
    }
    s
}

/// `per_sample.csv`.
pub fn per_sample_csv(records: &[SampleRecord]) -> String {
    let mut s = String::from(
        "seed,decoder,sample,true_class,predicted,correct,latency_ms,min_distance,spikes,sops\n",
    );
    for r in records {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.seed,
            r.decoder,
            r.sample,
            r.true_class,
            r.predicted,
            u8::from(r.correct),
            opt(r.latency_ms, 3),
            opt(r.min_distance, 6),
            r.spikes.iter().sum::<u64>(),
            r.sops.iter().sum::<u64>(),
        )
        .unwrap();
    }
    s
}

/// Per-layer spikes, SOPs and energy for plotting.
pub fn layer_series_csv(report: &MetricsReport, records: &[SampleRecord]) -> String {
    let mut s = String::from("decoder,layer,mean_spikes,mean_sops,energy_j\n");
    for r in &report.rows {
        let mine: Vec<&SampleRecord> = records.iter().filter(|x| x.decoder == r.decoder).collect();
        for (l, sops) in r.mean_sops_per_layer.iter().enumerate() {
            let spikes = mine.iter().map(|x| x.spikes[l] as f64).sum::<f64>() / mine.len() as f64;
            writeln!(
                s,
                "{},{},{:.3},{:.3},{:.6e}",
                r.decoder,
                l + 1,
                spikes,
                sops,
                r.energy_per_layer_j[l]
            )
            .unwrap();
        }
    }
    s
}

pub fn delta_csv(rows: &[DeltaRow]) -> String {
    let mut s = String::from(
        "delta,full_dataset,known_classes,unknown_class,known_samples,unknown_samples\n",
    );
    for r in rows {
        writeln!(
            s,
            "{:.4},{:.6},{:.6},{:.6},{},{}",
            r.delta,
            r.full_accuracy,
            r.known_accuracy,
            r.unknown_accuracy,
            r.known_samples,
            r.unknown_samples
        )
        .unwrap();
    }
    s
}

/// Human-readable table.
pub fn report_text(report: &MetricsReport) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "experiment: {} (clip {} ms)",
        report.name, report.clip_ms
    )
    .unwrap();
    writeln!(
        s,
        "{:<8} {:>8} {:>9} {:>18} {:>11} {:>12} {:>11} {:>17} {:>8} {:>8} {:>8}",
        "decoder",
        "neurons",
        "params",
        "accuracy",
        "spikes",
        "SOPs",
        "energy",
        "latency (ms)",
        "rel.spk",
        "rel.E",
        "rel.lat"
    )
    .unwrap();
    for r in &report.rows {
        let acc = format!(
            "{:.2}% [{:.2},{:.2}]",
            100.0 * r.accuracy_mean,
            100.0 * r.accuracy_min,
            100.0 * r.accuracy_max
        );
        let lat = match (r.latency_mean_ms, r.latency_sd_ms) {
            (Some(m), Some(sd)) => format!("{m:.2} ± {sd:.2}"),
            _ => "n/a".to_string(),
        };
        let rel = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
        writeln!(
            s,
            "{:<8} {:>8} {:>9} {:>18} {:>11.1} {:>12.1} {:>9.3e} J {:>17} {:>8} {:>8} {:>8}",
            r.decoder.to_string(),
            r.neurons,
            r.parameters,
            acc,
            r.mean_spikes,
            r.mean_sops,
            r.energy_j,
            lat,
            rel(r.relative_spikes),
            rel(r.relative_energy),
            rel(r.relative_latency)
        )
        .unwrap();
        if r.undecided > 0 {
            writeln!(
                s,
                "         {} of {} samples never reached a decision",
                r.undecided, r.evaluated
            )
            .unwrap();
        }
    }
    s
}

/// Writes `metrics.csv`, `per_sample.csv`, `report.txt` and the
/// `series_*.csv` files into `dir`.
pub fn write_report(
    dir: &Path,
    report: &MetricsReport,
    records: &[SampleRecord],
    models: &[TrainedModel],
) -> Result<()> {
    fs::create_dir_all(dir)?;
    report.audit()?;
    fs::write(dir.join("metrics.csv"), metrics_csv(report))?;
    fs::write(dir.join("per_sample.csv"), per_sample_csv(records))?;
    fs::write(dir.join("report.txt"), report_text(report))?;
    fs::write(
        dir.join("series_layers.csv"),
        layer_series_csv(report, records),
    )?;
    for m in models {
        fs::write(
            dir.join(format!("series_history_{}_seed{}.csv", m.decoder, m.seed)),
            m.history.to_csv(),
        )?;
    }
    Ok(())
}

pub fn write_delta_sweep(dir: &Path, rows: &[DeltaRow]) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("series_delta.csv"), delta_csv(rows))?;
    Ok(())
}

pub fn write_capacity(dir: &Path, table: &CapacityTable) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("series_capacity.csv"), table.to_csv())?;
    fs::write(dir.join("capacity.txt"), format!("{table}\n"))?;
    Ok(())
}
