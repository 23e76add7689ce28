//! Experiment orchestration: configs, the synthetic dataset, training and
//! evaluation runs, report files, unknown-class sweeps and capacity tables.

mod capacity;
mod config;
mod experiment;
mod report;
mod synthetic;

pub use capacity::{capacity_table, default_capacity_dims, CapacityRow, CapacityTable};
pub use config::{load_dataset, DataSource, Dataset, ExperimentConfig, SCHEMA_VERSION};
pub use experiment::{
    aggregate, evaluate_model, experiment_codebook, run_experiment, run_unknown_experiment,
    sweep_delta, train_model, DeltaRow, ExperimentOutput, MetricsReport, ModelMetrics,
    SampleRecord, SeedMetrics, TrainedModel,
};
pub use report::{
    delta_csv, layer_series_csv, metrics_csv, per_sample_csv, report_text, write_capacity,
    write_delta_sweep, write_report,
};
pub use synthetic::{
    synthetic_dataset, synthetic_samples, synthetic_stream, write_synthetic, SyntheticConfig,
    SyntheticSample, SYNTHETIC_CLASSES,
};
