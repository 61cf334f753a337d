//! Config-driven experiment protocol, records and reports.

mod config;
mod record;
mod report;
mod run;
pub mod synthetic;

pub use config::{
    ClusterSection, DataConfig, EmbedderSection, ExperimentConfig, Heads, ProtocolSection, SupervisedSection,
    SyntheticConfig,
};
pub use record::{
    ExperimentRecord, MetricLine, RepeatArtifacts, RepeatRecord, RidgeOutcome, RunStatus, METRICS_FILE, RECORD_FILE,
};
pub use report::{report, Report};
pub use run::{
    ensure_features, export_latents, load_dataset, load_embedder, record_dir, run, run_on, Dataset, LatentIndex,
};
