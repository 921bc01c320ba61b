//! Dataset manifests, train/test splits, the criteria registry, and the
//! seeded builder that writes corrupted benchmark sets to disk.

mod build;
mod criteria;
mod manifest;
mod split;
mod validate;

use std::path::PathBuf;

use thiserror::Error;

use crate::audio::AudioError;
use crate::corruption::CorruptionError;

pub use build::{
    build_benchmark, check_pool_resolution, manifest_path, severity_histogram, BuildOptions, EVALUATION_SEED,
    GENERATION_SEED,
};
pub use criteria::{
    enumerate_criteria, parse_criterion_label, Criterion, KNOWN_DATASETS, NO_SLOWDOWN_DATASET, US8_EXCLUDED,
};
pub use manifest::{BenchmarkManifest, BenchmarkRecord, DatasetManifest, ManifestEntry, BENCHMARK_MANIFEST_FILE};
pub use split::{split_by_folds, split_stratified, train_count};
pub use validate::{validate_config, ValidationReport, Violation};

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error(transparent)]
    Corruption(#[from] CorruptionError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("sample `{sample_id}` has fold {fold}, outside 1..=10")]
    InvalidFold { sample_id: String, fold: u32 },
    #[error("sample `{0}` has no fold")]
    MissingFold(String),
    #[error("split error: {0}")]
    Split(String),
    #[error("unknown dataset id `{0}`")]
    UnknownDataset(String),
    #[error("excluded combination: {dataset} does not take {criterion}")]
    ExcludedCombination { dataset: String, criterion: String },
    #[error("noise pool for {criterion} does not resolve: missing {missing:?}")]
    PoolResolution { criterion: String, missing: Vec<String> },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
