//! A desk-scale substrate for the whole corrupt → adapt → evaluate loop:
//! a synthetic tone-classification task, a small convolutional model with
//! hand-written gradients, source training and checkpoints.

mod checkpoint;
mod model;
mod pipeline;
mod task;
mod train;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::audio::AudioError;
use crate::benchmark::BenchmarkError;
use crate::corruption::CorruptionError;
use crate::metrics::MetricError;
use crate::tta::TtaError;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use model::{ToyArch, ToyModel, ToyTape};
pub use pipeline::{
    adapt_source, corrupt_set, corrupted_copies, fixed_white_noise, prepare_source, run_pipeline, toy_adapt_config,
    PipelineConfig, PipelineOutcome, SourceModel,
};
pub use task::{
    gen_toy_dataset, synth_clip, synth_split, ClassVoice, ToyDataset, ToySplit, ToyTaskConfig, TOY_DATASET_ID,
    TOY_TEST_MANIFEST, TOY_TRAIN_MANIFEST,
};
pub use train::{cross_entropy, grad_check, load_dataset, train_source, GradCheckReport, GradObjective, TrainConfig, TrainReport};

#[derive(Debug, Error)]
pub enum ToyError {
    #[error(transparent)]
    Tta(#[from] TtaError),
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
    #[error(transparent)]
    Corruption(#[from] CorruptionError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ToyError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ToyError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
