//! The full toy experiment: generate, train on clean audio, corrupt the
//! test clips twice with distinct seeds, adapt on one copy and score the
//! other.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{ToyArch, ToyModel};
use super::task::{synth_split, ToySplit, ToyTaskConfig, TOY_DATASET_ID};
use super::train::{train_source, TrainConfig, TrainReport};
use super::ToyError;
use crate::audio::Waveform;
use crate::benchmark::{EVALUATION_SEED, GENERATION_SEED};
use crate::corruption::{
    corrupt_sample, derive_seed, CorruptionId, CorruptionSpec, Family, Level, NoiseLibrary, NoisePool, SeverityGrid,
    GAUSSIAN_NOISE, UNIFORM_NOISE,
};
use crate::metrics::silhouette;
use crate::tta::{adapt, evaluate, predict, AdaptConfig, AdaptationCurve, EvalSet, MetricKind, OptimizerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub task: ToyTaskConfig,
    pub arch: ToyArch,
    pub model_seed: u64,
    pub train: TrainConfig,
    /// White-noise SNR applied to the test clips, in dB.
    pub snr_db: f64,
    /// Seed of the copy the model adapts on.
    pub adapt_seed: u64,
    /// Seed of the copy the model is scored on.
    pub eval_seed: u64,
    pub adapt: AdaptConfig,
}

/// Adaptation settings used by the toy experiment.
pub fn toy_adapt_config() -> AdaptConfig {
    AdaptConfig {
        optimizer: OptimizerConfig {
            lr_c: 0.01,
            lr_ratio: 0.5,
            momentum: 0.7,
        },
        batch_size: 32,
        epochs: 20,
        metric: MetricKind::AccuracyTop1,
        ..AdaptConfig::default()
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            task: ToyTaskConfig::default(),
            arch: ToyArch::default(),
            model_seed: 11,
            train: TrainConfig::default(),
            snr_db: 5.0,
            adapt_seed: GENERATION_SEED,
            eval_seed: EVALUATION_SEED,
            adapt: toy_adapt_config(),
        }
    }
}

/// White noise at one fixed SNR, Gaussian or uniform per clip.
pub fn fixed_white_noise(snr_db: f64) -> CorruptionSpec {
    CorruptionSpec {
        corruption: CorruptionId::Whn,
        level: Level::L1,
        grid: SeverityGrid {
            family: Family::WhiteNoise,
            level: Level::L1,
            values: vec![snr_db],
        },
        pool: Some(NoisePool {
            corruption: CorruptionId::Whn,
            level: Level::L1,
            noise_types: vec![GAUSSIAN_NOISE.to_string(), UNIFORM_NOISE.to_string()],
        }),
        allow_slowdown: true,
    }
}

/// Corrupts every clip with per-clip seeds derived from `global_seed`.
pub fn corrupt_set(
    waves: &[Waveform],
    spec: &CorruptionSpec,
    lib: &NoiseLibrary,
    global_seed: u64,
) -> Result<Vec<Waveform>, ToyError> {
    let label = spec.label();
    waves
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            let seed = derive_seed(global_seed, TOY_DATASET_ID, &label, i as u64);
            Ok(corrupt_sample(w, spec, lib, &format!("{i}"), seed)?.0)
        })
        .collect()
}

/// A trained model with its clean test data.
#[derive(Debug, Clone)]
pub struct SourceModel {
    pub model: ToyModel,
    pub report: TrainReport,
    pub test_waves: Vec<Waveform>,
    pub test_labels: Vec<usize>,
    pub clean_top1: f64,
}

/// Generates the task in memory and trains the source model.
pub fn prepare_source(cfg: &PipelineConfig) -> Result<SourceModel, ToyError> {
    let (train_w, train_l) = synth_split(&cfg.task, ToySplit::Train)?;
    let (test_w, test_l) = synth_split(&cfg.task, ToySplit::Test)?;
    let arch = ToyArch {
        n_classes: cfg.task.n_classes(),
        sample_rate: cfg.task.sample_rate,
        ..cfg.arch
    };
    let mut model = ToyModel::new(arch, cfg.model_seed)?;
    let report = train_source(&mut model, &train_w, &train_l, &cfg.train)?;
    let eval = EvalSet {
        waveforms: test_w,
        labels: test_l,
    };
    let clean_top1 = evaluate(&mut model, &eval, MetricKind::AccuracyTop1, 64)?;
    Ok(SourceModel {
        model,
        report,
        test_waves: eval.waveforms,
        test_labels: eval.labels,
        clean_top1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineOutcome {
    pub clean_top1: f64,
    /// Top-1 on the evaluation copy before adaptation.
    pub corrupted_top1: f64,
    pub adapted_top1: f64,
    pub curve: AdaptationCurve,
    pub silhouette_before: f64,
    pub silhouette_after: f64,
    pub train_losses: Vec<f64>,
}

/// The adaptation and evaluation copies of the corrupted test clips.
pub fn corrupted_copies(cfg: &PipelineConfig, src: &SourceModel) -> Result<(Vec<Waveform>, EvalSet), ToyError> {
    if cfg.adapt_seed == cfg.eval_seed {
        return Err(ToyError::Config("adaptation and evaluation seeds must differ".into()));
    }
    let spec = fixed_white_noise(cfg.snr_db);
    let lib = NoiseLibrary::new();
    let adapt_set = corrupt_set(&src.test_waves, &spec, &lib, cfg.adapt_seed)?;
    let eval = EvalSet {
        waveforms: corrupt_set(&src.test_waves, &spec, &lib, cfg.eval_seed)?,
        labels: src.test_labels.clone(),
    };
    Ok((adapt_set, eval))
}

fn embedding_silhouette(model: &mut ToyModel, eval: &EvalSet) -> Result<f64, ToyError> {
    let (_, emb) = predict(model, &eval.waveforms, 64)?;
    let rows: Vec<Vec<f64>> = emb.row_iter().map(|r| r.iter().copied().collect()).collect();
    Ok(silhouette(&rows, &eval.labels)?)
}

/// Adapts a copy of the source model and reports every stage.
pub fn adapt_source(cfg: &PipelineConfig, src: &SourceModel) -> Result<(ToyModel, PipelineOutcome), ToyError> {
    let (adapt_set, eval) = corrupted_copies(cfg, src)?;
    let mut model = src.model.clone();
    let silhouette_before = embedding_silhouette(&mut model, &eval)?;
    let curve = adapt(&mut model, &adapt_set, &eval, &cfg.adapt)?;
    let silhouette_after = embedding_silhouette(&mut model, &eval)?;
    let outcome = PipelineOutcome {
        clean_top1: src.clean_top1,
        corrupted_top1: curve.baseline(),
        adapted_top1: curve.final_value(),
        curve,
        silhouette_before,
        silhouette_after,
        train_losses: src.report.epoch_losses.clone(),
    };
    Ok((model, outcome))
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome, ToyError> {
    let src = prepare_source(cfg)?;
    Ok(adapt_source(cfg, &src)?.1)
}

