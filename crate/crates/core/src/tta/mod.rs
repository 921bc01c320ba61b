//! Test-time adaptation: two-view augmentation, the entropy-loss ensemble
//! with a consistency term, a two-group SGD-with-momentum optimizer, and
//! the per-epoch adapt/evaluate loop.

mod adapt;
mod losses;
mod optimizer;
mod views;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::audio::{AudioError, Waveform};
use crate::benchmark::BenchmarkError;
use crate::metrics::MetricError;

pub use adapt::{
    adapt, adapt_on_manifests, evaluate, load_benchmark_audio, predict, run_stability, AdaptConfig,
    AdaptationCurve, CurvePoint, EvalSet, MetricKind, StabilityAxis, StabilityReport, StabilityRun,
};
pub use losses::{
    combined_loss, consistency_loss, entropy_min_loss, generalized_entropy_loss, nuclear_norm_loss, CombinedLoss,
    ConsistencyNorm, EnsembleWeights, LossConfig, LossParts, LossValue, PairLossValue, ENTROPY_EPS,
};
pub use optimizer::{BlrOptimizer, OptimizerConfig};
pub use views::make_views;

#[derive(Debug, Error)]
pub enum TtaError {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("singular value decomposition did not converge")]
    SvdFailed,
    #[error("non-finite gradient in the {0} group; step aborted")]
    NonFiniteGradient(&'static str),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("model error: {0}")]
    Model(String),
}

/// How a forward pass treats normalization statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Running statistics; nothing is mutated.
    Inference,
    /// Batch statistics; running statistics are updated.
    Train,
    /// Batch statistics; running statistics are left alone.
    Probe,
}

/// The two parameter groups that receive separate learning rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGroups {
    pub feature_extractor: Vec<f64>,
    pub classifier: Vec<f64>,
}

impl ParamGroups {
    pub fn zeros_like(other: &ParamGroups) -> Self {
        Self {
            feature_extractor: vec![0.0; other.feature_extractor.len()],
            classifier: vec![0.0; other.classifier.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.feature_extractor.len() + self.classifier.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.feature_extractor.iter().chain(&self.classifier).all(|v| v.is_finite())
    }

    /// `self += scale * other`, group by group.
    pub fn add_scaled(&mut self, other: &ParamGroups, scale: f64) {
        for (a, b) in self.feature_extractor.iter_mut().zip(&other.feature_extractor) {
            *a += scale * b;
        }
        for (a, b) in self.classifier.iter_mut().zip(&other.classifier) {
            *a += scale * b;
        }
    }

    /// Feature-extractor values followed by classifier values.
    pub fn concat(&self) -> Vec<f64> {
        self.feature_extractor.iter().chain(&self.classifier).copied().collect()
    }

    pub fn get(&self, flat: usize) -> f64 {
        let n = self.feature_extractor.len();
        if flat < n {
            self.feature_extractor[flat]
        } else {
            self.classifier[flat - n]
        }
    }

    pub fn set(&mut self, flat: usize, v: f64) {
        let n = self.feature_extractor.len();
        if flat < n {
            self.feature_extractor[flat] = v;
        } else {
            self.classifier[flat - n] = v;
        }
    }
}

/// Output of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    /// B×C class probabilities.
    pub probs: DMatrix<f64>,
    /// B×D pre-classifier embeddings.
    pub embeddings: DMatrix<f64>,
}

/// A classifier that can be adapted at test time.
pub trait AdaptableModel {
    /// Intermediate values the backward pass needs.
    type Tape;

    fn n_classes(&self) -> usize;

    fn params(&self) -> &ParamGroups;

    fn params_mut(&mut self) -> &mut ParamGroups;

    fn forward(&mut self, batch: &[Waveform], mode: Mode) -> Result<(Forward, Self::Tape), TtaError>;

    /// Parameter gradients given the loss gradient with respect to the
    /// probabilities of the pass recorded in `tape`.
    fn backward(&self, tape: &Self::Tape, grad_probs: &DMatrix<f64>) -> Result<ParamGroups, TtaError>;
}
