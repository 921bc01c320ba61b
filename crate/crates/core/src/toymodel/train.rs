//! Supervised source training and finite-difference gradient checks.

use nalgebra::DMatrix;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{ToyModel, ToyTape};
use super::ToyError;
use crate::audio::{load_wav, Waveform};
use crate::benchmark::DatasetManifest;
use crate::tta::{combined_loss, AdaptableModel, BlrOptimizer, LossConfig, Mode, OptimizerConfig, ParamGroups};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.05,
            momentum: 0.9,
            epochs: 12,
            batch_size: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Mean cross-entropy and its gradient with respect to the logits,
/// `(p - onehot) / B`.
pub fn cross_entropy(probs: &DMatrix<f64>, labels: &[usize]) -> Result<(f64, DMatrix<f64>), ToyError> {
    if labels.len() != probs.nrows() {
        return Err(ToyError::Config(format!("{} labels for {} rows", labels.len(), probs.nrows())));
    }
    if labels.iter().any(|&l| l >= probs.ncols()) {
        return Err(ToyError::Config("label outside the class range".into()));
    }
    let b = probs.nrows() as f64;
    let loss = -labels.iter().enumerate().map(|(i, &y)| probs[(i, y)].max(1e-300).ln()).sum::<f64>() / b;
    let mut grad = probs / b;
    for (i, &y) in labels.iter().enumerate() {
        grad[(i, y)] -= 1.0 / b;
    }
    Ok((loss, grad))
}

/// Loads every clip of a dataset manifest with its label.
pub fn load_dataset(m: &DatasetManifest) -> Result<(Vec<Waveform>, Vec<usize>), ToyError> {
    let waves = m.entries.iter().map(|e| load_wav(m.resolve(e))).collect::<Result<Vec<_>, _>>()?;
    Ok((waves, m.entries.iter().map(|e| e.label).collect()))
}

/// Cross-entropy training with the two-group optimizer at equal rates.
/// Batch norm uses batch statistics and updates its running statistics.
pub fn train_source(model: &mut ToyModel, waves: &[Waveform], labels: &[usize], cfg: &TrainConfig) -> Result<TrainReport, ToyError> {
    if waves.len() != labels.len() || waves.is_empty() {
        return Err(ToyError::Config("training set is empty or mislabelled".into()));
    }
    if cfg.batch_size < 2 {
        return Err(ToyError::Config("training batch size must be at least 2".into()));
    }
    let opt_cfg = OptimizerConfig {
        lr_c: cfg.lr,
        lr_ratio: 1.0,
        momentum: cfg.momentum,
    };
    let mut opt = BlrOptimizer::new(opt_cfg, model.params())?;
    let cols = model.batch_cols(waves)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..waves.len()).collect();
    let mut report = TrainReport { epoch_losses: Vec::new() };
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut total, mut batches) = (0.0, 0);
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let batch_cols = chunk.iter().map(|&i| cols[i].clone()).collect();
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (fwd, tape) = model.forward_cols(batch_cols, Mode::Train)?;
            let (loss, dz) = cross_entropy(&fwd.probs, &batch_labels)?;
            if !loss.is_finite() {
                return Err(ToyError::Diverged { epoch });
            }
            let grads = model.backward_logits(&tape, &dz)?;
            opt.step(model.params_mut(), &grads)?;
            total += loss;
            batches += 1;
        }
        let mean = total / batches.max(1) as f64;
        log::debug!("source epoch {epoch}: loss {mean:.4}");
        report.epoch_losses.push(mean);
    }
    Ok(report)
}

/// What [`grad_check`] differentiates.
#[derive(Debug, Clone, Copy)]
pub enum GradObjective<'a> {
    /// Cross-entropy of the batch against `labels`.
    CrossEntropy { labels: &'a [usize] },
    /// The adaptation objective, with `batch` as the left view and `right`
    /// as the right view.
    Combined { cfg: LossConfig, right: &'a [Waveform] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub coords: usize,
    /// Coordinates where the loss is not smooth within one step, excluded
    /// from `max_rel_error`.
    pub kinks: usize,
    pub max_rel_error: f64,
    pub max_abs_analytic: f64,
    pub max_abs_numeric: f64,
}

/// Gradients below this are compared absolutely rather than relatively.
const GRAD_FLOOR: f64 = 1e-6;
const FD_STEP: f64 = 1e-5;
/// Relative tolerance of the check; misses beyond it are tested for a kink.
const GRAD_TOLERANCE: f64 = 1e-3;
/// Central estimates at `h` and `h/10` agreeing to this are taken as smooth.
const SMOOTH_AGREEMENT: f64 = 1e-4;

fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(GRAD_FLOOR)
}

fn central_difference(
    model: &mut ToyModel,
    i: usize,
    h: f64,
    left: &[DMatrix<f64>],
    obj: &GradObjective,
    right: &[DMatrix<f64>],
) -> Result<f64, ToyError> {
    let orig = model.params().get(i);
    model.params_mut().set(i, orig + h);
    let up = objective_value(model, left, obj, right);
    model.params_mut().set(i, orig - h);
    let down = objective_value(model, left, obj, right);
    model.params_mut().set(i, orig);
    Ok((up? - down?) / (2.0 * h))
}

fn objective_value(model: &mut ToyModel, left: &[DMatrix<f64>], obj: &GradObjective, right: &[DMatrix<f64>]) -> Result<f64, ToyError> {
    let (fl, _) = model.forward_cols(left.to_vec(), Mode::Probe)?;
    match obj {
        GradObjective::CrossEntropy { labels } => Ok(cross_entropy(&fl.probs, labels)?.0),
        GradObjective::Combined { cfg, .. } => {
            let (fr, _) = model.forward_cols(right.to_vec(), Mode::Probe)?;
            Ok(combined_loss(&fl.probs, &fr.probs, cfg)?.total)
        }
    }
}

fn objective_grad(model: &mut ToyModel, left: &[DMatrix<f64>], obj: &GradObjective, right: &[DMatrix<f64>]) -> Result<ParamGroups, ToyError> {
    let (fl, tl): (_, ToyTape) = model.forward_cols(left.to_vec(), Mode::Probe)?;
    match obj {
        GradObjective::CrossEntropy { labels } => {
            let (_, dz) = cross_entropy(&fl.probs, labels)?;
            Ok(model.backward_logits(&tl, &dz)?)
        }
        GradObjective::Combined { cfg, .. } => {
            let (fr, tr) = model.forward_cols(right.to_vec(), Mode::Probe)?;
            let loss = combined_loss(&fl.probs, &fr.probs, cfg)?;
            let mut g = model.backward(&tl, &loss.grad_l)?;
            g.add_scaled(&model.backward(&tr, &loss.grad_r)?, 1.0);
            Ok(g)
        }
    }
}

/// Compares analytic parameter gradients of `objective` against central
/// differences on `n_coords` random coordinates. Batch norm runs on batch
/// statistics without touching the running ones.
pub fn grad_check(
    model: &ToyModel,
    batch: &[Waveform],
    objective: GradObjective,
    n_coords: usize,
    seed: u64,
) -> Result<GradCheckReport, ToyError> {
    if batch.len() < 2 {
        return Err(ToyError::Config("gradient check needs a batch of at least 2".into()));
    }
    let mut m = model.clone();
    let left = m.batch_cols(batch)?;
    let right = match objective {
        GradObjective::Combined { right, .. } => {
            if right.len() != batch.len() {
                return Err(ToyError::Config("views differ in batch size".into()));
            }
            m.batch_cols(right)?
        }
        GradObjective::CrossEntropy { .. } => Vec::new(),
    };
    let analytic = objective_grad(&mut m, &left, &objective, &right)?;
    let total = analytic.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = index::sample(&mut rng, total, n_coords.min(total)).into_vec();

    let mut report = GradCheckReport {
        coords: coords.len(),
        kinks: 0,
        max_rel_error: 0.0,
        max_abs_analytic: 0.0,
        max_abs_numeric: 0.0,
    };
    for i in coords {
        let numeric = central_difference(&mut m, i, FD_STEP, &left, &objective, &right)?;
        let a = analytic.get(i);
        let rel = rel_error(a, numeric);
        if rel > GRAD_TOLERANCE {
            // A ReLU switch inside the step shows up as a finite
            // difference that moves when the step shrinks.
            let fine = central_difference(&mut m, i, FD_STEP / 10.0, &left, &objective, &right)?;
            if rel_error(numeric, fine) > SMOOTH_AGREEMENT {
                report.kinks += 1;
                continue;
            }
        }
        report.max_rel_error = report.max_rel_error.max(rel);
        report.max_abs_analytic = report.max_abs_analytic.max(a.abs());
        report.max_abs_numeric = report.max_abs_numeric.max(numeric.abs());
    }
    Ok(report)
}
