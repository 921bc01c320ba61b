//! The adaptation loop, evaluation, curves and the paired stability runs.

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::losses::{combined_loss, LossConfig};
use super::optimizer::{BlrOptimizer, OptimizerConfig};
use super::views::make_views;
use super::{AdaptableModel, Mode, TtaError};
use crate::audio::{load_wav, Waveform, DEFAULT_MAX_SHIFT_FRACTION};
use crate::benchmark::BenchmarkManifest;
use crate::metrics::{
    accuracy_ovr, accuracy_top1, confusion_counts, f1_aggregated, macro_roc_auc, MetricReport, PredictionSet,
};

/// Smallest batch accepted without `allow_small_batch`.
pub const MIN_ADAPT_BATCH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    AccuracyTop1,
    AccuracyOvr,
    F1Aggregated,
    RocAucMacro,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::AccuracyTop1 => "accuracy_top1",
            MetricKind::AccuracyOvr => "accuracy_ovr",
            MetricKind::F1Aggregated => "f1_aggregated",
            MetricKind::RocAucMacro => "roc_auc_macro",
        }
    }

    /// The dataset's canonical metric.
    pub fn for_dataset(dataset_id: &str) -> Self {
        MetricReport::canonical_for(dataset_id).parse().expect("canonical names parse")
    }

    pub fn compute(self, p: &PredictionSet) -> Result<f64, TtaError> {
        let counts = || confusion_counts(&p.predicted(), p.labels(), p.n_classes());
        Ok(match self {
            MetricKind::AccuracyTop1 => accuracy_top1(p),
            MetricKind::AccuracyOvr => accuracy_ovr(&counts()?)?,
            MetricKind::F1Aggregated => f1_aggregated(&counts()?)?,
            MetricKind::RocAucMacro => macro_roc_auc(p)?,
        })
    }
}

impl FromStr for MetricKind {
    type Err = TtaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            MetricKind::AccuracyTop1,
            MetricKind::AccuracyOvr,
            MetricKind::F1Aggregated,
            MetricKind::RocAucMacro,
        ]
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| TtaError::Config(format!("unknown metric `{s}`")))
    }
}

/// A fixed labelled evaluation set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    pub waveforms: Vec<Waveform>,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptConfig {
    pub loss: LossConfig,
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub shuffle_seed: u64,
    /// Upper bound on each view's temporal shift, as a fraction of length.
    pub max_shift_fraction: f64,
    /// Accept batches below the minimum size, with a warning.
    pub allow_small_batch: bool,
    pub metric: MetricKind,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            loss: LossConfig::default(),
            optimizer: OptimizerConfig::default(),
            batch_size: MIN_ADAPT_BATCH,
            epochs: 20,
            shuffle_seed: 0,
            max_shift_fraction: DEFAULT_MAX_SHIFT_FRACTION,
            allow_small_batch: false,
            metric: MetricKind::AccuracyTop1,
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<(), TtaError> {
        self.loss.validate()?;
        self.optimizer.validate()?;
        if self.batch_size < 2 {
            return Err(TtaError::Config("batch size must be at least 2".into()));
        }
        if self.batch_size < MIN_ADAPT_BATCH {
            if !self.allow_small_batch {
                return Err(TtaError::Config(format!(
                    "batch size {} is below {MIN_ADAPT_BATCH}; set allow_small_batch to proceed",
                    self.batch_size
                )));
            }
            log::warn!("adapting with batch size {} (< {MIN_ADAPT_BATCH})", self.batch_size);
        }
        if !(0.0..=0.5).contains(&self.max_shift_fraction) {
            return Err(TtaError::Config("max_shift_fraction must be in [0, 0.5]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub value: f64,
}

/// Metric per epoch; epoch 0 is the pre-adaptation baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptationCurve {
    pub metric: String,
    pub points: Vec<CurvePoint>,
}

impl AdaptationCurve {
    pub fn baseline(&self) -> f64 {
        self.points[0].value
    }

    pub fn final_value(&self) -> f64 {
        self.points.last().expect("curve has a baseline").value
    }

    pub fn peak(&self) -> f64 {
        self.points.iter().map(|p| p.value).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Peak minus final value.
    pub fn drawdown(&self) -> f64 {
        self.peak() - self.final_value()
    }

    /// Two-column table, `epoch\t<metric>`.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("epoch\t{}\n", self.metric);
        for p in &self.points {
            let _ = writeln!(out, "{}\t{:.6}", p.epoch, p.value);
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, TtaError> {
        let mut lines = text.lines().filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| TtaError::Config("empty curve".into()))?;
        let metric = header
            .strip_prefix("epoch\t")
            .ok_or_else(|| TtaError::Config("curve header must start with `epoch`".into()))?
            .to_string();
        let points = lines
            .map(|l| {
                let (e, v) = l.split_once('\t').ok_or_else(|| TtaError::Config(format!("bad curve row `{l}`")))?;
                Ok(CurvePoint {
                    epoch: e.parse().map_err(|_| TtaError::Config(format!("bad epoch `{e}`")))?,
                    value: v.parse().map_err(|_| TtaError::Config(format!("bad value `{v}`")))?,
                })
            })
            .collect::<Result<Vec<_>, TtaError>>()?;
        if points.iter().enumerate().any(|(i, p)| p.epoch != i) {
            return Err(TtaError::Config("curve epochs are not contiguous from 0".into()));
        }
        Ok(Self { metric, points })
    }
}

/// Inference-mode probabilities and embeddings for every clip.
pub fn predict<M: AdaptableModel>(
    model: &mut M,
    waves: &[Waveform],
    batch_size: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>), TtaError> {
    if waves.is_empty() {
        return Err(TtaError::Shape("nothing to predict".into()));
    }
    let mut probs = Vec::new();
    let mut embs = Vec::new();
    for chunk in waves.chunks(batch_size.max(1)) {
        let (f, _) = model.forward(chunk, Mode::Inference)?;
        probs.push(f.probs);
        embs.push(f.embeddings);
    }
    Ok((stack(&probs), stack(&embs)))
}

fn stack(parts: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = parts.iter().map(|m| m.nrows()).sum();
    let cols = parts[0].ncols();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for m in parts {
        out.rows_mut(r, m.nrows()).copy_from(m);
        r += m.nrows();
    }
    out
}

/// Scores the model on `eval` without touching any state.
pub fn evaluate<M: AdaptableModel>(model: &mut M, eval: &EvalSet, metric: MetricKind, batch_size: usize) -> Result<f64, TtaError> {
    let (probs, _) = predict(model, &eval.waveforms, batch_size)?;
    metric.compute(&PredictionSet::new(probs, eval.labels.clone())?)
}

/// Runs `cfg.epochs` epochs of unsupervised adaptation on `data`, scoring
/// `eval` before the first epoch and after each one.
pub fn adapt<M: AdaptableModel>(
    model: &mut M,
    data: &[Waveform],
    eval: &EvalSet,
    cfg: &AdaptConfig,
) -> Result<AdaptationCurve, TtaError> {
    cfg.validate()?;
    let mut opt = BlrOptimizer::new(cfg.optimizer, model.params())?;
    let score = |m: &mut M| evaluate(m, eval, cfg.metric, cfg.batch_size.max(64));
    let mut curve = AdaptationCurve {
        metric: cfg.metric.name().to_string(),
        points: vec![CurvePoint {
            epoch: 0,
            value: score(model)?,
        }],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            if chunk.len() < 2 {
                continue;
            }
            let batch: Vec<Waveform> = chunk.iter().map(|&i| data[i].clone()).collect();
            let (vl, vr) = make_views(&batch, cfg.max_shift_fraction, &mut rng)?;
            let (fl, tl) = model.forward(&vl, Mode::Train)?;
            let (fr, tr) = model.forward(&vr, Mode::Train)?;
            let loss = combined_loss(&fl.probs, &fr.probs, &cfg.loss)?;
            if !loss.total.is_finite() {
                return Err(TtaError::NonFiniteLoss { epoch, batch: bi });
            }
            let mut grads = model.backward(&tl, &loss.grad_l)?;
            grads.add_scaled(&model.backward(&tr, &loss.grad_r)?, 1.0);
            opt.step(model.params_mut(), &grads)?;
        }
        let value = score(model)?;
        log::debug!("epoch {epoch}: {} = {value:.4}", cfg.metric.name());
        curve.points.push(CurvePoint { epoch, value });
    }
    Ok(curve)
}

/// Loads every corrupted clip of a benchmark, in record order.
pub fn load_benchmark_audio(m: &BenchmarkManifest) -> Result<Vec<Waveform>, TtaError> {
    m.records.iter().map(|r| Ok(load_wav(m.resolve(r))?)).collect()
}

/// [`adapt`] on a benchmark, scored on a separately seeded evaluation build.
pub fn adapt_on_manifests<M: AdaptableModel>(
    model: &mut M,
    benchmark: &BenchmarkManifest,
    eval: &BenchmarkManifest,
    cfg: &AdaptConfig,
) -> Result<AdaptationCurve, TtaError> {
    if benchmark.global_seed == eval.global_seed {
        return Err(TtaError::Config(format!(
            "adaptation and evaluation sets share seed {}",
            benchmark.global_seed
        )));
    }
    if benchmark.n_classes() != eval.n_classes() || eval.n_classes() != model.n_classes() {
        return Err(TtaError::Shape("class counts of model, benchmark and evaluation set differ".into()));
    }
    let data = load_benchmark_audio(benchmark)?;
    let eval = EvalSet {
        waveforms: load_benchmark_audio(eval)?,
        labels: eval.labels(),
    };
    adapt(model, &data, &eval, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityAxis {
    /// 0.9 against 0.7.
    Momentum,
    /// Single rate (ratio 1.0) against split rates (ratio 0.5).
    LrRatio,
}

impl StabilityAxis {
    /// `(label, value)` for the baseline setting, then the expected-stabler one.
    pub fn settings(self) -> [(&'static str, f64); 2] {
        match self {
            StabilityAxis::Momentum => [("HM", 0.9), ("LM", 0.7)],
            StabilityAxis::LrRatio => [("SLR", 1.0), ("BLR", 0.5)],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StabilityAxis::Momentum => "momentum",
            StabilityAxis::LrRatio => "lr-ratio",
        }
    }
}

impl FromStr for StabilityAxis {
    type Err = TtaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "momentum" => Ok(StabilityAxis::Momentum),
            "lr-ratio" | "lr_ratio" => Ok(StabilityAxis::LrRatio),
            _ => Err(TtaError::Config(format!("unknown stability axis `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRun {
    pub label: &'static str,
    pub value: f64,
    pub curve: AdaptationCurve,
    pub drawdown: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub axis: StabilityAxis,
    pub runs: Vec<StabilityRun>,
    /// Whether the second setting drew down no more than the first.
    pub expectation_held: bool,
}

impl StabilityReport {
    pub fn summary_tsv(&self) -> String {
        let mut out = String::from("setting\tvalue\tbaseline\tpeak\tfinal\tdrawdown\n");
        for r in &self.runs {
            let c = &r.curve;
            let _ = writeln!(
                out,
                "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                r.label,
                r.value,
                c.baseline(),
                c.peak(),
                c.final_value(),
                r.drawdown
            );
        }
        out
    }
}

/// Two adaptations from the same starting model that differ only along `axis`.
pub fn run_stability<M: AdaptableModel + Clone>(
    model: &M,
    data: &[Waveform],
    eval: &EvalSet,
    base: &AdaptConfig,
    axis: StabilityAxis,
) -> Result<StabilityReport, TtaError> {
    let mut runs = Vec::new();
    for (label, value) in axis.settings() {
        let mut cfg = *base;
        match axis {
            StabilityAxis::Momentum => cfg.optimizer.momentum = value,
            StabilityAxis::LrRatio => cfg.optimizer.lr_ratio = value,
        }
        let curve = adapt(&mut model.clone(), data, eval, &cfg)?;
        runs.push(StabilityRun {
            label,
            value,
            drawdown: curve.drawdown(),
            curve,
        });
    }
    Ok(StabilityReport {
        axis,
        expectation_held: runs[1].drawdown <= runs[0].drawdown,
        runs,
    })
}
