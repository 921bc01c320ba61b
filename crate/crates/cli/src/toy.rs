//! Toy dataset generation, source training, adaptation and stability runs.

use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::{Args, Subcommand};
use serde::{Deserialize, Serialize};
use shiftbench::benchmark::{DatasetManifest, EVALUATION_SEED, GENERATION_SEED};
use shiftbench::toymodel::{
    adapt_source, corrupted_copies, gen_toy_dataset, load_checkpoint, load_dataset, save_checkpoint, toy_adapt_config,
    train_source, PipelineConfig, SourceModel, ToyArch, ToyModel, ToyTaskConfig, TrainConfig, TrainReport,
    TOY_TEST_MANIFEST, TOY_TRAIN_MANIFEST,
};
use shiftbench::tta::{evaluate, predict, run_stability, AdaptConfig, EvalSet, MetricKind, StabilityAxis};

use crate::exit::CliError;
use crate::files::{create_dir, embeddings_tsv, read_toml, write_atomic, write_toml};
use crate::Ctx;

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const ADAPTED_CHECKPOINT_FILE: &str = "adapted.ckpt";
pub const CURVE_FILE: &str = "curve.tsv";
pub const SUMMARY_FILE: &str = "summary.tsv";

#[derive(Debug, Subcommand)]
pub enum ToyCommand {
    /// Synthesize the labelled toy dataset.
    Gen(GenArgs),
    /// Train the source model on the clean training split.
    Train(TrainArgs),
    /// Adapt a trained model on white-noise-corrupted test clips.
    Adapt(AdaptArgs),
    /// Paired adaptations along the momentum or learning-rate-ratio axis.
    Stability(StabilityArgs),
}

pub fn run(ctx: &Ctx, c: ToyCommand) -> Result<()> {
    match c {
        ToyCommand::Gen(a) => gen(a),
        ToyCommand::Train(a) => train(ctx, a),
        ToyCommand::Adapt(a) => adapt(ctx, a),
        ToyCommand::Stability(a) => stability(ctx, a),
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Task configuration TOML; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub train_per_class: Option<usize>,
    #[arg(long)]
    pub test_per_class: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn gen(a: GenArgs) -> Result<()> {
    let mut cfg: ToyTaskConfig = match &a.config {
        Some(p) => read_toml(p)?,
        None => ToyTaskConfig::default(),
    };
    set(&mut cfg.train_per_class, a.train_per_class);
    set(&mut cfg.test_per_class, a.test_per_class);
    set(&mut cfg.seed, a.seed);
    cfg.validate()?;
    let ds = gen_toy_dataset(&cfg, &a.out)?;
    write_toml(&a.out.join("task_config.toml"), &cfg)?;
    println!("train={} test={} classes={}", ds.train.entries.len(), ds.test.entries.len(), cfg.n_classes());
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory written by `toy gen`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Training configuration TOML; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Shuffle seed for training batches.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Weight initialization seed.
    #[arg(long)]
    pub model_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainRun {
    pub data: PathBuf,
    pub arch: ToyArch,
    pub model_seed: u64,
    pub train: TrainConfig,
}

impl Default for TrainRun {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            data: PathBuf::new(),
            arch: p.arch,
            model_seed: p.model_seed,
            train: p.train,
        }
    }
}

fn train(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let mut run: TrainRun = match &a.config {
        Some(p) => read_toml(&ctx.input(p))?,
        None => TrainRun::default(),
    };
    run.data = ctx.input(&a.data);
    set(&mut run.train.epochs, a.epochs);
    set(&mut run.train.lr, a.lr);
    set(&mut run.train.momentum, a.momentum);
    set(&mut run.train.batch_size, a.batch_size);
    set(&mut run.train.seed, a.seed);
    set(&mut run.model_seed, a.model_seed);

    let manifest = DatasetManifest::load(run.data.join(TOY_TRAIN_MANIFEST))?;
    let (waves, labels) = load_dataset(&manifest)?;
    run.arch.n_classes = manifest.n_classes();
    run.arch.sample_rate = waves[0].sample_rate();
    let mut model = ToyModel::new(run.arch, run.model_seed)?;
    let report = train_source(&mut model, &waves, &labels, &run.train)?;

    create_dir(&a.out)?;
    save_checkpoint(&model, a.out.join(CHECKPOINT_FILE))?;
    write_atomic(&a.out.join("train_losses.tsv"), losses_tsv(&report).as_bytes())?;
    write_toml(&a.out.join("train_config.toml"), &run)?;
    let test_path = run.data.join(TOY_TEST_MANIFEST);
    if test_path.exists() {
        let eval = load_eval(&test_path)?;
        let top1 = evaluate(&mut model, &eval, MetricKind::AccuracyTop1, 64)?;
        println!("clean_top1={top1:.6}");
    }
    println!("final_loss={:.6}", report.epoch_losses.last().copied().unwrap_or(f64::NAN));
    Ok(())
}

fn losses_tsv(r: &TrainReport) -> String {
    let mut out = String::from("epoch\tloss\n");
    for (i, l) in r.epoch_losses.iter().enumerate() {
        out.push_str(&format!("{}\t{l:.9}\n", i + 1));
    }
    out
}

/// Flags shared by `adapt` and `stability`.
#[derive(Debug, Args)]
pub struct AdaptFlags {
    /// Dataset directory written by `toy gen`.
    #[arg(long)]
    pub data: PathBuf,
    /// Source checkpoint written by `toy train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Adaptation configuration TOML; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// White-noise SNR applied to the test clips, in dB.
    #[arg(long)]
    pub snr_db: Option<f64>,
    /// Seed of the corrupted copy used for adaptation.
    #[arg(long)]
    pub adapt_seed: Option<u64>,
    /// Seed of the corrupted copy used for scoring.
    #[arg(long)]
    pub eval_seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub allow_small_batch: bool,
    #[arg(long)]
    pub shuffle_seed: Option<u64>,
    /// Classifier learning rate.
    #[arg(long)]
    pub lr_c: Option<f64>,
    /// Feature-extractor rate as a fraction of the classifier rate.
    #[arg(long)]
    pub lr_ratio: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Weight of the consistency term.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Order of the generalized entropy.
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptRun {
    pub data: PathBuf,
    pub checkpoint: PathBuf,
    pub snr_db: f64,
    pub adapt_seed: u64,
    pub eval_seed: u64,
    pub adapt: AdaptConfig,
}

impl Default for AdaptRun {
    fn default() -> Self {
        Self {
            data: PathBuf::new(),
            checkpoint: PathBuf::new(),
            snr_db: PipelineConfig::default().snr_db,
            adapt_seed: GENERATION_SEED,
            eval_seed: EVALUATION_SEED,
            adapt: toy_adapt_config(),
        }
    }
}

impl AdaptFlags {
    fn resolve(&self, ctx: &Ctx) -> Result<AdaptRun> {
        let mut run: AdaptRun = match &self.config {
            Some(p) => read_toml(&ctx.input(p))?,
            None => AdaptRun::default(),
        };
        run.data = ctx.input(&self.data);
        run.checkpoint = ctx.input(&self.checkpoint);
        set(&mut run.snr_db, self.snr_db);
        set(&mut run.adapt_seed, self.adapt_seed);
        set(&mut run.eval_seed, self.eval_seed);
        let c = &mut run.adapt;
        set(&mut c.epochs, self.epochs);
        set(&mut c.batch_size, self.batch_size);
        set(&mut c.shuffle_seed, self.shuffle_seed);
        set(&mut c.optimizer.lr_c, self.lr_c);
        set(&mut c.optimizer.lr_ratio, self.lr_ratio);
        set(&mut c.optimizer.momentum, self.momentum);
        set(&mut c.loss.lambda, self.lambda);
        set(&mut c.loss.alpha, self.alpha);
        c.allow_small_batch |= self.allow_small_batch;
        c.validate()?;
        Ok(run)
    }
}

impl AdaptRun {
    fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            snr_db: self.snr_db,
            adapt_seed: self.adapt_seed,
            eval_seed: self.eval_seed,
            adapt: self.adapt,
            ..PipelineConfig::default()
        }
    }

    /// The checkpoint plus its clean test split.
    fn source(&self) -> Result<SourceModel> {
        let mut model = load_checkpoint(&self.checkpoint)?;
        let eval = load_eval(&self.data.join(TOY_TEST_MANIFEST))?;
        if eval.labels.iter().any(|&l| l >= model.arch().n_classes) {
            return Err(CliError::Config("test labels exceed the checkpoint's class count".into()).into());
        }
        let clean_top1 = evaluate(&mut model, &eval, MetricKind::AccuracyTop1, 64)?;
        Ok(SourceModel {
            model,
            report: TrainReport { epoch_losses: Vec::new() },
            test_waves: eval.waveforms,
            test_labels: eval.labels,
            clean_top1,
        })
    }
}

fn load_eval(path: &Path) -> Result<EvalSet> {
    let m = DatasetManifest::load(path)?;
    let (waveforms, labels) = load_dataset(&m)?;
    Ok(EvalSet { waveforms, labels })
}

#[derive(Debug, Args)]
pub struct AdaptArgs {
    #[command(flatten)]
    pub flags: AdaptFlags,
}

#[derive(Debug, Serialize)]
struct AdaptSummary {
    clean_top1: f64,
    corrupted_top1: f64,
    adapted_top1: f64,
    peak_top1: f64,
    drawdown: f64,
    silhouette_before: f64,
    silhouette_after: f64,
}

fn adapt(ctx: &Ctx, a: AdaptArgs) -> Result<()> {
    let run = a.flags.resolve(ctx)?;
    let cfg = run.pipeline();
    let src = run.source()?;
    let (_, eval) = corrupted_copies(&cfg, &src)?;
    let (mut adapted, outcome) = adapt_source(&cfg, &src)?;
    let before = embedding_rows(&mut src.model.clone(), &eval)?;
    let after = embedding_rows(&mut adapted, &eval)?;

    let out = &a.flags.out;
    create_dir(out)?;
    write_toml(&out.join("adapt_config.toml"), &run)?;
    write_atomic(&out.join(CURVE_FILE), outcome.curve.to_tsv().as_bytes())?;
    write_atomic(&out.join("embeddings_before.tsv"), embeddings_tsv(&before, &eval.labels).as_bytes())?;
    write_atomic(&out.join("embeddings_after.tsv"), embeddings_tsv(&after, &eval.labels).as_bytes())?;
    save_checkpoint(&adapted, out.join(ADAPTED_CHECKPOINT_FILE))?;
    let summary = AdaptSummary {
        clean_top1: outcome.clean_top1,
        corrupted_top1: outcome.corrupted_top1,
        adapted_top1: outcome.adapted_top1,
        peak_top1: outcome.curve.peak(),
        drawdown: outcome.curve.drawdown(),
        silhouette_before: outcome.silhouette_before,
        silhouette_after: outcome.silhouette_after,
    };
    let json = serde_json::to_string_pretty(&summary)?;
    write_atomic(&out.join("report.json"), (json.clone() + "\n").as_bytes())?;
    println!("{json}");
    Ok(())
}

fn embedding_rows(model: &mut ToyModel, eval: &EvalSet) -> Result<Vec<Vec<f64>>> {
    let (_, emb) = predict(model, &eval.waveforms, 64)?;
    Ok(emb.row_iter().map(|r| r.iter().copied().collect()).collect())
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub flags: AdaptFlags,
    /// `momentum` (0.9 against 0.7) or `lr-ratio` (1.0 against 0.5).
    #[arg(long, value_parser = parse_axis)]
    pub axis: StabilityAxis,
}

fn parse_axis(s: &str) -> Result<StabilityAxis, String> {
    s.parse().map_err(|e: shiftbench::tta::TtaError| e.to_string())
}

#[derive(Debug, Serialize)]
struct Setting {
    label: &'static str,
    value: f64,
}

#[derive(Debug, Serialize)]
struct StabilityRunConfig<'a> {
    axis: &'static str,
    settings: Vec<Setting>,
    #[serde(flatten)]
    base: &'a AdaptRun,
}

fn stability(ctx: &Ctx, a: StabilityArgs) -> Result<()> {
    let run = a.flags.resolve(ctx)?;
    let cfg = run.pipeline();
    let src = run.source()?;
    let (data, eval) = corrupted_copies(&cfg, &src)?;
    let report = run_stability(&src.model, &data, &eval, &cfg.adapt, a.axis)?;

    let out = &a.flags.out;
    create_dir(out)?;
    write_toml(
        &out.join("stability_config.toml"),
        &StabilityRunConfig {
            axis: a.axis.as_str(),
            settings: a.axis.settings().map(|(label, value)| Setting { label, value }).into(),
            base: &run,
        },
    )?;
    for r in &report.runs {
        write_atomic(&out.join(format!("curve_{}.tsv", r.label)), r.curve.to_tsv().as_bytes())?;
    }
    let summary = report.summary_tsv();
    write_atomic(&out.join(SUMMARY_FILE), summary.as_bytes())?;
    print!("{summary}");
    println!("expectation_held={}", report.expectation_held);
    Ok(())
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}
