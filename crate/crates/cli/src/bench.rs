//! Noise indexing, splitting, criteria listing, benchmark building and scoring.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;
use shiftbench::benchmark::{
    build_benchmark, check_pool_resolution, enumerate_criteria, parse_criterion_label, severity_histogram,
    split_by_folds, split_stratified, validate_config, BenchmarkManifest, BuildOptions, Criterion, DatasetManifest,
    GENERATION_SEED, KNOWN_DATASETS,
};
use shiftbench::corruption::{scan_noise_dir, write_noise_index, NoiseLibrary, Tables};
use shiftbench::metrics::{read_predictions, silhouette as silhouette_score, MetricReport};

use crate::exit::CliError;
use crate::files::{create_dir, parse_embeddings, parse_folds, write_atomic, write_toml};
use crate::Ctx;

pub const NOISE_INDEX_FILE: &str = "noise_index.csv";
pub const RUN_CONFIG_FILE: &str = "run_config.toml";
pub const TABLES_COPY_FILE: &str = "tables.toml";

#[derive(Debug, Args)]
pub struct ScanNoiseArgs {
    /// Library root holding one subdirectory per noise type.
    pub root: PathBuf,
    /// Index file to write [default: ROOT/noise_index.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn scan_noise(ctx: &Ctx, a: ScanNoiseArgs) -> Result<()> {
    let root = ctx.input(&a.root);
    let entries = scan_noise_dir(&root)?;
    if entries.is_empty() {
        log::warn!("no WAV files found under {}", root.display());
    }
    let out = a.out.unwrap_or_else(|| root.join(NOISE_INDEX_FILE));
    write_noise_index(&out, &entries)?;
    let mut types: Vec<&str> = entries.iter().map(|e| e.noise_type.as_str()).collect();
    types.dedup();
    println!("indexed {} files across {} noise types into {}", entries.len(), types.len(), out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Dataset manifest to split.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for train.tsv and test.tsv [default: the manifest's directory].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-class training fraction for a stratified split.
    #[arg(long, conflicts_with_all = ["train_folds", "test_folds"])]
    pub train_frac: Option<f64>,
    /// Shuffle seed for the stratified split.
    #[arg(long, default_value_t = GENERATION_SEED)]
    pub seed: u64,
    /// Training folds, e.g. `1-7`.
    #[arg(long, requires = "test_folds")]
    pub train_folds: Option<String>,
    /// Test folds, e.g. `8-10`.
    #[arg(long, requires = "train_folds")]
    pub test_folds: Option<String>,
}

#[derive(Debug, Serialize)]
struct SplitRun {
    manifest: PathBuf,
    method: &'static str,
    train_frac: Option<f64>,
    seed: Option<u64>,
    train_folds: Option<Vec<u8>>,
    test_folds: Option<Vec<u8>>,
    train_count: usize,
    test_count: usize,
}

pub fn split(ctx: &Ctx, a: SplitArgs) -> Result<()> {
    let path = ctx.input(&a.manifest);
    let m = DatasetManifest::load(&path)?;
    let mut run = SplitRun {
        manifest: path.clone(),
        method: "",
        train_frac: None,
        seed: None,
        train_folds: None,
        test_folds: None,
        train_count: 0,
        test_count: 0,
    };
    let (train, test) = match (a.train_frac, &a.train_folds, &a.test_folds) {
        (Some(frac), None, None) => {
            run.method = "stratified";
            run.train_frac = Some(frac);
            run.seed = Some(a.seed);
            split_stratified(&m, frac, a.seed)?
        }
        (None, Some(tr), Some(te)) => {
            let (tr, te) = (parse_folds(tr)?, parse_folds(te)?);
            run.method = "folds";
            run.train_folds = Some(tr.iter().copied().collect());
            run.test_folds = Some(te.iter().copied().collect());
            split_by_folds(&m, &tr, &te)?
        }
        _ => {
            return Err(CliError::Config("give either --train-frac or both --train-folds and --test-folds".into()).into())
        }
    };
    let out = a.out.unwrap_or_else(|| m.root.clone());
    create_dir(&out)?;
    let (train, test) = (rebase(train, &out)?, rebase(test, &out)?);
    train.save(out.join("train.tsv"))?;
    test.save(out.join("test.tsv"))?;
    run.train_count = train.entries.len();
    run.test_count = test.entries.len();
    write_toml(&out.join("split_config.toml"), &run)?;
    println!("train={} test={}", run.train_count, run.test_count);
    Ok(())
}

/// Makes entry paths absolute when the manifest moves to another directory.
fn rebase(mut m: DatasetManifest, out: &Path) -> Result<DatasetManifest> {
    let same = match (std::fs::canonicalize(&m.root), std::fs::canonicalize(out)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    if same {
        return Ok(m);
    }
    let root = std::fs::canonicalize(&m.root).map_err(|e| CliError::io(&m.root, e))?;
    for e in &mut m.entries {
        if Path::new(&e.path).is_relative() {
            e.path = root.join(&e.path).to_string_lossy().into_owned();
        }
    }
    m.root = out.to_path_buf();
    Ok(m)
}

#[derive(Debug, Args)]
pub struct CriteriaArgs {
    /// Dataset ids [default: all known datasets].
    pub datasets: Vec<String>,
}

pub fn criteria(a: CriteriaArgs) -> Result<()> {
    let ids: Vec<String> = if a.datasets.is_empty() {
        KNOWN_DATASETS.iter().map(|s| s.to_string()).collect()
    } else {
        a.datasets
    };
    let list = enumerate_criteria(&ids)?;
    for c in &list {
        let note = if c.allow_slowdown { "" } else { "\tno-slowdown" };
        println!("{c}{note}");
    }
    log::info!("{} criteria", list.len());
    Ok(())
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Test-split dataset manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Criterion label such as `WHN-L1` or `ENSC-L2`.
    #[arg(long)]
    pub criterion: String,
    /// Noise index written by `scan-noise`; required for environmental noise.
    #[arg(long)]
    pub noise_index: Option<PathBuf>,
    /// Severity grids and noise pools [default: the built-in tables].
    #[arg(long)]
    pub tables: Option<PathBuf>,
    #[arg(long, default_value_t = GENERATION_SEED)]
    pub seed: u64,
    /// Output benchmark directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Corruption worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Serialize)]
struct BuildRun {
    manifest: PathBuf,
    dataset: String,
    criterion: String,
    allow_slowdown: bool,
    noise_index: Option<PathBuf>,
    tables: String,
    seed: u64,
    workers: usize,
    samples: usize,
    digest: String,
}

fn load_tables(ctx: &Ctx, path: &Option<PathBuf>) -> Result<(Tables, String)> {
    match path {
        Some(p) => {
            let p = ctx.input(p);
            Ok((Tables::load(&p)?, p.display().to_string()))
        }
        None => Ok((Tables::defaults(), "builtin".to_string())),
    }
}

pub fn build(ctx: &Ctx, a: BuildArgs) -> Result<()> {
    let manifest_path = ctx.input(&a.manifest);
    let test = DatasetManifest::load(&manifest_path)?;
    let (corruption, level) = parse_criterion_label(&a.criterion)?;
    let criterion = Criterion::for_dataset(&test.dataset_id, corruption, level)?;
    let (tables, tables_src) = load_tables(ctx, &a.tables)?;
    let noise_index = a.noise_index.as_ref().map(|p| ctx.input(p));
    let lib = match &noise_index {
        Some(p) => NoiseLibrary::from_index(p)?,
        None => NoiseLibrary::new(),
    };
    check_pool_resolution(&tables, &criterion, &lib)?;
    let opts = BuildOptions {
        global_seed: a.seed,
        workers: a.workers,
    };
    let built = build_benchmark(&test, &criterion, &tables, &lib, opts, &a.out)
        .with_context(|| format!("building {criterion}"))?;
    let digest = built.digest();
    write_atomic(&a.out.join(TABLES_COPY_FILE), tables.to_toml_string().as_bytes())?;
    write_toml(
        &a.out.join(RUN_CONFIG_FILE),
        &BuildRun {
            manifest: manifest_path,
            dataset: criterion.dataset_id.clone(),
            criterion: criterion.label(),
            allow_slowdown: criterion.allow_slowdown,
            noise_index,
            tables: tables_src,
            seed: a.seed,
            workers: a.workers,
            samples: built.records.len(),
            digest: digest.clone(),
        },
    )?;
    println!("criterion={criterion}");
    println!("allow_slowdown={}", criterion.allow_slowdown);
    println!("samples={}", built.records.len());
    println!("digest={digest}");
    println!("severity\tcount");
    for (severity, count) in severity_histogram(&built) {
        println!("{severity}\t{count}");
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predictions file: header `predictions N C classes`, then probabilities and label per row.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Benchmark directory or manifest the predictions were made on.
    #[arg(long)]
    pub benchmark: PathBuf,
    /// Metric to highlight instead of the dataset's canonical one.
    #[arg(long)]
    pub metric: Option<String>,
    /// Print JSON instead of key=value lines.
    #[arg(long)]
    pub json: bool,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

const METRIC_NAMES: [&str; 5] = [
    "accuracy_top1",
    "accuracy_ovr",
    "f1_aggregated",
    "f1_macro_per_class",
    "roc_auc_macro",
];

pub fn eval(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    let bench = BenchmarkManifest::load(ctx.input(&a.benchmark))?;
    let (preds, names) = read_predictions(ctx.input(&a.predictions))?;
    if preds.n_samples() != bench.records.len() {
        return Err(CliError::Config(format!(
            "predictions have {} rows but the benchmark has {} samples",
            preds.n_samples(),
            bench.records.len()
        ))
        .into());
    }
    if preds.n_classes() != bench.n_classes() {
        return Err(CliError::Config(format!(
            "predictions have {} classes but the benchmark has {}",
            preds.n_classes(),
            bench.n_classes()
        ))
        .into());
    }
    if names != bench.class_names {
        log::warn!("class names differ from the benchmark's; scoring by index");
    }
    if preds.labels() != bench.labels().as_slice() {
        return Err(CliError::Config("prediction labels do not match the benchmark labels in order".into()).into());
    }
    let mut report = MetricReport::compute(&bench.dataset_id, &preds);
    if let Some(m) = &a.metric {
        report.canonical = METRIC_NAMES
            .iter()
            .copied()
            .find(|n| n == m)
            .ok_or_else(|| CliError::Config(format!("unknown metric `{m}`; expected one of {METRIC_NAMES:?}")))?;
    }
    let text = if a.json { report.to_json() + "\n" } else { report.to_key_value() };
    print!("{text}");
    if let Some(out) = &a.out {
        write_atomic(out, text.as_bytes())?;
    }
    if report.canonical_value().is_none() {
        let reason = report
            .metrics
            .iter()
            .find(|m| m.name == report.canonical)
            .and_then(|m| m.error.clone())
            .unwrap_or_default();
        return Err(CliError::Config(format!("{} is undefined: {reason}", report.canonical)).into());
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Tables file to check [default: the built-in tables].
    #[arg(long)]
    pub tables: Option<PathBuf>,
}

pub fn validate(ctx: &Ctx, a: ValidateArgs) -> Result<()> {
    let (tables, _) = load_tables(ctx, &a.tables)?;
    let report = validate_config(&tables);
    println!("{}", report.to_json());
    if !report.passed {
        return Err(CliError::Config(format!("{} table check(s) failed", report.violations.len())).into());
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct SilhouetteArgs {
    /// TSV of `label<TAB>values...` rows.
    #[arg(long)]
    pub embeddings: PathBuf,
}

pub fn silhouette(ctx: &Ctx, a: SilhouetteArgs) -> Result<()> {
    let path = ctx.input(&a.embeddings);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let (rows, labels) = parse_embeddings(&text)?;
    let s = silhouette_score(&rows, &labels)?;
    println!("n={}\nsilhouette={s:.6}", rows.len());
    Ok(())
}
