//! Seeded, parallel materialization of a corrupted benchmark set.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::criteria::Criterion;
use super::manifest::{hex_sha256, write_atomic, BenchmarkManifest, BenchmarkRecord, DatasetManifest, BENCHMARK_MANIFEST_FILE};
use super::BenchmarkError;
use crate::audio::{encode_wav, load_wav, WavEncoding};
use crate::corruption::{corrupt_sample, derive_seed, NoiseLibrary, Tables};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    pub global_seed: u64,
    /// Worker threads for per-sample corruption; 0 means the rayon default.
    pub workers: usize,
}

/// Default seed for generating corrupted test sets.
pub const GENERATION_SEED: u64 = 2025;
/// Default seed for the held-out evaluation set.
pub const EVALUATION_SEED: u64 = 123456;

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            global_seed: GENERATION_SEED,
            workers: 0,
        }
    }
}

/// Checks that every noise type the criterion can draw resolves to a source.
pub fn check_pool_resolution(tables: &Tables, criterion: &Criterion, lib: &NoiseLibrary) -> Result<(), BenchmarkError> {
    let spec = tables.spec(criterion.corruption, criterion.level, criterion.allow_slowdown)?;
    if spec.family() != crate::corruption::Family::Environmental {
        return Ok(());
    }
    let pool = spec.pool.as_ref().map(|p| p.noise_types.as_slice()).unwrap_or_default();
    let missing: Vec<String> = pool.iter().filter(|t| !lib.resolves(t)).cloned().collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(BenchmarkError::PoolResolution {
            criterion: criterion.label(),
            missing,
        })
    }
}

/// Corrupts every entry of `test` under `criterion` and writes the results
/// to `out_dir`. Audio goes to content-addressed float32 WAVs under
/// `audio/`; the manifest is written last, so its presence marks a
/// complete build. Output is independent of the worker count.
pub fn build_benchmark(
    test: &DatasetManifest,
    criterion: &Criterion,
    tables: &Tables,
    lib: &NoiseLibrary,
    opts: BuildOptions,
    out_dir: impl AsRef<Path>,
) -> Result<BenchmarkManifest, BenchmarkError> {
    let out_dir = out_dir.as_ref();
    if criterion.dataset_id != test.dataset_id {
        return Err(BenchmarkError::InvalidManifest(format!(
            "criterion is for `{}` but the manifest is `{}`",
            criterion.dataset_id, test.dataset_id
        )));
    }
    let spec = tables.spec(criterion.corruption, criterion.level, criterion.allow_slowdown)?;
    check_pool_resolution(tables, criterion, lib)?;

    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| BenchmarkError::Io { path, source }
    };
    std::fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let manifest_path = out_dir.join(BENCHMARK_MANIFEST_FILE);
    if manifest_path.exists() {
        std::fs::remove_file(&manifest_path).map_err(io(&manifest_path))?;
    }

    let label = criterion.label();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| BenchmarkError::Config(format!("thread pool: {e}")))?;
    let records: Vec<BenchmarkRecord> = pool.install(|| {
        test.entries
            .par_iter()
            .enumerate()
            .map(|(i, entry)| {
                let seed = derive_seed(opts.global_seed, &test.dataset_id, &label, i as u64);
                let clean = load_wav(test.resolve(entry))?;
                let (corrupted, record) = corrupt_sample(&clean, &spec, lib, &entry.sample_id, seed)?;
                let bytes = encode_wav(&corrupted, WavEncoding::Float32)?;
                let hash = hex_sha256(&bytes);
                let rel = format!("audio/{}/{hash}.wav", &hash[..2]);
                let path = out_dir.join(&rel);
                if !path.exists() {
                    let dir = path.parent().unwrap_or(out_dir);
                    std::fs::create_dir_all(dir).map_err(io(dir))?;
                    // Per-index temp name: equal content may race on the same target.
                    let tmp = path.with_extension(format!("{i}.partial"));
                    std::fs::write(&tmp, &bytes).map_err(io(&tmp))?;
                    std::fs::rename(&tmp, &path).map_err(io(&path))?;
                }
                Ok(BenchmarkRecord {
                    entry: entry.clone(),
                    corruption: record,
                    corrupted_path: rel,
                })
            })
            .collect::<Result<_, BenchmarkError>>()
    })?;

    let manifest = BenchmarkManifest {
        dataset_id: test.dataset_id.clone(),
        class_names: test.class_names.clone(),
        criterion: criterion.clone(),
        global_seed: opts.global_seed,
        records,
        root: out_dir.to_path_buf(),
    };
    write_atomic(&manifest_path, manifest.to_text().as_bytes())?;
    log::info!("built {} ({} samples)", criterion, manifest.records.len());
    Ok(manifest)
}

/// Count of records per drawn severity, keyed by its text form.
pub fn severity_histogram(m: &BenchmarkManifest) -> BTreeMap<String, usize> {
    let mut keyed: Vec<(f64, usize)> = Vec::new();
    for r in &m.records {
        let s = r.corruption.severity;
        match keyed.iter_mut().find(|(v, _)| *v == s) {
            Some((_, n)) => *n += 1,
            None => keyed.push((s, 1)),
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    keyed.into_iter().map(|(v, n)| (format!("{v}"), n)).collect()
}

/// Path of the manifest inside a benchmark directory.
pub fn manifest_path(out_dir: impl AsRef<Path>) -> PathBuf {
    out_dir.as_ref().join(BENCHMARK_MANIFEST_FILE)
}
