//! Exit-code classification.

use std::path::PathBuf;

use shiftbench::audio::AudioError;
use shiftbench::benchmark::BenchmarkError;
use shiftbench::corruption::CorruptionError;
use shiftbench::metrics::MetricError;
use shiftbench::toymodel::ToyError;
use shiftbench::tta::TtaError;
use thiserror::Error;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_POOL: u8 = 4;

/// Errors raised by the command layer itself.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Maps the first recognized error in the chain to an exit code.
pub fn classify(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(code) = code_of(cause) {
            return code;
        }
    }
    EXIT_FAILURE
}

fn code_of(e: &(dyn std::error::Error + 'static)) -> Option<u8> {
    if let Some(e) = e.downcast_ref::<CliError>() {
        return Some(match e {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
        });
    }
    if let Some(e) = e.downcast_ref::<ToyError>() {
        return Some(toy_code(e));
    }
    if let Some(e) = e.downcast_ref::<TtaError>() {
        return Some(tta_code(e));
    }
    if let Some(e) = e.downcast_ref::<BenchmarkError>() {
        return Some(bench_code(e));
    }
    if let Some(e) = e.downcast_ref::<CorruptionError>() {
        return Some(corruption_code(e));
    }
    if let Some(e) = e.downcast_ref::<AudioError>() {
        return Some(audio_code(e));
    }
    if let Some(e) = e.downcast_ref::<MetricError>() {
        return Some(metric_code(e));
    }
    if e.is::<std::io::Error>() {
        return Some(EXIT_IO);
    }
    if e.is::<toml::de::Error>() {
        return Some(EXIT_CONFIG);
    }
    None
}

fn toy_code(e: &ToyError) -> u8 {
    match e {
        ToyError::Tta(e) => tta_code(e),
        ToyError::Benchmark(e) => bench_code(e),
        ToyError::Corruption(e) => corruption_code(e),
        ToyError::Audio(e) => audio_code(e),
        ToyError::Metric(e) => metric_code(e),
        ToyError::Config(_) | ToyError::Checkpoint(_) => EXIT_CONFIG,
        ToyError::Io { .. } => EXIT_IO,
        ToyError::Diverged { .. } => EXIT_FAILURE,
    }
}

fn tta_code(e: &TtaError) -> u8 {
    match e {
        TtaError::Audio(e) => audio_code(e),
        TtaError::Metric(e) => metric_code(e),
        TtaError::Benchmark(e) => bench_code(e),
        TtaError::Config(_) | TtaError::Shape(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn bench_code(e: &BenchmarkError) -> u8 {
    match e {
        BenchmarkError::Corruption(e) => corruption_code(e),
        BenchmarkError::Audio(e) => audio_code(e),
        BenchmarkError::PoolResolution { .. } => EXIT_POOL,
        BenchmarkError::Io { .. } => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

fn corruption_code(e: &CorruptionError) -> u8 {
    match e {
        CorruptionError::Audio(e) => audio_code(e),
        CorruptionError::Io { .. } | CorruptionError::UnreadableAudio { .. } => EXIT_IO,
        CorruptionError::UnknownNoiseType(_) | CorruptionError::EmptySource(_) => EXIT_POOL,
        CorruptionError::Config(_) | CorruptionError::Parse(_) | CorruptionError::SeverityOutOfRange { .. } => {
            EXIT_CONFIG
        }
        _ => EXIT_FAILURE,
    }
}

fn audio_code(e: &AudioError) -> u8 {
    match e {
        AudioError::NotFound(_)
        | AudioError::Io { .. }
        | AudioError::MalformedHeader { .. }
        | AudioError::UnsupportedEncoding { .. } => EXIT_IO,
        AudioError::InvalidMelConfig(_) | AudioError::InvalidTargetRate(_) | AudioError::ShiftOutOfRange { .. } => {
            EXIT_CONFIG
        }
        _ => EXIT_FAILURE,
    }
}

fn metric_code(e: &MetricError) -> u8 {
    match e {
        MetricError::Io(_) => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}
