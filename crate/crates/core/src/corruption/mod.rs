//! The corruption engine: severity grids and noise pools, seeded per-sample
//! randomness, additive noise at a target SNR, time stretching and pitch
//! shifting.

mod engine;
mod noise;
mod seed;
mod tables;
mod vocoder;

use std::path::PathBuf;

use thiserror::Error;

use crate::audio::AudioError;

pub use engine::{corrupt_sample, sample_severity, CorruptionRecord};
pub use noise::{
    gen_white_noise, mix_at_snr, mix_components, parse_noise_index, pick_noise_segment,
    read_noise_index, scan_noise_dir, snr_gain, white_noise_raw, write_noise_index, Mixture,
    NoiseIndexEntry, NoiseLibrary, NoiseSegment, NoiseSource, WhiteNoiseKind, GAUSSIAN_NOISE,
    UNIFORM_NOISE,
};
pub use seed::{derive_seed, splitmix64};
pub use tables::{
    CorruptionId, CorruptionSpec, Family, Level, NoisePool, SeverityGrid, Tables,
    DEFAULT_TABLES_TOML, TABLES_VERSION,
};
pub use vocoder::{
    pitch_shift, stretch_by_rate, time_stretch, VocoderConfig, MAX_PITCH_SEMITONES,
    MAX_STRETCH_PERCENT,
};

#[derive(Debug, Error)]
pub enum CorruptionError {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("severity grid is empty")]
    EmptyGrid,
    #[error("requested noise length must be positive")]
    EmptyLength,
    #[error("{0} signal has zero power")]
    ZeroPower(&'static str),
    #[error("length mismatch: clean {clean} vs noise {noise} samples")]
    LengthMismatch { clean: usize, noise: usize },
    #[error("sample-rate mismatch: clean {clean} Hz vs noise {noise} Hz")]
    RateMismatch { clean: u32, noise: u32 },
    #[error("{what} {value} out of range")]
    SeverityOutOfRange { what: &'static str, value: f64 },
    #[error("noise type `{0}` does not resolve to any source")]
    UnknownNoiseType(String),
    #[error("noise source `{0}` is empty")]
    EmptySource(String),
    #[error("unreadable audio {path}: {detail}")]
    UnreadableAudio { path: PathBuf, detail: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("configuration error: {0}")]
    Config(String),
}
