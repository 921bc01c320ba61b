//! Synthetic multi-class audio: each class is a harmonic tone with its own
//! fundamental, harmonic profile and amplitude-modulation rate.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ToyError;
use crate::audio::{hz_to_mel, save_wav, MelConfig, WavEncoding, Waveform};
use crate::benchmark::{DatasetManifest, ManifestEntry};
use crate::corruption::derive_seed;

pub const TOY_DATASET_ID: &str = "TOY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassVoice {
    pub name: String,
    pub fundamental_hz: f64,
    /// Relative amplitudes of harmonics 1, 2, 3, ...
    pub harmonics: Vec<f64>,
    pub am_rate_hz: f64,
    /// Modulation depth in [0, 1).
    pub am_depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyTaskConfig {
    pub clip_seconds: f64,
    pub sample_rate: u32,
    pub classes: Vec<ClassVoice>,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Relative fundamental jitter, drawn uniformly in ±jitter per clip.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for ToyTaskConfig {
    fn default() -> Self {
        let voice = |name: &str, f0, harmonics: &[f64], am| ClassVoice {
            name: name.to_string(),
            fundamental_hz: f0,
            harmonics: harmonics.to_vec(),
            am_rate_hz: am,
            am_depth: 0.3,
        };
        Self {
            clip_seconds: 1.0,
            sample_rate: 16000,
            classes: vec![
                voice("low", 200.0, &[1.0, 0.5, 0.3, 0.15], 3.0),
                voice("mid", 320.0, &[1.0, 0.6, 0.2], 4.5),
                voice("high", 512.0, &[1.0, 0.4, 0.25, 0.1], 6.0),
                voice("top", 820.0, &[1.0, 0.5], 7.5),
            ],
            train_per_class: 64,
            test_per_class: 48,
            jitter: 0.01,
            seed: 7,
        }
    }
}

impl ToyTaskConfig {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn clip_len(&self) -> usize {
        (self.clip_seconds * self.sample_rate as f64).round() as usize
    }

    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.name.clone()).collect()
    }

    /// Smallest distance between two class fundamentals, in mel-filter
    /// spacings of the default mel configuration.
    pub fn min_fundamental_separation(&self) -> f64 {
        let cfg = MelConfig::for_rate(self.sample_rate);
        let fmax = cfg.fmax.unwrap_or(self.sample_rate as f64 / 2.0);
        let spacing = (hz_to_mel(fmax) - hz_to_mel(cfg.fmin)) / (cfg.n_mels + 1) as f64;
        let mut sep = f64::INFINITY;
        for (i, a) in self.classes.iter().enumerate() {
            for b in &self.classes[i + 1..] {
                sep = sep.min((hz_to_mel(a.fundamental_hz) - hz_to_mel(b.fundamental_hz)).abs() / spacing);
            }
        }
        sep
    }

    pub fn validate(&self) -> Result<(), ToyError> {
        let bad = |m: String| Err(ToyError::Config(m));
        if self.classes.len() < 2 {
            return bad("need at least two classes".into());
        }
        if self.clip_seconds.is_nan() || self.clip_seconds <= 0.0 || self.sample_rate == 0 || self.clip_len() == 0 {
            return bad("clip length and sample rate must be positive".into());
        }
        if self.train_per_class == 0 || self.test_per_class == 0 {
            return bad("per-class sizes must be positive".into());
        }
        if !(0.0..0.1).contains(&self.jitter) {
            return bad(format!("jitter {} must be in [0, 0.1)", self.jitter));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        for c in &self.classes {
            if c.name.is_empty() || c.name.contains([',', '\t', '\n']) {
                return bad(format!("class name `{}` is not a plain token", c.name));
            }
            if !(c.fundamental_hz > 0.0 && c.fundamental_hz * (1.0 + self.jitter) < nyquist) {
                return bad(format!("class `{}` fundamental out of range", c.name));
            }
            if c.harmonics.is_empty() || c.harmonics.iter().any(|a| a.is_nan() || *a < 0.0) || c.harmonics[0] <= 0.0 {
                return bad(format!("class `{}` needs a positive first harmonic", c.name));
            }
            if !(0.0..1.0).contains(&c.am_depth) || c.am_rate_hz.is_nan() || c.am_rate_hz < 0.0 {
                return bad(format!("class `{}` modulation out of range", c.name));
            }
        }
        let sep = self.min_fundamental_separation();
        if sep < 3.0 {
            return bad(format!("class fundamentals are only {sep:.2} mel bins apart; need 3"));
        }
        Ok(())
    }
}

/// One clip of `voice`, using `rng` for jitter, phases and gain.
pub fn synth_clip<R: Rng + ?Sized>(voice: &ClassVoice, cfg: &ToyTaskConfig, rng: &mut R) -> Waveform {
    let sr = cfg.sample_rate as f64;
    let f0 = voice.fundamental_hz * (1.0 + rng.random_range(-cfg.jitter..=cfg.jitter));
    let gain = rng.random_range(0.3..0.8);
    let am_phase = rng.random_range(0.0..2.0 * PI);
    let partials: Vec<(f64, f64, f64)> = voice
        .harmonics
        .iter()
        .enumerate()
        .map(|(h, &a)| (f0 * (h + 1) as f64, a, rng.random_range(0.0..2.0 * PI)))
        .filter(|(f, _, _)| *f < sr / 2.0)
        .collect();
    let norm: f64 = partials.iter().map(|p| p.1).sum();
    let samples = (0..cfg.clip_len())
        .map(|i| {
            let t = i as f64 / sr;
            let env = (1.0 + voice.am_depth * (2.0 * PI * voice.am_rate_hz * t + am_phase).sin()) / (1.0 + voice.am_depth);
            let tone: f64 = partials.iter().map(|(f, a, ph)| a * (2.0 * PI * f * t + ph).sin()).sum();
            gain * env * tone / norm
        })
        .collect();
    Waveform::new(samples, cfg.sample_rate).expect("synthesized samples are finite")
}

/// Which half of the toy task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToySplit {
    Train,
    Test,
}

impl ToySplit {
    pub fn as_str(self) -> &'static str {
        match self {
            ToySplit::Train => "train",
            ToySplit::Test => "test",
        }
    }
}

/// Clips and labels of one split, class-major order. Each clip has its own
/// derived seed, so generation order does not matter.
pub fn synth_split(cfg: &ToyTaskConfig, split: ToySplit) -> Result<(Vec<Waveform>, Vec<usize>), ToyError> {
    cfg.validate()?;
    let per = match split {
        ToySplit::Train => cfg.train_per_class,
        ToySplit::Test => cfg.test_per_class,
    };
    let jobs: Vec<(usize, usize)> = (0..cfg.n_classes()).flat_map(|c| (0..per).map(move |k| (c, k))).collect();
    let waves = jobs
        .par_iter()
        .enumerate()
        .map(|(i, &(c, _))| {
            let seed = derive_seed(cfg.seed, TOY_DATASET_ID, split.as_str(), i as u64);
            synth_clip(&cfg.classes[c], cfg, &mut ChaCha8Rng::seed_from_u64(seed))
        })
        .collect();
    Ok((waves, jobs.iter().map(|j| j.0).collect()))
}

/// Generated dataset on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyDataset {
    pub train: DatasetManifest,
    pub test: DatasetManifest,
}

pub const TOY_TRAIN_MANIFEST: &str = "train.tsv";
pub const TOY_TEST_MANIFEST: &str = "test.tsv";

/// Writes both splits as float32 WAVs plus `train.tsv` and `test.tsv`.
pub fn gen_toy_dataset(cfg: &ToyTaskConfig, out_dir: impl AsRef<Path>) -> Result<ToyDataset, ToyError> {
    let out_dir = out_dir.as_ref();
    let mut manifests = Vec::new();
    for split in [ToySplit::Train, ToySplit::Test] {
        let (waves, labels) = synth_split(cfg, split)?;
        let dir = out_dir.join("clips").join(split.as_str());
        std::fs::create_dir_all(&dir).map_err(|e| ToyError::io(&dir, e))?;
        let entries = waves
            .par_iter()
            .zip(labels.par_iter())
            .enumerate()
            .map(|(i, (w, &label))| {
                let rel = format!("clips/{}/{}_{i:04}.wav", split.as_str(), cfg.classes[label].name);
                save_wav(w, out_dir.join(&rel), WavEncoding::Float32)?;
                Ok(ManifestEntry {
                    sample_id: format!("{}-{i:04}", split.as_str()),
                    path: rel,
                    label,
                    fold: None,
                    duration_s: w.duration_seconds(),
                    sample_rate: w.sample_rate(),
                })
            })
            .collect::<Result<Vec<_>, ToyError>>()?;
        let m = DatasetManifest::new(TOY_DATASET_ID, cfg.class_names(), entries, out_dir)?;
        let name = match split {
            ToySplit::Train => TOY_TRAIN_MANIFEST,
            ToySplit::Test => TOY_TEST_MANIFEST,
        };
        m.save(out_dir.join(name))?;
        manifests.push(m);
    }
    let test = manifests.pop().expect("two splits");
    let train = manifests.pop().expect("two splits");
    Ok(ToyDataset { train, test })
}
