//! Waveform representation and the signal-level building blocks shared by the
//! corruption engine and the adaptation loop: WAV I/O, power measurement,
//! band-limited resampling, log-mel features and temporal shifting.

mod mel;
mod resample;
mod shift;
mod wav;

use std::path::PathBuf;

use thiserror::Error;

pub use mel::{hz_to_mel, mel_spectrogram, mel_to_hz, MelConfig, MelExtractor, MelFeature};
pub use resample::{resample, resample_ratio, ResampleQuality};
pub use shift::{temporal_shift, ShiftDirection, DEFAULT_MAX_SHIFT_FRACTION};
pub use wav::{decode_wav, encode_wav, load_wav, save_wav, WavEncoding};

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("audio file not found: {0}")]
    NotFound(PathBuf),
    #[error("malformed WAV header in {origin}: {detail}")]
    MalformedHeader { origin: String, detail: String },
    #[error("unsupported WAV encoding in {origin}: {detail}")]
    UnsupportedEncoding { origin: String, detail: String },
    #[error("I/O error on {origin}: {source}")]
    Io {
        origin: String,
        #[source]
        source: std::io::Error,
    },
    #[error("sample rate must be positive")]
    InvalidSampleRate,
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("operation requires a non-empty waveform")]
    Empty,
    #[error("shift fraction {fraction} outside [0, {max}]")]
    ShiftOutOfRange { fraction: f64, max: f64 },
    #[error("invalid mel configuration: {0}")]
    InvalidMelConfig(String),
    #[error("invalid resampling target: {0}")]
    InvalidTargetRate(String),
}

/// Mono PCM audio with its sample rate. Samples are finite and nominally in
/// `[-1, 1]`; values outside that range are kept until int16 serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidSampleRate);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::NonFiniteSample(i));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Result<Self, AudioError> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Same rate, new samples. Used internally where finiteness is already
    /// guaranteed by construction, but still checked.
    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Result<Self, AudioError> {
        Self::new(samples, self.sample_rate)
    }
}

/// Mean-square power `(1/L) Σ s_i²` over the whole clip.
pub fn rms_power(w: &Waveform) -> Result<f64, AudioError> {
    if w.is_empty() {
        return Err(AudioError::Empty);
    }
    Ok(mean_square(w.samples()))
}

pub(crate) fn mean_square(x: &[f64]) -> f64 {
    x.iter().map(|s| s * s).sum::<f64>() / x.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_construction() {
        assert!(matches!(
            Waveform::new(vec![0.0], 0),
            Err(AudioError::InvalidSampleRate)
        ));
        assert!(matches!(
            Waveform::new(vec![0.0, f64::NAN], 8000),
            Err(AudioError::NonFiniteSample(1))
        ));
        assert!(Waveform::new(vec![0.0, f64::INFINITY], 8000).is_err());
    }

    #[test]
    fn duration_is_len_over_rate() {
        let w = Waveform::zeros(8000, 16000).unwrap();
        assert_eq!(w.duration_seconds(), 0.5);
    }

    #[test]
    fn power_examples() {
        let zero = Waveform::zeros(100, 8000).unwrap();
        assert_eq!(rms_power(&zero).unwrap(), 0.0);

        let c = Waveform::new(vec![0.25; 1000], 8000).unwrap();
        assert!((rms_power(&c).unwrap() - 0.0625).abs() < 1e-15);

        // 100 Hz at 8 kHz: 80 samples per period, 10 whole periods.
        let sine: Vec<f64> = (0..800)
            .map(|i| (2.0 * std::f64::consts::PI * 100.0 * i as f64 / 8000.0).sin())
            .collect();
        let p = rms_power(&Waveform::new(sine, 8000).unwrap()).unwrap();
        assert!((p - 0.5).abs() < 1e-6);

        let empty = Waveform::new(vec![], 8000).unwrap();
        assert!(matches!(rms_power(&empty), Err(AudioError::Empty)));
    }
}
