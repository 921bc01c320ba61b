//! Log-mel spectrogram with an HTK-scale triangular filterbank.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{AudioError, Waveform};

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Window and hop are in samples. `fmax = None` means Nyquist.
#[derive(Debug, Clone, PartialEq)]
pub struct MelConfig {
    pub n_mels: usize,
    pub window: usize,
    pub hop: usize,
    pub fmin: f64,
    pub fmax: Option<f64>,
    /// Energies below this are clamped before the natural log.
    pub log_floor: f64,
}

impl MelConfig {
    /// 64 mels, 25 ms window, 10 ms hop, 0 Hz to Nyquist.
    pub fn for_rate(sample_rate: u32) -> Self {
        let sr = sample_rate as f64;
        Self {
            n_mels: 64,
            window: (0.025 * sr).round() as usize,
            hop: (0.010 * sr).round() as usize,
            fmin: 0.0,
            fmax: None,
            log_floor: 1e-10,
        }
    }

    pub fn n_fft(&self) -> usize {
        self.window.next_power_of_two()
    }

    pub fn n_frames(&self, len: usize) -> usize {
        if len <= self.window {
            1
        } else {
            1 + (len - self.window) / self.hop
        }
    }

    fn validate(&self, sample_rate: u32) -> Result<f64, AudioError> {
        let nyquist = sample_rate as f64 / 2.0;
        let fmax = self.fmax.unwrap_or(nyquist);
        let bad = |m: &str| Err(AudioError::InvalidMelConfig(m.to_string()));
        if self.n_mels == 0 {
            return bad("n_mels must be at least 1");
        }
        if self.hop == 0 || self.window < self.hop {
            return bad("require window >= hop > 0");
        }
        if !(self.fmin >= 0.0 && self.fmin < fmax) {
            return bad("require 0 <= fmin < fmax");
        }
        if fmax > nyquist {
            return bad("fmax exceeds Nyquist");
        }
        if self.log_floor.is_nan() || self.log_floor <= 0.0 {
            return bad("log floor must be positive");
        }
        Ok(fmax)
    }
}

/// `n_mels × n_frames` natural-log mel energies, stored row-major by mel bin.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFeature {
    pub bins: Vec<f64>,
    pub n_mels: usize,
    pub n_frames: usize,
    pub frame_hop: usize,
}

impl MelFeature {
    pub fn get(&self, mel: usize, frame: usize) -> f64 {
        self.bins[mel * self.n_frames + frame]
    }

    pub fn row(&self, mel: usize) -> &[f64] {
        &self.bins[mel * self.n_frames..(mel + 1) * self.n_frames]
    }
}

/// Precomputed window, FFT plan and filterbank for one (config, rate) pair.
#[derive(Clone)]
pub struct MelExtractor {
    cfg: MelConfig,
    sample_rate: u32,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    // n_mels rows of (first_bin, weights)
    filters: Vec<(usize, Vec<f64>)>,
}

impl std::fmt::Debug for MelExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MelExtractor")
            .field("cfg", &self.cfg)
            .field("sample_rate", &self.sample_rate)
            .finish()
    }
}

impl MelExtractor {
    pub fn new(cfg: MelConfig, sample_rate: u32) -> Result<Self, AudioError> {
        let fmax = cfg.validate(sample_rate)?;
        let n_fft = cfg.n_fft();
        let window = (0..cfg.window)
            .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / cfg.window as f64).cos())
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(n_fft);

        let n_bins = n_fft / 2 + 1;
        let (mel_lo, mel_hi) = (hz_to_mel(cfg.fmin), hz_to_mel(fmax));
        let edges: Vec<f64> = (0..cfg.n_mels + 2)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (cfg.n_mels + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / n_fft as f64;
        let filters = (0..cfg.n_mels)
            .map(|m| {
                let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                let weights: Vec<f64> = (0..n_bins)
                    .map(|k| {
                        let f = k as f64 * bin_hz;
                        let rise = (f - lo) / (center - lo);
                        let fall = (hi - f) / (hi - center);
                        rise.min(fall).max(0.0)
                    })
                    .collect();
                let first = weights.iter().position(|&w| w > 0.0).unwrap_or(0);
                let last = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
                let band = if last >= first {
                    weights[first..=last].to_vec()
                } else {
                    Vec::new()
                };
                (first, band)
            })
            .collect();

        Ok(Self {
            cfg,
            sample_rate,
            window,
            fft,
            filters,
        })
    }

    pub fn config(&self) -> &MelConfig {
        &self.cfg
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn extract(&self, w: &Waveform) -> Result<MelFeature, AudioError> {
        if w.sample_rate() != self.sample_rate {
            return Err(AudioError::InvalidMelConfig(format!(
                "extractor built for {} Hz, got {} Hz",
                self.sample_rate,
                w.sample_rate()
            )));
        }
        let cfg = &self.cfg;
        let n_fft = cfg.n_fft();
        let n_frames = cfg.n_frames(w.len());
        let mut bins = vec![0.0; cfg.n_mels * n_frames];
        let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut power = vec![0.0; n_fft / 2 + 1];
        let x = w.samples();

        for t in 0..n_frames {
            let start = t * cfg.hop;
            for (i, slot) in buf.iter_mut().enumerate() {
                let s = if i < cfg.window {
                    x.get(start + i).copied().unwrap_or(0.0) * self.window[i]
                } else {
                    0.0
                };
                *slot = Complex::new(s, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            for (m, (first, weights)) in self.filters.iter().enumerate() {
                let e: f64 = weights
                    .iter()
                    .zip(&power[*first..])
                    .map(|(w, p)| w * p)
                    .sum();
                bins[m * n_frames + t] = e.max(cfg.log_floor).ln();
            }
        }

        Ok(MelFeature {
            bins,
            n_mels: cfg.n_mels,
            n_frames,
            frame_hop: cfg.hop,
        })
    }
}

/// One-shot convenience wrapper around [`MelExtractor`].
pub fn mel_spectrogram(w: &Waveform, cfg: &MelConfig) -> Result<MelFeature, AudioError> {
    MelExtractor::new(cfg.clone(), w.sample_rate())?.extract(w)
}
