//! Pitch-preserving time stretch (phase vocoder) and duration-preserving
//! pitch shift built from it.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::CorruptionError;
use crate::audio::{resample_ratio, ResampleQuality, Waveform};

/// Largest accepted |percent| for [`time_stretch`].
pub const MAX_STRETCH_PERCENT: f64 = 50.0;
/// Largest accepted |semitones| for [`pitch_shift`].
pub const MAX_PITCH_SEMITONES: f64 = 24.0;

/// STFT frame and hop for the vocoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VocoderConfig {
    pub n_fft: usize,
    pub hop: usize,
}

impl VocoderConfig {
    /// 2048/512 at 44.1 kHz, scaled in proportion to the sample rate.
    pub fn for_rate(sample_rate: u32) -> Self {
        let scale = sample_rate as f64 / 44100.0;
        let n_fft = ((2048.0 * scale).round() as usize).max(16);
        let hop = ((512.0 * scale).round() as usize).clamp(1, n_fft / 2);
        Self { n_fft, hop }
    }
}

/// Changes tempo by `percent` without changing pitch. Positive is faster
/// (shorter output): rate `r = 1 + percent/100`, output length `round(len/r)`.
pub fn time_stretch(w: &Waveform, percent: f64) -> Result<Waveform, CorruptionError> {
    if !percent.is_finite() || percent.abs() >= MAX_STRETCH_PERCENT {
        return Err(CorruptionError::SeverityOutOfRange {
            what: "time-stretch percent",
            value: percent,
        });
    }
    stretch_by_rate(w, 1.0 + percent / 100.0, VocoderConfig::for_rate(w.sample_rate()))
}

/// Shifts pitch by `semitones` keeping the exact input length: stretch by
/// `2^(s/12)` then resample back to the original rate.
pub fn pitch_shift(w: &Waveform, semitones: f64) -> Result<Waveform, CorruptionError> {
    if !semitones.is_finite() || semitones.abs() > MAX_PITCH_SEMITONES {
        return Err(CorruptionError::SeverityOutOfRange {
            what: "pitch-shift semitones",
            value: semitones,
        });
    }
    let factor = 2f64.powf(semitones / 12.0);
    let stretched = stretch_by_rate(w, 1.0 / factor, VocoderConfig::for_rate(w.sample_rate()))?;
    let samples = resample_ratio(stretched.samples(), 1.0 / factor, w.len(), ResampleQuality::HIGH);
    Ok(w.with_samples(samples)?)
}

/// Phase-vocoder stretch by playback `rate` (> 1 shortens).
pub fn stretch_by_rate(w: &Waveform, rate: f64, cfg: VocoderConfig) -> Result<Waveform, CorruptionError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(CorruptionError::SeverityOutOfRange {
            what: "stretch rate",
            value: rate,
        });
    }
    let target_len = (w.len() as f64 / rate).round() as usize;
    if w.is_empty() {
        return Ok(w.with_samples(Vec::new())?);
    }
    let VocoderConfig { n_fft, hop } = cfg;
    let n_bins = n_fft / 2 + 1;
    let pad = n_fft / 2;
    let window: Vec<f64> = (0..n_fft)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n_fft as f64).cos())
        .collect();

    let mut padded = vec![0.0; w.len() + 2 * pad];
    padded[pad..pad + w.len()].copy_from_slice(w.samples());
    let n_frames = 1 + (padded.len() - n_fft) / hop;

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n_fft);
    let inv = planner.plan_fft_inverse(n_fft);

    // Analysis, plus one trailing silent frame for interpolation.
    let mut spec: Vec<Vec<Complex<f64>>> = Vec::with_capacity(n_frames + 1);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    for t in 0..n_frames {
        let start = t * hop;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(padded[start + i] * window[i], 0.0);
        }
        fwd.process(&mut buf);
        spec.push(buf[..n_bins].to_vec());
    }
    spec.push(vec![Complex::new(0.0, 0.0); n_bins]);

    let advance: Vec<f64> = (0..n_bins)
        .map(|k| 2.0 * PI * k as f64 * hop as f64 / n_fft as f64)
        .collect();
    let mut phase: Vec<f64> = spec[0].iter().map(|c| c.arg()).collect();

    let n_out = (n_frames as f64 / rate).ceil() as usize;
    let out_len = n_fft + hop * n_out.saturating_sub(1);
    let mut out = vec![0.0; out_len];
    let mut norm = vec![0.0; out_len];
    let mut full = vec![Complex::new(0.0, 0.0); n_fft];

    for j in 0..n_out {
        let t = j as f64 * rate;
        let left = (t.floor() as usize).min(n_frames - 1);
        let alpha = t - left as f64;
        let (a, b) = (&spec[left], &spec[left + 1]);
        for k in 0..n_bins {
            let mag = (1.0 - alpha) * a[k].norm() + alpha * b[k].norm();
            full[k] = Complex::from_polar(mag, phase[k]);
            let mut dphi = b[k].arg() - a[k].arg() - advance[k];
            dphi -= 2.0 * PI * (dphi / (2.0 * PI)).round();
            phase[k] += advance[k] + dphi;
        }
        for k in 1..n_fft - n_bins + 1 {
            full[n_fft - k] = full[k].conj();
        }
        inv.process(&mut full);
        let start = j * hop;
        for i in 0..n_fft {
            out[start + i] += full[i].re / n_fft as f64 * window[i];
            norm[start + i] += window[i] * window[i];
        }
    }

    let samples: Vec<f64> = (0..target_len)
        .map(|i| {
            let idx = i + pad;
            if idx < out_len && norm[idx] > 1e-10 {
                out[idx] / norm[idx]
            } else {
                0.0
            }
        })
        .collect();
    Ok(w.with_samples(samples)?)
}
