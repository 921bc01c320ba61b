use std::f64::consts::PI;

use super::{AudioError, Waveform};

/// Windowed-sinc kernel size, as the number of zero crossings kept on each
/// side of the interpolation point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResampleQuality {
    pub zero_crossings: usize,
}

impl ResampleQuality {
    pub const FAST: Self = Self { zero_crossings: 8 };
    pub const HIGH: Self = Self { zero_crossings: 32 };
}

impl Default for ResampleQuality {
    fn default() -> Self {
        Self::HIGH
    }
}

// Passband edge as a fraction of the lower Nyquist frequency.
const ROLLOFF: f64 = 0.95;

/// Band-limited resampling to `target_rate`. Output length is
/// `round(len * target / source)`.
pub fn resample(
    w: &Waveform,
    target_rate: u32,
    quality: ResampleQuality,
) -> Result<Waveform, AudioError> {
    if target_rate == 0 {
        return Err(AudioError::InvalidTargetRate(
            "target rate must be positive".into(),
        ));
    }
    if target_rate == w.sample_rate() {
        return Ok(w.clone());
    }
    let ratio = target_rate as f64 / w.sample_rate() as f64;
    let out_len = (w.len() as f64 * ratio).round() as usize;
    let samples = resample_ratio(w.samples(), ratio, out_len, quality);
    Waveform::new(samples, target_rate)
}

/// Resamples raw samples by `ratio = out_rate / in_rate` to exactly
/// `out_len` outputs. Positions past the input end read as zero.
pub fn resample_ratio(
    input: &[f64],
    ratio: f64,
    out_len: usize,
    quality: ResampleQuality,
) -> Vec<f64> {
    assert!(ratio > 0.0 && ratio.is_finite(), "ratio must be positive");
    if input.is_empty() {
        return vec![0.0; out_len];
    }
    let cutoff = ratio.min(1.0) * ROLLOFF;
    let half_width = quality.zero_crossings.max(1) as f64 / cutoff;
    let n_in = input.len() as isize;

    (0..out_len)
        .map(|n| {
            let t = n as f64 / ratio;
            let lo = ((t - half_width).ceil() as isize).max(0);
            let hi = ((t + half_width).floor() as isize).min(n_in - 1);
            let mut acc = 0.0;
            for k in lo..=hi {
                let d = t - k as f64;
                acc += input[k as usize] * cutoff * sinc(cutoff * d) * blackman(d / half_width);
            }
            acc
        })
        .collect()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Blackman window on `u ∈ [-1, 1]`, zero outside.
fn blackman(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        return 0.0;
    }
    0.42 + 0.5 * (PI * u).cos() + 0.08 * (2.0 * PI * u).cos()
}
