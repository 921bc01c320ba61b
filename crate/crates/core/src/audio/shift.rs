use super::{AudioError, Waveform};

/// Largest view shift, as a fraction of clip length, used by default.
pub const DEFAULT_MAX_SHIFT_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftDirection {
    Left,
    Right,
}

/// Shifts `w` by `round(fraction * len)` samples, zero-filling the vacated
/// border. Length is preserved.
pub fn temporal_shift(
    w: &Waveform,
    direction: ShiftDirection,
    fraction: f64,
    max_fraction: f64,
) -> Result<Waveform, AudioError> {
    if !(fraction >= 0.0 && fraction <= max_fraction) {
        return Err(AudioError::ShiftOutOfRange {
            fraction,
            max: max_fraction,
        });
    }
    let len = w.len();
    let shift = ((fraction * len as f64).round() as usize).min(len);
    let x = w.samples();
    let mut out = vec![0.0; len];
    match direction {
        ShiftDirection::Right => out[shift..].copy_from_slice(&x[..len - shift]),
        ShiftDirection::Left => out[..len - shift].copy_from_slice(&x[shift..]),
    }
    w.with_samples(out)
}
