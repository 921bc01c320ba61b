use rand::Rng;

use super::TtaError;
use crate::audio::{temporal_shift, ShiftDirection, Waveform};

/// Left- and right-shifted copies of every clip. Each clip draws its two
/// shift fractions independently and uniformly from `[0, max_fraction]`.
pub fn make_views<R: Rng + ?Sized>(
    batch: &[Waveform],
    max_fraction: f64,
    rng: &mut R,
) -> Result<(Vec<Waveform>, Vec<Waveform>), TtaError> {
    let mut left = Vec::with_capacity(batch.len());
    let mut right = Vec::with_capacity(batch.len());
    for w in batch {
        let (fl, fr) = if max_fraction > 0.0 {
            (rng.random_range(0.0..=max_fraction), rng.random_range(0.0..=max_fraction))
        } else {
            (0.0, 0.0)
        };
        left.push(temporal_shift(w, ShiftDirection::Left, fl, max_fraction)?);
        right.push(temporal_shift(w, ShiftDirection::Right, fr, max_fraction)?);
    }
    Ok((left, right))
}
