use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::noise::{gen_white_noise, mix_components, pick_noise_segment, NoiseLibrary, WhiteNoiseKind};
use super::tables::{CorruptionId, CorruptionSpec, Family, Level, SeverityGrid};
use super::vocoder::{pitch_shift, time_stretch};
use super::CorruptionError;
use crate::audio::Waveform;

/// Per-sample provenance: enough to regenerate the corrupted clip exactly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorruptionRecord {
    pub sample_id: String,
    pub corruption: CorruptionId,
    pub level: Level,
    pub noise_type: Option<String>,
    pub severity: f64,
    pub sample_seed: u64,
    pub noise_source_id: Option<String>,
    pub noise_offset: Option<usize>,
}

/// Uniform draw over the grid values.
pub fn sample_severity<R: Rng + ?Sized>(grid: &SeverityGrid, rng: &mut R) -> Result<f64, CorruptionError> {
    if grid.values.is_empty() {
        return Err(CorruptionError::EmptyGrid);
    }
    Ok(grid.values[rng.random_range(0..grid.values.len())])
}

/// Applies one criterion to one clip. All randomness comes from a private
/// generator seeded with `sample_seed`, drawn in a fixed order: severity,
/// then noise type, then noise content or segment.
pub fn corrupt_sample(
    w: &Waveform,
    spec: &CorruptionSpec,
    lib: &NoiseLibrary,
    sample_id: &str,
    sample_seed: u64,
) -> Result<(Waveform, CorruptionRecord), CorruptionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    let severity = sample_severity(&spec.grid, &mut rng)?;
    let mut record = CorruptionRecord {
        sample_id: sample_id.to_string(),
        corruption: spec.corruption,
        level: spec.level,
        noise_type: None,
        severity,
        sample_seed,
        noise_source_id: None,
        noise_offset: None,
    };

    let out = match spec.family() {
        Family::WhiteNoise | Family::Environmental => {
            let pool = spec
                .pool
                .as_ref()
                .ok_or_else(|| CorruptionError::Config(format!("{} has no noise pool", spec.label())))?;
            if pool.noise_types.is_empty() {
                return Err(CorruptionError::Config(format!("{} noise pool is empty", spec.label())));
            }
            let noise_type = pool.noise_types[rng.random_range(0..pool.noise_types.len())].clone();
            let noise = if spec.family() == Family::WhiteNoise {
                let kind = WhiteNoiseKind::from_pool_name(&noise_type)
                    .ok_or_else(|| CorruptionError::UnknownNoiseType(noise_type.clone()))?;
                gen_white_noise(kind, w.len(), w.sample_rate(), &mut rng)?
            } else {
                let seg = pick_noise_segment(lib, &noise_type, w.len(), w.sample_rate(), &mut rng)?;
                record.noise_source_id = Some(seg.source_id);
                record.noise_offset = Some(seg.offset);
                seg.waveform
            };
            record.noise_type = Some(noise_type);
            mix_components(w, &noise, severity)?.mixed
        }
        Family::TimeStretch => {
            if !spec.allow_slowdown && severity < 0.0 {
                return Err(CorruptionError::Config("slow-down drawn while suppressed".into()));
            }
            time_stretch(w, severity)?
        }
        Family::PitchShift => pitch_shift(w, severity)?,
    };
    Ok((out, record))
}
