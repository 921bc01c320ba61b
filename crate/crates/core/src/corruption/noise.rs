//! White-noise synthesis, SNR-controlled mixing, and the environmental noise
//! library with its segment picker.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use super::CorruptionError;
use crate::audio::{load_wav, mean_square, resample, ResampleQuality, Waveform};

/// Generated noise types of the WHN family.
pub const GAUSSIAN_NOISE: &str = "Gaussian";
pub const UNIFORM_NOISE: &str = "Random";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WhiteNoiseKind {
    /// i.i.d. N(0, 1).
    Gaussian,
    /// i.i.d. U(-1, 1).
    Uniform,
}

impl WhiteNoiseKind {
    pub fn from_pool_name(name: &str) -> Option<Self> {
        match name {
            GAUSSIAN_NOISE => Some(Self::Gaussian),
            UNIFORM_NOISE => Some(Self::Uniform),
            _ => None,
        }
    }
}

/// Raw i.i.d. samples, before power normalization.
pub fn white_noise_raw<R: Rng + ?Sized>(kind: WhiteNoiseKind, length: usize, rng: &mut R) -> Vec<f64> {
    match kind {
        WhiteNoiseKind::Gaussian => (0..length).map(|_| rng.sample(StandardNormal)).collect(),
        WhiteNoiseKind::Uniform => (0..length).map(|_| rng.random_range(-1.0..1.0)).collect(),
    }
}

/// White noise rescaled so its measured power is exactly 1.
pub fn gen_white_noise<R: Rng + ?Sized>(
    kind: WhiteNoiseKind,
    length: usize,
    sample_rate: u32,
    rng: &mut R,
) -> Result<Waveform, CorruptionError> {
    if length == 0 {
        return Err(CorruptionError::EmptyLength);
    }
    let mut x = white_noise_raw(kind, length, rng);
    let p = mean_square(&x);
    if p == 0.0 {
        return Err(CorruptionError::ZeroPower("noise"));
    }
    let scale = p.sqrt().recip();
    x.iter_mut().for_each(|s| *s *= scale);
    Ok(Waveform::new(x, sample_rate)?)
}

/// A mix and its parts. `scaled_noise` is exactly what was added to the
/// clean signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub mixed: Waveform,
    pub scaled_noise: Vec<f64>,
    pub gain: f64,
}

/// Noise gain that places `noise` at `snr_db` below `clean`:
/// `g = sqrt(P_clean / (P_noise · 10^(snr/10)))`.
pub fn snr_gain(clean_power: f64, noise_power: f64, snr_db: f64) -> f64 {
    (clean_power / (noise_power * 10f64.powf(snr_db / 10.0))).sqrt()
}

/// Adds `noise` to `clean` at the requested SNR over the full clip. The mix
/// is not renormalized.
pub fn mix_at_snr(clean: &Waveform, noise: &Waveform, snr_db: f64) -> Result<Waveform, CorruptionError> {
    Ok(mix_components(clean, noise, snr_db)?.mixed)
}

pub fn mix_components(clean: &Waveform, noise: &Waveform, snr_db: f64) -> Result<Mixture, CorruptionError> {
    if clean.len() != noise.len() {
        return Err(CorruptionError::LengthMismatch {
            clean: clean.len(),
            noise: noise.len(),
        });
    }
    if clean.sample_rate() != noise.sample_rate() {
        return Err(CorruptionError::RateMismatch {
            clean: clean.sample_rate(),
            noise: noise.sample_rate(),
        });
    }
    if !snr_db.is_finite() {
        return Err(CorruptionError::Config(format!("non-finite SNR {snr_db}")));
    }
    if clean.is_empty() {
        return Err(CorruptionError::EmptyLength);
    }
    let pc = mean_square(clean.samples());
    let pn = mean_square(noise.samples());
    if pc == 0.0 {
        return Err(CorruptionError::ZeroPower("clean"));
    }
    if pn == 0.0 {
        return Err(CorruptionError::ZeroPower("noise"));
    }
    let gain = snr_gain(pc, pn, snr_db);
    let scaled_noise: Vec<f64> = noise.samples().iter().map(|n| gain * n).collect();
    let mixed = clean
        .samples()
        .iter()
        .zip(&scaled_noise)
        .map(|(c, n)| c + n)
        .collect();
    Ok(Mixture {
        mixed: clean.with_samples(mixed)?,
        scaled_noise,
        gain,
    })
}

#[derive(Debug, Clone)]
enum SourceData {
    File(PathBuf),
    Memory(Arc<Waveform>),
}

/// One noise recording. File-backed sources are decoded on use.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    pub id: String,
    data: SourceData,
}

impl NoiseSource {
    pub fn file(id: impl Into<String>, path: impl Into<PathBuf>) -> Self {
        Self {
            id: id.into(),
            data: SourceData::File(path.into()),
        }
    }

    pub fn memory(id: impl Into<String>, w: Waveform) -> Self {
        Self {
            id: id.into(),
            data: SourceData::Memory(Arc::new(w)),
        }
    }

    fn waveform(&self) -> Result<Arc<Waveform>, CorruptionError> {
        match &self.data {
            SourceData::Memory(w) => Ok(Arc::clone(w)),
            SourceData::File(p) => Ok(Arc::new(load_wav(p)?)),
        }
    }
}

/// Noise-type name → recordings. Read-only after construction.
#[derive(Debug, Clone, Default)]
pub struct NoiseLibrary {
    types: BTreeMap<String, Vec<NoiseSource>>,
}

impl NoiseLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, noise_type: impl Into<String>, source: NoiseSource) {
        self.types.entry(noise_type.into()).or_default().push(source);
    }

    pub fn noise_types(&self) -> impl Iterator<Item = &str> {
        self.types.keys().map(String::as_str)
    }

    pub fn sources(&self, noise_type: &str) -> Option<&[NoiseSource]> {
        self.types.get(noise_type).map(Vec::as_slice)
    }

    pub fn resolves(&self, noise_type: &str) -> bool {
        self.types.get(noise_type).is_some_and(|s| !s.is_empty())
    }

    /// Builds a file-backed library from an index written by [`scan_noise_dir`].
    /// Relative paths resolve against the index file's directory.
    pub fn from_index(index_path: impl AsRef<Path>) -> Result<Self, CorruptionError> {
        let index_path = index_path.as_ref();
        let base = index_path.parent().unwrap_or(Path::new("."));
        let mut lib = Self::new();
        for entry in read_noise_index(index_path)? {
            let path = base.join(&entry.relative_path);
            lib.add(entry.noise_type, NoiseSource::file(entry.relative_path, path));
        }
        Ok(lib)
    }
}

/// A window of noise ready to mix, with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSegment {
    pub waveform: Waveform,
    pub source_id: String,
    /// Start position in the (resampled) source, in samples.
    pub offset: usize,
}

/// Picks a uniformly random source of `noise_type`, resamples it to
/// `target_rate`, and cuts a `length`-sample window at a uniformly random
/// offset. Sources shorter than `length` are looped.
pub fn pick_noise_segment<R: Rng + ?Sized>(
    lib: &NoiseLibrary,
    noise_type: &str,
    length: usize,
    target_rate: u32,
    rng: &mut R,
) -> Result<NoiseSegment, CorruptionError> {
    let sources = lib
        .sources(noise_type)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| CorruptionError::UnknownNoiseType(noise_type.to_string()))?;
    let source = &sources[rng.random_range(0..sources.len())];
    let raw = source.waveform()?;
    let src = if raw.sample_rate() == target_rate {
        raw
    } else {
        Arc::new(resample(&raw, target_rate, ResampleQuality::HIGH)?)
    };
    if src.is_empty() {
        return Err(CorruptionError::EmptySource(source.id.clone()));
    }
    let n = src.len();
    let offset = if n >= length {
        rng.random_range(0..=n - length)
    } else {
        rng.random_range(0..n)
    };
    let x = src.samples();
    let samples = (0..length).map(|i| x[(offset + i) % n]).collect();
    Ok(NoiseSegment {
        waveform: Waveform::new(samples, target_rate)?,
        source_id: source.id.clone(),
        offset,
    })
}

/// One line of the noise index: `type,relative-path,duration_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIndexEntry {
    pub noise_type: String,
    pub relative_path: String,
    pub duration_s: f64,
}

/// Walks `root/<type>/*.wav` (sorted) and reads each header. Any unreadable
/// file fails the scan with its path.
pub fn scan_noise_dir(root: impl AsRef<Path>) -> Result<Vec<NoiseIndexEntry>, CorruptionError> {
    let root = root.as_ref();
    let mut entries = Vec::new();
    for type_dir in sorted_dir(root)? {
        if !type_dir.is_dir() {
            continue;
        }
        let noise_type = type_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        for file in sorted_dir(&type_dir)? {
            let is_wav = file
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
            if !file.is_file() || !is_wav {
                continue;
            }
            let duration_s = wav_duration(&file)?;
            let rel = file
                .strip_prefix(root)
                .unwrap_or(&file)
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            entries.push(NoiseIndexEntry {
                noise_type: noise_type.clone(),
                relative_path: rel,
                duration_s,
            });
        }
    }
    Ok(entries)
}

fn sorted_dir(dir: &Path) -> Result<Vec<PathBuf>, CorruptionError> {
    let rd = std::fs::read_dir(dir).map_err(|e| CorruptionError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut paths = rd
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CorruptionError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    paths.sort();
    Ok(paths)
}

fn wav_duration(path: &Path) -> Result<f64, CorruptionError> {
    let bad = |detail: String| CorruptionError::UnreadableAudio {
        path: path.to_path_buf(),
        detail,
    };
    let reader = hound::WavReader::open(path).map_err(|e| bad(e.to_string()))?;
    let spec = reader.spec();
    match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) | (hound::SampleFormat::Float, 32) => {}
        (f, b) => return Err(bad(format!("unsupported encoding {b}-bit {f:?}"))),
    }
    if spec.sample_rate == 0 {
        return Err(bad("zero sample rate".into()));
    }
    Ok(reader.duration() as f64 / spec.sample_rate as f64)
}

pub fn write_noise_index(path: impl AsRef<Path>, entries: &[NoiseIndexEntry]) -> Result<(), CorruptionError> {
    let path = path.as_ref();
    let io = |e| CorruptionError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for e in entries {
        writeln!(f, "{},{},{:.6}", e.noise_type, e.relative_path, e.duration_s).map_err(io)?;
    }
    f.flush().map_err(io)
}

pub fn read_noise_index(path: impl AsRef<Path>) -> Result<Vec<NoiseIndexEntry>, CorruptionError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CorruptionError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_noise_index(&text)
}

pub fn parse_noise_index(text: &str) -> Result<Vec<NoiseIndexEntry>, CorruptionError> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || CorruptionError::Parse(format!("noise index line {}: `{line}`", lineno + 1));
        // The path may itself contain commas; type and duration cannot.
        let (noise_type, rest) = line.split_once(',').ok_or_else(bad)?;
        let (rel, dur) = rest.rsplit_once(',').ok_or_else(bad)?;
        let duration_s: f64 = dur.trim().parse().map_err(|_| bad())?;
        if noise_type.is_empty() || rel.is_empty() {
            return Err(bad());
        }
        out.push(NoiseIndexEntry {
            noise_type: noise_type.to_string(),
            relative_path: rel.to_string(),
            duration_s,
        });
    }
    Ok(out)
}
