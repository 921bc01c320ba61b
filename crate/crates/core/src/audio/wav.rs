use std::io::{Cursor, Read};
use std::path::Path;

use hound::{SampleFormat, WavSpec, WavWriter};

use super::{AudioError, Waveform};

/// On-disk sample encoding for [`save_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Int16,
    Float32,
}

/// Reads a 16-bit integer or 32-bit float PCM WAV file. Multichannel audio
/// is averaged down to mono.
pub fn load_wav(path: impl AsRef<Path>) -> Result<Waveform, AudioError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            AudioError::NotFound(path.to_path_buf())
        } else {
            AudioError::Io {
                origin: path.display().to_string(),
                source: e,
            }
        }
    })?;
    decode_wav(std::io::BufReader::new(file), &path.display().to_string())
}

/// Decodes WAV bytes from any reader. `origin` names the source in errors.
pub fn decode_wav<R: Read>(reader: R, origin: &str) -> Result<Waveform, AudioError> {
    let reader = hound::WavReader::new(reader).map_err(|e| map_hound(e, origin))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(AudioError::MalformedHeader {
            origin: origin.to_string(),
            detail: "zero channels".into(),
        });
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<_, _>>(),
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<Result<_, _>>(),
        (fmt, bits) => {
            return Err(AudioError::UnsupportedEncoding {
                origin: origin.to_string(),
                detail: format!("{bits}-bit {fmt:?}"),
            })
        }
    }
    .map_err(|e| map_hound(e, origin))?;

    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    Waveform::new(samples, spec.sample_rate)
}

/// Writes `w` as a mono WAV file. Int16 output clips to `[-1, 1]` first.
pub fn save_wav(
    w: &Waveform,
    path: impl AsRef<Path>,
    encoding: WavEncoding,
) -> Result<(), AudioError> {
    let path = path.as_ref();
    let bytes = encode_wav(w, encoding)?;
    std::fs::write(path, bytes).map_err(|e| AudioError::Io {
        origin: path.display().to_string(),
        source: e,
    })
}

/// Serializes `w` to an in-memory WAV image.
pub fn encode_wav(w: &Waveform, encoding: WavEncoding) -> Result<Vec<u8>, AudioError> {
    let spec = match encoding {
        WavEncoding::Int16 => WavSpec {
            channels: 1,
            sample_rate: w.sample_rate(),
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        },
        WavEncoding::Float32 => WavSpec {
            channels: 1,
            sample_rate: w.sample_rate(),
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        },
    };
    let mut cursor = Cursor::new(Vec::with_capacity(44 + w.len() * 4));
    {
        let mut writer =
            WavWriter::new(&mut cursor, spec).map_err(|e| map_hound(e, "<memory>"))?;
        match encoding {
            WavEncoding::Int16 => {
                for &s in w.samples() {
                    writer
                        .write_sample(quantize_i16(s))
                        .map_err(|e| map_hound(e, "<memory>"))?;
                }
            }
            WavEncoding::Float32 => {
                for &s in w.samples() {
                    writer
                        .write_sample(s as f32)
                        .map_err(|e| map_hound(e, "<memory>"))?;
                }
            }
        }
        writer.finalize().map_err(|e| map_hound(e, "<memory>"))?;
    }
    Ok(cursor.into_inner())
}

fn quantize_i16(s: f64) -> i16 {
    (s.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

fn map_hound(e: hound::Error, origin: &str) -> AudioError {
    let origin = origin.to_string();
    match e {
        hound::Error::IoError(source) => {
            if source.kind() == std::io::ErrorKind::UnexpectedEof {
                AudioError::MalformedHeader {
                    origin,
                    detail: "truncated file".into(),
                }
            } else {
                AudioError::Io { origin, source }
            }
        }
        hound::Error::Unsupported => AudioError::UnsupportedEncoding {
            origin,
            detail: "format not supported by decoder".into(),
        },
        other => AudioError::MalformedHeader {
            origin,
            detail: other.to_string(),
        },
    }
}
