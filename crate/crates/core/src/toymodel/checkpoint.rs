//! Binary checkpoints: magic, format version, the architecture as TOML,
//! a table of named tensors with shapes, then one little-endian f32
//! payload holding every tensor in table order.

use std::path::Path;

use super::model::{ToyArch, ToyModel};
use super::ToyError;
use crate::tta::{AdaptableModel, ParamGroups};

const MAGIC: &[u8; 8] = b"SBTOYCK\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(model: &ToyModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let arch = toml::to_string(model.arch()).expect("architecture serializes");
    put_str(&mut out, &arch);
    let tensors = model.named_tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, shape, _) in &tensors {
        put_str(&mut out, name);
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for d in shape {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
    }
    for (_, _, values) in &tensors {
        for v in values {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ToyError> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| ToyError::Checkpoint("truncated checkpoint".into()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ToyError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn string(&mut self) -> Result<String, ToyError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| ToyError::Checkpoint("non-UTF-8 string".into()))
    }
}

/// Rebuilds a model; every tensor must match the stored architecture.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<ToyModel, ToyError> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(8)? != MAGIC {
        return Err(ToyError::Checkpoint("not a toy-model checkpoint".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(ToyError::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let arch: ToyArch =
        toml::from_str(&r.string()?).map_err(|e| ToyError::Checkpoint(format!("architecture: {e}")))?;
    let mut model = ToyModel::new(arch, 0)?;
    let expected = model.named_tensors();
    let n = r.u32()? as usize;
    if n != expected.len() {
        return Err(ToyError::Checkpoint(format!("{n} tensors, expected {}", expected.len())));
    }
    for (name, shape, _) in &expected {
        let got_name = r.string()?;
        let ndim = r.u32()? as usize;
        let dims = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        if got_name != *name || dims != *shape {
            return Err(ToyError::Checkpoint(format!(
                "tensor `{got_name}` {dims:?} does not match `{name}` {shape:?}"
            )));
        }
    }
    let mut values = Vec::new();
    for (_, _, v) in &expected {
        let raw = r.take(v.len() * 4)?;
        values.push(
            raw.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect::<Vec<f64>>(),
        );
    }
    if r.at != bytes.len() {
        return Err(ToyError::Checkpoint("trailing bytes after payload".into()));
    }
    let mut it = values.into_iter();
    let mut next = || it.next().expect("tensor count checked");
    let mut fe = Vec::new();
    for _ in 0..5 {
        fe.extend(next());
    }
    let mut cls = Vec::new();
    for _ in 0..4 {
        cls.extend(next());
    }
    let (mean, var) = (next(), next());
    let params = ParamGroups {
        feature_extractor: fe,
        classifier: cls,
    };
    if !params.is_finite() {
        return Err(ToyError::Checkpoint("non-finite parameter".into()));
    }
    model.set_state(params, mean, var)?;
    debug_assert_eq!(model.n_classes(), arch.n_classes);
    Ok(model)
}

pub fn save_checkpoint(model: &ToyModel, path: impl AsRef<Path>) -> Result<(), ToyError> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(model)).map_err(|e| ToyError::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ToyModel, ToyError> {
    let path = path.as_ref();
    decode_checkpoint(&std::fs::read(path).map_err(|e| ToyError::io(path, e))?)
}
