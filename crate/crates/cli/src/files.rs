//! Small file formats and write helpers owned by the command layer.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::exit::CliError;

/// Writes through a sibling temporary file so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    std::fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string_pretty(value).context("serializing run configuration")?;
    write_atomic(path, text.as_bytes())
}

pub fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e).into())
}

/// `label<TAB>v1<TAB>v2...` per row, after a `label<TAB>e0...` header.
pub fn embeddings_tsv(rows: &[Vec<f64>], labels: &[usize]) -> String {
    let dim = rows.first().map_or(0, Vec::len);
    let mut out = String::from("label");
    for d in 0..dim {
        let _ = write!(out, "\te{d}");
    }
    out.push('\n');
    for (row, label) in rows.iter().zip(labels) {
        let _ = write!(out, "{label}");
        for v in row {
            let _ = write!(out, "\t{v:.9}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_embeddings(text: &str) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || (n == 0 && line.starts_with("label")) {
            continue;
        }
        let mut cols = line.split('\t');
        let bad = |what: &str| CliError::Config(format!("embeddings line {}: {what}", n + 1));
        let label = cols
            .next()
            .and_then(|c| c.trim().parse::<usize>().ok())
            .ok_or_else(|| bad("label is not a non-negative integer"))?;
        let row = cols
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad("value is not a number"))?;
        if row.is_empty() {
            return Err(bad("no embedding values").into());
        }
        if rows.first().is_some_and(|r: &Vec<f64>| r.len() != row.len()) {
            return Err(bad("dimension differs from the first row").into());
        }
        rows.push(row);
        labels.push(label);
    }
    Ok((rows, labels))
}

/// Parses fold lists such as `1-7`, `8,9,10` or `1-3,5`.
pub fn parse_folds(s: &str) -> Result<BTreeSet<u8>, CliError> {
    let bad = || CliError::Config(format!("invalid fold list `{s}`"));
    let mut out = BTreeSet::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u8 = a.trim().parse().map_err(|_| bad())?;
                let b: u8 = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => {
                out.insert(part.parse().map_err(|_| bad())?);
            }
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}
