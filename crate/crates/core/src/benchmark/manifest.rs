//! Line-oriented, tab-separated manifests for clean datasets and corrupted
//! benchmark sets.
//!
//! Dataset manifest:
//!
//! ```text
//! dataset=<id>\tclasses=<name0>,<name1>,...
//! <sample_id>\t<path>\t<label>\t<fold|->\t<duration_s>\t<sample_rate>
//! ```
//!
//! Benchmark manifest (header, then the dataset columns followed by the
//! corruption columns):
//!
//! ```text
//! benchmark=v1\tdataset=<id>\tcriterion=<ID-Lx>\tglobal_seed=<u64>\tallow_slowdown=<bool>\tclasses=<...>
//! ...\t<corruption>\t<level>\t<noise_type|->\t<severity>\t<seed>\t<source_id|->\t<offset|->\t<corrupted_path>
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::criteria::Criterion;
use super::BenchmarkError;
use crate::corruption::{derive_seed, CorruptionRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub sample_id: String,
    /// Audio path, relative to the manifest's directory unless absolute.
    pub path: String,
    pub label: usize,
    pub fold: Option<u8>,
    pub duration_s: f64,
    pub sample_rate: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub dataset_id: String,
    pub class_names: Vec<String>,
    pub entries: Vec<ManifestEntry>,
    /// Directory that relative entry paths resolve against.
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn new(
        dataset_id: impl Into<String>,
        class_names: Vec<String>,
        entries: Vec<ManifestEntry>,
        root: impl Into<PathBuf>,
    ) -> Result<Self, BenchmarkError> {
        let m = Self {
            dataset_id: dataset_id.into(),
            class_names,
            entries,
            root: root.into(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    /// Copy with a different entry list, keeping identity and classes.
    pub fn with_entries(&self, entries: Vec<ManifestEntry>) -> Self {
        Self {
            dataset_id: self.dataset_id.clone(),
            class_names: self.class_names.clone(),
            entries,
            root: self.root.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), BenchmarkError> {
        check_token(&self.dataset_id, "dataset id")?;
        if self.class_names.is_empty() {
            return Err(BenchmarkError::InvalidManifest("no class names".into()));
        }
        for c in &self.class_names {
            check_token(c, "class name")?;
            if c.contains(',') {
                return Err(BenchmarkError::InvalidManifest(format!("class name `{c}` contains a comma")));
            }
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            check_token(&e.sample_id, "sample id")?;
            check_token(&e.path, "path")?;
            if !seen.insert(e.sample_id.as_str()) {
                return Err(BenchmarkError::InvalidManifest(format!("duplicate sample id `{}`", e.sample_id)));
            }
            if e.label >= self.class_names.len() {
                return Err(BenchmarkError::InvalidManifest(format!(
                    "sample `{}` has label {} but only {} classes",
                    e.sample_id,
                    e.label,
                    self.class_names.len()
                )));
            }
            if let Some(f) = e.fold {
                if !(1..=10).contains(&f) {
                    return Err(BenchmarkError::InvalidFold {
                        sample_id: e.sample_id.clone(),
                        fold: f as u32,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("dataset={}\tclasses={}\n", self.dataset_id, self.class_names.join(","));
        for e in &self.entries {
            write_entry(&mut out, e);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, root: impl Into<PathBuf>) -> Result<Self, BenchmarkError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| BenchmarkError::Parse("empty manifest".into()))?;
        let fields = header_fields(header)?;
        let dataset_id = field(&fields, "dataset")?.to_string();
        let class_names = split_classes(field(&fields, "classes")?);
        let mut entries = Vec::new();
        for (n, line) in lines {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 6 {
                return Err(line_err(n, "expected 6 tab-separated columns"));
            }
            entries.push(parse_entry(&cols, n)?);
        }
        Self::new(dataset_id, class_names, entries, root)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BenchmarkError> {
        let path = path.as_ref();
        let text = read(path)?;
        Self::parse(&text, parent_dir(path))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BenchmarkError> {
        write_atomic(path.as_ref(), self.to_text().as_bytes())
    }
}

/// One corrupted sample: its clean source entry, how it was corrupted, and
/// where the corrupted audio lives (relative to the benchmark directory).
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRecord {
    pub entry: ManifestEntry,
    pub corruption: CorruptionRecord,
    pub corrupted_path: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkManifest {
    pub dataset_id: String,
    pub class_names: Vec<String>,
    pub criterion: Criterion,
    pub global_seed: u64,
    pub records: Vec<BenchmarkRecord>,
    /// Benchmark directory; corrupted paths resolve against it.
    pub root: PathBuf,
}

pub const BENCHMARK_MANIFEST_FILE: &str = "benchmark.tsv";

impl BenchmarkManifest {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.entry.label).collect()
    }

    pub fn resolve(&self, record: &BenchmarkRecord) -> PathBuf {
        self.root.join(&record.corrupted_path)
    }

    /// Every stored seed matches a fresh derivation from its index.
    pub fn seeds_consistent(&self) -> bool {
        let label = self.criterion.label();
        self.records.iter().enumerate().all(|(i, r)| {
            r.corruption.sample_seed == derive_seed(self.global_seed, &self.dataset_id, &label, i as u64)
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "benchmark=v1\tdataset={}\tcriterion={}\tglobal_seed={}\tallow_slowdown={}\tclasses={}\n",
            self.dataset_id,
            self.criterion.label(),
            self.global_seed,
            self.criterion.allow_slowdown,
            self.class_names.join(",")
        );
        for r in &self.records {
            write_entry(&mut out, &r.entry);
            let c = &r.corruption;
            let _ = writeln!(
                out,
                "\t{}\t{}\t{}\t{:?}\t{}\t{}\t{}\t{}",
                c.corruption,
                c.level,
                c.noise_type.as_deref().unwrap_or("-"),
                c.severity,
                c.sample_seed,
                c.noise_source_id.as_deref().unwrap_or("-"),
                c.noise_offset.map_or("-".to_string(), |o| o.to_string()),
                r.corrupted_path
            );
        }
        out
    }

    /// SHA-256 of the serialized manifest, hex encoded.
    pub fn digest(&self) -> String {
        hex_sha256(self.to_text().as_bytes())
    }

    pub fn parse(text: &str, root: impl Into<PathBuf>) -> Result<Self, BenchmarkError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| BenchmarkError::Parse("empty benchmark manifest".into()))?;
        let fields = header_fields(header)?;
        if field(&fields, "benchmark")? != "v1" {
            return Err(BenchmarkError::Parse("unsupported benchmark manifest version".into()));
        }
        let dataset_id = field(&fields, "dataset")?.to_string();
        let (corruption, level) = super::criteria::parse_criterion_label(field(&fields, "criterion")?)?;
        let global_seed = field(&fields, "global_seed")?
            .parse()
            .map_err(|_| BenchmarkError::Parse("bad global_seed".into()))?;
        let allow_slowdown = field(&fields, "allow_slowdown")?
            .parse()
            .map_err(|_| BenchmarkError::Parse("bad allow_slowdown".into()))?;
        let class_names = split_classes(field(&fields, "classes")?);
        let criterion = Criterion {
            dataset_id: dataset_id.clone(),
            corruption,
            level,
            allow_slowdown,
        };

        let mut records = Vec::new();
        for (n, line) in lines {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 14 {
                return Err(line_err(n, "expected 14 tab-separated columns"));
            }
            let entry = parse_entry(&cols[..6], n)?;
            let opt = |s: &str| (s != "-").then(|| s.to_string());
            let corruption = CorruptionRecord {
                sample_id: entry.sample_id.clone(),
                corruption: cols[6].parse().map_err(|_| line_err(n, "bad corruption id"))?,
                level: cols[7].parse().map_err(|_| line_err(n, "bad level"))?,
                noise_type: opt(cols[8]),
                severity: cols[9].parse().map_err(|_| line_err(n, "bad severity"))?,
                sample_seed: cols[10].parse().map_err(|_| line_err(n, "bad seed"))?,
                noise_source_id: opt(cols[11]),
                noise_offset: match cols[12] {
                    "-" => None,
                    s => Some(s.parse().map_err(|_| line_err(n, "bad offset"))?),
                },
            };
            records.push(BenchmarkRecord {
                entry,
                corruption,
                corrupted_path: cols[13].to_string(),
            });
        }
        Ok(Self {
            dataset_id,
            class_names,
            criterion,
            global_seed,
            records,
            root: root.into(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BenchmarkError> {
        let path = path.as_ref();
        let path = if path.is_dir() {
            path.join(BENCHMARK_MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let text = read(&path)?;
        Self::parse(&text, parent_dir(&path))
    }
}

pub(crate) fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_entry(out: &mut String, e: &ManifestEntry) {
    let _ = write!(
        out,
        "{}\t{}\t{}\t{}\t{:?}\t{}",
        e.sample_id,
        e.path,
        e.label,
        e.fold.map_or("-".to_string(), |f| f.to_string()),
        e.duration_s,
        e.sample_rate
    );
}

fn parse_entry(cols: &[&str], n: usize) -> Result<ManifestEntry, BenchmarkError> {
    Ok(ManifestEntry {
        sample_id: cols[0].to_string(),
        path: cols[1].to_string(),
        label: cols[2].parse().map_err(|_| line_err(n, "bad label"))?,
        fold: match cols[3] {
            "-" => None,
            s => Some(s.parse().map_err(|_| line_err(n, "bad fold"))?),
        },
        duration_s: cols[4].parse().map_err(|_| line_err(n, "bad duration"))?,
        sample_rate: cols[5].parse().map_err(|_| line_err(n, "bad sample rate"))?,
    })
}

fn header_fields(header: &str) -> Result<Vec<(&str, &str)>, BenchmarkError> {
    header
        .split('\t')
        .map(|kv| {
            kv.split_once('=')
                .ok_or_else(|| BenchmarkError::Parse(format!("header field `{kv}` is not key=value")))
        })
        .collect()
}

fn field<'a>(fields: &[(&str, &'a str)], key: &str) -> Result<&'a str, BenchmarkError> {
    fields
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| BenchmarkError::Parse(format!("header is missing `{key}`")))
}

fn split_classes(s: &str) -> Vec<String> {
    if s.is_empty() {
        Vec::new()
    } else {
        s.split(',').map(str::to_string).collect()
    }
}

fn check_token(s: &str, what: &str) -> Result<(), BenchmarkError> {
    if s.is_empty() || s.contains(['\t', '\n', '\r']) {
        return Err(BenchmarkError::InvalidManifest(format!("{what} `{s}` is empty or contains tabs/newlines")));
    }
    Ok(())
}

fn line_err(n: usize, msg: &str) -> BenchmarkError {
    BenchmarkError::Parse(format!("line {}: {msg}", n + 1))
}

fn read(path: &Path) -> Result<String, BenchmarkError> {
    std::fs::read_to_string(path).map_err(|e| BenchmarkError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn parent_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

/// Write to a sibling temp file, then rename over the target.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), BenchmarkError> {
    let io = |e| BenchmarkError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, bytes).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}
