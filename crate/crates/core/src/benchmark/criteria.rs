//! The criteria registry: every (dataset, corruption, level) combination
//! that makes up the benchmark.

use std::fmt;

use serde::Serialize;

use super::BenchmarkError;
use crate::corruption::{CorruptionId, Level};

/// Dataset ids the registry knows about, in registry order.
pub const KNOWN_DATASETS: [&str; 4] = ["RS", "SC2", "US8", "VS"];

/// Corruptions never paired with US8 (its noise pools come from the same
/// corpora as the clean audio).
pub const US8_EXCLUDED: [CorruptionId; 3] = [CorruptionId::Enq, CorruptionId::End1, CorruptionId::End2];

/// Dataset on which time-stretch slow-down is suppressed.
pub const NO_SLOWDOWN_DATASET: &str = "SC2";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Criterion {
    pub dataset_id: String,
    pub corruption: CorruptionId,
    pub level: Level,
    /// Whether negative time-stretch severities may be drawn.
    pub allow_slowdown: bool,
}

impl Criterion {
    /// Builds the criterion with dataset-specific rules applied. Unknown
    /// dataset ids (synthetic sets) get the unrestricted form.
    pub fn for_dataset(dataset_id: &str, corruption: CorruptionId, level: Level) -> Result<Self, BenchmarkError> {
        if dataset_id == "US8" && US8_EXCLUDED.contains(&corruption) {
            return Err(BenchmarkError::ExcludedCombination {
                dataset: dataset_id.to_string(),
                criterion: format!("{corruption}-{level}"),
            });
        }
        Ok(Self {
            dataset_id: dataset_id.to_string(),
            corruption,
            level,
            allow_slowdown: !(dataset_id == NO_SLOWDOWN_DATASET && corruption == CorruptionId::Tst),
        })
    }

    /// `"<corruption>-<level>"`, the label used for seed derivation.
    pub fn label(&self) -> String {
        format!("{}-{}", self.corruption, self.level)
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}-{}", self.dataset_id, self.corruption, self.level)
    }
}

/// Parses `"ENQ-L1"` style labels.
pub fn parse_criterion_label(s: &str) -> Result<(CorruptionId, Level), BenchmarkError> {
    let bad = || BenchmarkError::Parse(format!("criterion `{s}` is not <CORRUPTION>-<L1|L2>"));
    let (c, l) = s.rsplit_once('-').ok_or_else(bad)?;
    Ok((c.parse().map_err(|_| bad())?, l.parse().map_err(|_| bad())?))
}

/// Full registry for the given datasets, ordered by dataset, corruption,
/// then level. Duplicated ids are listed once.
pub fn enumerate_criteria<S: AsRef<str>>(datasets: &[S]) -> Result<Vec<Criterion>, BenchmarkError> {
    let mut ids: Vec<&str> = Vec::new();
    for d in datasets {
        let d = d.as_ref();
        if !KNOWN_DATASETS.contains(&d) {
            return Err(BenchmarkError::UnknownDataset(d.to_string()));
        }
        if !ids.contains(&d) {
            ids.push(d);
        }
    }
    ids.sort_unstable();
    let mut out = Vec::new();
    for d in ids {
        for c in CorruptionId::ALL {
            for l in Level::ALL {
                if let Ok(crit) = Criterion::for_dataset(d, c, l) {
                    out.push(crit);
                }
            }
        }
    }
    Ok(out)
}
