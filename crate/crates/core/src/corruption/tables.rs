//! Severity grids and noise-type pools, loaded from a versioned TOML file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CorruptionError;

/// Text of the shipped default tables.
pub const DEFAULT_TABLES_TOML: &str = include_str!("../../config/default_tables.toml");

pub const TABLES_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "WHN")]
    WhiteNoise,
    #[serde(rename = "EN")]
    Environmental,
    #[serde(rename = "TST")]
    TimeStretch,
    #[serde(rename = "PSH")]
    PitchShift,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::WhiteNoise,
        Family::Environmental,
        Family::TimeStretch,
        Family::PitchShift,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::WhiteNoise => "WHN",
            Family::Environmental => "EN",
            Family::TimeStretch => "TST",
            Family::PitchShift => "PSH",
        }
    }

    pub fn is_additive(self) -> bool {
        matches!(self, Family::WhiteNoise | Family::Environmental)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    L1,
    L2,
}

impl Level {
    pub const ALL: [Level; 2] = [Level::L1, Level::L2];

    pub fn as_str(self) -> &'static str {
        match self {
            Level::L1 => "L1",
            Level::L2 => "L2",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = CorruptionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "L1" => Ok(Level::L1),
            "L2" => Ok(Level::L2),
            _ => Err(CorruptionError::Parse(format!("unknown level `{s}`"))),
        }
    }
}

/// The seven corruption identifiers that make up the criteria registry.
/// Environmental noise is split by source corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CorruptionId {
    #[serde(rename = "WHN")]
    Whn,
    #[serde(rename = "ENQ")]
    Enq,
    #[serde(rename = "END1")]
    End1,
    #[serde(rename = "END2")]
    End2,
    #[serde(rename = "ENSC")]
    Ensc,
    #[serde(rename = "PSH")]
    Psh,
    #[serde(rename = "TST")]
    Tst,
}

impl CorruptionId {
    /// Registry order.
    pub const ALL: [CorruptionId; 7] = [
        CorruptionId::Whn,
        CorruptionId::Enq,
        CorruptionId::End1,
        CorruptionId::End2,
        CorruptionId::Ensc,
        CorruptionId::Psh,
        CorruptionId::Tst,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CorruptionId::Whn => "WHN",
            CorruptionId::Enq => "ENQ",
            CorruptionId::End1 => "END1",
            CorruptionId::End2 => "END2",
            CorruptionId::Ensc => "ENSC",
            CorruptionId::Psh => "PSH",
            CorruptionId::Tst => "TST",
        }
    }

    pub fn family(self) -> Family {
        match self {
            CorruptionId::Whn => Family::WhiteNoise,
            CorruptionId::Enq | CorruptionId::End1 | CorruptionId::End2 | CorruptionId::Ensc => {
                Family::Environmental
            }
            CorruptionId::Psh => Family::PitchShift,
            CorruptionId::Tst => Family::TimeStretch,
        }
    }

    pub fn has_pool(self) -> bool {
        self.family().is_additive()
    }
}

impl fmt::Display for CorruptionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorruptionId {
    type Err = CorruptionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CorruptionId::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| CorruptionError::Parse(format!("unknown corruption id `{s}`")))
    }
}

/// Discrete set of severities one family/level draws from. Units: dB SNR
/// for WHN/EN, percent tempo change for TST, semitones for PSH.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeverityGrid {
    pub family: Family,
    pub level: Level,
    pub values: Vec<f64>,
}

impl SeverityGrid {
    pub fn contains(&self, v: f64) -> bool {
        self.values.contains(&v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoisePool {
    pub corruption: CorruptionId,
    pub level: Level,
    pub noise_types: Vec<String>,
}

impl NoisePool {
    pub fn contains(&self, noise_type: &str) -> bool {
        self.noise_types.iter().any(|t| t == noise_type)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TablesFile {
    version: u32,
    #[serde(default)]
    grid: Vec<GridEntry>,
    #[serde(default)]
    pool: Vec<PoolEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridEntry {
    family: Family,
    level: Level,
    values: Option<Vec<f64>>,
    ranges: Option<Vec<[f64; 2]>>,
    step: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoolEntry {
    corruption: CorruptionId,
    level: Level,
    noise_types: Vec<String>,
}

/// All severity grids and noise pools in effect for a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Tables {
    pub version: u32,
    pub grids: BTreeMap<(Family, Level), SeverityGrid>,
    pub pools: BTreeMap<(CorruptionId, Level), NoisePool>,
}

impl Tables {
    /// The shipped defaults.
    pub fn defaults() -> Self {
        Self::from_toml_str(DEFAULT_TABLES_TOML).expect("shipped tables parse")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorruptionError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CorruptionError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml_str(&text)
    }

    /// Parses and expands a tables file. Structural problems (bad syntax,
    /// duplicate entries, unsupported version) are errors; semantic rules are
    /// left to the validator so they can be reported together.
    pub fn from_toml_str(text: &str) -> Result<Self, CorruptionError> {
        let file: TablesFile =
            toml::from_str(text).map_err(|e| CorruptionError::Parse(e.to_string()))?;
        if file.version != TABLES_VERSION {
            return Err(CorruptionError::Parse(format!(
                "unsupported tables version {} (expected {TABLES_VERSION})",
                file.version
            )));
        }
        let mut grids = BTreeMap::new();
        for g in file.grid {
            let values = expand_grid(&g)?;
            let key = (g.family, g.level);
            let grid = SeverityGrid {
                family: g.family,
                level: g.level,
                values,
            };
            if grids.insert(key, grid).is_some() {
                return Err(CorruptionError::Parse(format!(
                    "duplicate grid {}-{}",
                    key.0, key.1
                )));
            }
        }
        let mut pools = BTreeMap::new();
        for p in file.pool {
            let key = (p.corruption, p.level);
            let pool = NoisePool {
                corruption: p.corruption,
                level: p.level,
                noise_types: p.noise_types,
            };
            if pools.insert(key, pool).is_some() {
                return Err(CorruptionError::Parse(format!(
                    "duplicate pool {}-{}",
                    key.0, key.1
                )));
            }
        }
        Ok(Self {
            version: file.version,
            grids,
            pools,
        })
    }

    pub fn grid(&self, family: Family, level: Level) -> Result<&SeverityGrid, CorruptionError> {
        self.grids
            .get(&(family, level))
            .ok_or_else(|| CorruptionError::Config(format!("no grid for {family}-{level}")))
    }

    pub fn pool(&self, id: CorruptionId, level: Level) -> Result<&NoisePool, CorruptionError> {
        self.pools
            .get(&(id, level))
            .ok_or_else(|| CorruptionError::Config(format!("no noise pool for {id}-{level}")))
    }

    /// Resolves the full corruption spec for one criterion.
    pub fn spec(
        &self,
        corruption: CorruptionId,
        level: Level,
        allow_slowdown: bool,
    ) -> Result<CorruptionSpec, CorruptionError> {
        let mut grid = self.grid(corruption.family(), level)?.clone();
        if corruption == CorruptionId::Tst && !allow_slowdown {
            grid.values.retain(|&v| v >= 0.0);
            if grid.values.is_empty() {
                return Err(CorruptionError::EmptyGrid);
            }
        }
        let pool = if corruption.has_pool() {
            Some(self.pool(corruption, level)?.clone())
        } else {
            None
        };
        Ok(CorruptionSpec {
            corruption,
            level,
            grid,
            pool,
            allow_slowdown,
        })
    }

    /// Human-readable TOML rendering with every grid as an explicit value list.
    pub fn to_toml_string(&self) -> String {
        let mut out = format!("version = {}\n", self.version);
        for g in self.grids.values() {
            let vals: Vec<String> = g.values.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&format!(
                "\n[[grid]]\nfamily = \"{}\"\nlevel = \"{}\"\nvalues = [{}]\n",
                g.family,
                g.level,
                vals.join(", ")
            ));
        }
        for p in self.pools.values() {
            let types: Vec<String> = p.noise_types.iter().map(|t| format!("{t:?}")).collect();
            out.push_str(&format!(
                "\n[[pool]]\ncorruption = \"{}\"\nlevel = \"{}\"\nnoise_types = [{}]\n",
                p.corruption,
                p.level,
                types.join(", ")
            ));
        }
        out
    }
}

fn expand_grid(g: &GridEntry) -> Result<Vec<f64>, CorruptionError> {
    let name = format!("{}-{}", g.family, g.level);
    match (&g.values, &g.ranges, g.step) {
        (Some(v), None, None) => Ok(v.clone()),
        (None, Some(ranges), Some(step)) => {
            if !(step > 0.0 && step.is_finite()) {
                return Err(CorruptionError::Parse(format!("{name}: step must be positive")));
            }
            let mut values = Vec::new();
            for &[lo, hi] in ranges {
                let n = (hi - lo) / step;
                let steps = n.round();
                if !(n.is_finite() && steps >= 0.0 && (n - steps).abs() < 1e-9) {
                    return Err(CorruptionError::Parse(format!(
                        "{name}: range [{lo}, {hi}] is not a whole number of {step} steps"
                    )));
                }
                values.extend((0..=steps as usize).map(|k| lo + k as f64 * step));
            }
            Ok(values)
        }
        _ => Err(CorruptionError::Parse(format!(
            "{name}: give either `values` or both `ranges` and `step`"
        ))),
    }
}

/// Everything needed to corrupt one sample under one criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionSpec {
    pub corruption: CorruptionId,
    pub level: Level,
    pub grid: SeverityGrid,
    /// Present exactly for WHN and EN corruptions.
    pub pool: Option<NoisePool>,
    pub allow_slowdown: bool,
}

impl CorruptionSpec {
    pub fn family(&self) -> Family {
        self.corruption.family()
    }

    /// `"<corruption>-<level>"`, e.g. `WHN-L1`.
    pub fn label(&self) -> String {
        format!("{}-{}", self.corruption, self.level)
    }
}
