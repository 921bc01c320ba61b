//! Consistency checks over severity grids and noise pools.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::corruption::{CorruptionId, Family, Level, Tables};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Stable machine-readable check name.
    pub code: &'static str,
    /// The grid or pool concerned, e.g. `TST-L1`.
    pub subject: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks_run: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

struct Collector {
    checks: usize,
    violations: Vec<Violation>,
}

impl Collector {
    fn check(&mut self, ok: bool, code: &'static str, subject: &str, message: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.violations.push(Violation {
                code,
                subject: subject.to_string(),
                message: message(),
            });
        }
    }
}

/// Runs every table check and reports all failures.
///
/// Grids: non-empty, strictly increasing, positive SNRs for additive
/// families, no zero for time-stretch or pitch-shift. Across levels,
/// additive grids must nest (L1 ⊆ L2); time-stretch and pitch-shift L2
/// grids must reach at least as far from zero as L1. Pools: non-empty,
/// L1 ⊆ L2 everywhere, strictly larger L2 for environmental pools.
pub fn validate_config(tables: &Tables) -> ValidationReport {
    let mut c = Collector {
        checks: 0,
        violations: Vec::new(),
    };

    for family in Family::ALL {
        let mut grids = Vec::new();
        for level in Level::ALL {
            let subject = format!("{family}-{level}");
            let Ok(g) = tables.grid(family, level) else {
                c.check(false, "missing_grid", &subject, || "no severity grid defined".into());
                continue;
            };
            let v = &g.values;
            c.check(!v.is_empty(), "empty_grid", &subject, || "grid has no values".into());
            c.check(
                v.windows(2).all(|w| w[0] < w[1]),
                "grid_not_monotonic",
                &subject,
                || format!("values {v:?} are not strictly increasing"),
            );
            c.check(v.iter().all(|x| x.is_finite()), "non_finite_severity", &subject, || {
                "grid contains a non-finite value".into()
            });
            if family.is_additive() {
                c.check(v.iter().all(|&x| x > 0.0), "non_positive_snr", &subject, || {
                    format!("SNR values {v:?} must be positive")
                });
            } else {
                c.check(!v.contains(&0.0), "zero_severity", &subject, || {
                    "grid contains 0, which is the identity transform".into()
                });
            }
            grids.push(g);
        }
        if let [l1, l2] = grids[..] {
            let subject = format!("{family}-L1/L2");
            if family.is_additive() {
                c.check(l1.values.iter().all(|&x| l2.contains(x)), "grid_not_nested", &subject, || {
                    format!("L1 values {:?} are not all in L2 {:?}", l1.values, l2.values)
                });
            } else {
                let reach = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                c.check(reach(&l2.values) >= reach(&l1.values), "grid_not_harder", &subject, || {
                    format!("L2 max |severity| {} is below L1's {}", reach(&l2.values), reach(&l1.values))
                });
            }
        }
    }

    for id in CorruptionId::ALL.into_iter().filter(|id| id.has_pool()) {
        let mut pools = Vec::new();
        for level in Level::ALL {
            let subject = format!("{id}-{level}");
            match tables.pool(id, level) {
                Ok(p) => {
                    c.check(!p.noise_types.is_empty(), "empty_pool", &subject, || "pool has no noise types".into());
                    let set: BTreeSet<&str> = p.noise_types.iter().map(String::as_str).collect();
                    c.check(set.len() == p.noise_types.len(), "duplicate_noise_type", &subject, || {
                        "pool lists a noise type twice".into()
                    });
                    pools.push(set);
                }
                Err(_) => c.check(false, "missing_pool", &subject, || "no noise pool defined".into()),
            }
        }
        if let [l1, l2] = &pools[..] {
            let subject = format!("{id}-L1/L2");
            c.check(l1.is_subset(l2), "pool_not_nested", &subject, || {
                let extra: Vec<_> = l1.difference(l2).collect();
                format!("L1 types {extra:?} are missing from L2")
            });
            if id.family() == Family::Environmental {
                c.check(l2.len() > l1.len(), "pool_not_larger", &subject, || {
                    format!("L2 has {} types, L1 has {}", l2.len(), l1.len())
                });
            }
        }
    }

    ValidationReport {
        passed: c.violations.is_empty(),
        checks_run: c.checks,
        violations: c.violations,
    }
}
