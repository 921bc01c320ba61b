use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use super::classification::{
    accuracy_ovr, accuracy_top1, argmax_lowest, check_labels, confusion_counts, f1_aggregated, f1_macro_per_class,
};
use super::roc::macro_roc_auc;
use super::MetricError;

const ROW_SUM_TOL: f64 = 1e-5;

/// N×C class probabilities with their true labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    probs: DMatrix<f64>,
    labels: Vec<usize>,
}

impl PredictionSet {
    pub fn new(probs: DMatrix<f64>, labels: Vec<usize>) -> Result<Self, MetricError> {
        let (n, c) = probs.shape();
        if n == 0 {
            return Err(MetricError::Empty);
        }
        if c < 2 {
            return Err(MetricError::Shape(format!("need at least 2 classes, got {c}")));
        }
        if labels.len() != n {
            return Err(MetricError::Shape(format!("{n} rows vs {} labels", labels.len())));
        }
        check_labels(&labels, c)?;
        for (i, row) in probs.row_iter().enumerate() {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(MetricError::InvalidProbabilities(format!("row {i} has an entry outside [0, 1]")));
            }
            let s = row.sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(MetricError::InvalidProbabilities(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self { probs, labels })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>) -> Result<Self, MetricError> {
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != c) {
            return Err(MetricError::Shape("rows have differing lengths".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(DMatrix::from_row_slice(rows.len(), c, &flat), labels)
    }

    pub fn probs(&self) -> &DMatrix<f64> {
        &self.probs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_samples(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.probs.ncols()
    }

    /// Row argmax, lowest index on ties.
    pub fn predicted(&self) -> Vec<usize> {
        self.probs.row_iter().map(|r| argmax_lowest(r.iter().copied())).collect()
    }
}

/// Header `predictions\t<N>\t<C>\t<class,...>`, then one row of C
/// probabilities followed by the label per line.
pub fn write_predictions(path: impl AsRef<Path>, p: &PredictionSet, class_names: &[String]) -> Result<(), MetricError> {
    let mut out = format!("predictions\t{}\t{}\t{}\n", p.n_samples(), p.n_classes(), class_names.join(","));
    for (row, label) in p.probs.row_iter().zip(&p.labels) {
        for v in row.iter() {
            let _ = write!(out, "{v:?}\t");
        }
        let _ = writeln!(out, "{label}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a predictions file; returns the set and its class names.
pub fn read_predictions(path: impl AsRef<Path>) -> Result<(PredictionSet, Vec<String>), MetricError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or(MetricError::Empty)?.split('\t').collect();
    if header.len() != 4 || header[0] != "predictions" {
        return Err(MetricError::Parse("header must be `predictions\\tN\\tC\\tclasses`".into()));
    }
    let n: usize = header[1].parse().map_err(|_| MetricError::Parse("bad N".into()))?;
    let c: usize = header[2].parse().map_err(|_| MetricError::Parse("bad C".into()))?;
    let names: Vec<String> = header[3].split(',').map(str::to_string).collect();
    if names.len() != c {
        return Err(MetricError::Parse(format!("{} class names for C = {c}", names.len())));
    }
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != c + 1 {
            return Err(MetricError::Parse(format!("row {i}: expected {} columns", c + 1)));
        }
        let row = cols[..c]
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| MetricError::Parse(format!("row {i}: bad probability")))?;
        rows.push(row);
        labels.push(cols[c].parse().map_err(|_| MetricError::Parse(format!("row {i}: bad label")))?);
    }
    if rows.len() != n {
        return Err(MetricError::Shape(format!("header says {n} rows, found {}", rows.len())));
    }
    Ok((PredictionSet::from_rows(&rows, labels)?, names))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricValue {
    pub name: &'static str,
    pub value: Option<f64>,
    /// Why the value is missing, when it is.
    pub error: Option<String>,
}

/// Every applicable metric, with the dataset's canonical one named.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub dataset_id: String,
    pub n_samples: usize,
    pub n_classes: usize,
    pub canonical: &'static str,
    pub metrics: Vec<MetricValue>,
}

impl MetricReport {
    /// Canonical metric per dataset: ROC-AUC for RS, pooled F1 for US8,
    /// top-1 accuracy otherwise.
    pub fn canonical_for(dataset_id: &str) -> &'static str {
        match dataset_id {
            "RS" => "roc_auc_macro",
            "US8" => "f1_aggregated",
            _ => "accuracy_top1",
        }
    }

    pub fn compute(dataset_id: &str, p: &PredictionSet) -> Self {
        let counts = confusion_counts(&p.predicted(), p.labels(), p.n_classes());
        let wrap = |name, r: Result<f64, MetricError>| match r {
            Ok(v) => MetricValue {
                name,
                value: Some(v),
                error: None,
            },
            Err(e) => MetricValue {
                name,
                value: None,
                error: Some(e.to_string()),
            },
        };
        let with_counts = |f: fn(&super::ConfusionCounts) -> Result<f64, MetricError>| match &counts {
            Ok(c) => f(c),
            Err(e) => Err(MetricError::Parse(e.to_string())),
        };
        Self {
            dataset_id: dataset_id.to_string(),
            n_samples: p.n_samples(),
            n_classes: p.n_classes(),
            canonical: Self::canonical_for(dataset_id),
            metrics: vec![
                wrap("accuracy_top1", Ok(accuracy_top1(p))),
                wrap("accuracy_ovr", with_counts(accuracy_ovr)),
                wrap("f1_aggregated", with_counts(f1_aggregated)),
                wrap("f1_macro_per_class", with_counts(f1_macro_per_class)),
                wrap("roc_auc_macro", macro_roc_auc(p)),
            ],
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.name == name).and_then(|m| m.value)
    }

    pub fn canonical_value(&self) -> Option<f64> {
        self.get(self.canonical)
    }

    /// Flat `key=value` lines; the canonical metric is marked with `*`.
    pub fn to_key_value(&self) -> String {
        let mut out = format!(
            "dataset={}\nn_samples={}\nn_classes={}\ncanonical={}\n",
            self.dataset_id, self.n_samples, self.n_classes, self.canonical
        );
        for m in &self.metrics {
            let mark = if m.name == self.canonical { "*" } else { "" };
            match (m.value, &m.error) {
                (Some(v), _) => {
                    let _ = writeln!(out, "{}{mark}={v:.6}", m.name);
                }
                (None, e) => {
                    let _ = writeln!(out, "{}{mark}=NA # {}", m.name, e.as_deref().unwrap_or(""));
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
