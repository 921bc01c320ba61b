use super::MetricError;
use super::PredictionSet;

/// One-vs-rest counts per class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub fn_: Vec<u64>,
    pub tn: Vec<u64>,
}

impl ConfusionCounts {
    pub fn n_classes(&self) -> usize {
        self.tp.len()
    }

    pub fn n_samples(&self) -> u64 {
        self.tp.first().map_or(0, |_| self.tp[0] + self.fp[0] + self.fn_[0] + self.tn[0])
    }

    /// Summed (TP, FP, FN, TN) over classes.
    pub fn pooled(&self) -> (u64, u64, u64, u64) {
        (
            self.tp.iter().sum(),
            self.fp.iter().sum(),
            self.fn_.iter().sum(),
            self.tn.iter().sum(),
        )
    }
}

pub(crate) fn check_labels(labels: &[usize], classes: usize) -> Result<(), MetricError> {
    match labels.iter().position(|&l| l >= classes) {
        Some(index) => Err(MetricError::LabelOutOfRange {
            index,
            label: labels[index],
            classes,
        }),
        None => Ok(()),
    }
}

pub fn confusion_counts(preds: &[usize], labels: &[usize], classes: usize) -> Result<ConfusionCounts, MetricError> {
    if preds.len() != labels.len() {
        return Err(MetricError::Shape(format!("{} predictions vs {} labels", preds.len(), labels.len())));
    }
    if preds.is_empty() {
        return Err(MetricError::Empty);
    }
    check_labels(labels, classes)?;
    check_labels(preds, classes)?;
    let n = preds.len() as u64;
    let mut tp = vec![0; classes];
    let mut fp = vec![0; classes];
    let mut fn_ = vec![0; classes];
    for (&p, &y) in preds.iter().zip(labels) {
        if p == y {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[y] += 1;
        }
    }
    let tn = (0..classes).map(|c| n - tp[c] - fp[c] - fn_[c]).collect();
    Ok(ConfusionCounts { tp, fp, fn_, tn })
}

/// F1 from counts pooled over all classes. For single-label predictions this
/// equals top-1 accuracy, since pooled FP and FN coincide.
pub fn f1_aggregated(c: &ConfusionCounts) -> Result<f64, MetricError> {
    let (tp, fp, fn_, _) = c.pooled();
    if tp + fp == 0 {
        return Err(MetricError::ZeroDenominator("TP + FP"));
    }
    if tp + fn_ == 0 {
        return Err(MetricError::ZeroDenominator("TP + FN"));
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Unweighted mean of per-class F1. A class with no predictions and no
/// instances scores 0.
pub fn f1_macro_per_class(c: &ConfusionCounts) -> Result<f64, MetricError> {
    if c.n_classes() == 0 {
        return Err(MetricError::Empty);
    }
    let sum: f64 = (0..c.n_classes())
        .map(|k| {
            let denom = 2 * c.tp[k] + c.fp[k] + c.fn_[k];
            if denom == 0 {
                0.0
            } else {
                2.0 * c.tp[k] as f64 / denom as f64
            }
        })
        .sum();
    Ok(sum / c.n_classes() as f64)
}

/// Pooled one-vs-rest accuracy, `(TP + TN) / (N·C)`.
pub fn accuracy_ovr(c: &ConfusionCounts) -> Result<f64, MetricError> {
    let (tp, fp, fn_, tn) = c.pooled();
    let total = tp + fp + fn_ + tn;
    if total == 0 {
        return Err(MetricError::Empty);
    }
    Ok((tp + tn) as f64 / total as f64)
}

/// Index of the row maximum; ties go to the lowest index.
pub fn argmax_lowest(row: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in row.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
pub fn accuracy_top1(p: &PredictionSet) -> f64 {
    let preds = p.predicted();
    let hits = preds.iter().zip(p.labels()).filter(|(a, b)| a == b).count();
    hits as f64 / preds.len() as f64
}
