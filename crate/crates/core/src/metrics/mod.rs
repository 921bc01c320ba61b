//! Evaluation metrics: one-vs-rest counts, ROC-AUC, pooled F1 and
//! accuracy, top-1 accuracy and silhouette scores.

mod classification;
mod predictions;
mod roc;
mod silhouette;

use thiserror::Error;

pub use classification::{
    accuracy_ovr, accuracy_top1, argmax_lowest, confusion_counts, f1_aggregated, f1_macro_per_class,
    ConfusionCounts,
};
pub use predictions::{read_predictions, write_predictions, MetricReport, PredictionSet};
pub use roc::{macro_roc_auc, roc_auc_class, roc_curve, RocCurve};
pub use silhouette::silhouette;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("empty input")]
    Empty,
    #[error("label {label} at index {index} is outside [0, {classes})")]
    LabelOutOfRange { index: usize, label: usize, classes: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid probabilities: {0}")]
    InvalidProbabilities(String),
    #[error("ROC-AUC undefined: only one class present")]
    SingleClass,
    #[error("classes absent from labels: {0:?}")]
    MissingClasses(Vec<usize>),
    #[error("zero denominator: {0}")]
    ZeroDenominator(&'static str),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}
