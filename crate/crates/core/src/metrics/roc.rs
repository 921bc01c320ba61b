use super::classification::check_labels;
use super::{MetricError, PredictionSet};

/// ROC points from `(0, 0)` to `(1, 1)`, one per distinct score threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(fpr, tpr)` pairs, both non-decreasing.
    pub points: Vec<(f64, f64)>,
}

impl RocCurve {
    /// Trapezoidal area under the curve.
    pub fn area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum()
    }
}

/// Sweeps thresholds over distinct scores in descending order. Samples with
/// equal scores cross the threshold together.
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Result<RocCurve, MetricError> {
    if scores.len() != positive.len() {
        return Err(MetricError::Shape(format!("{} scores vs {} labels", scores.len(), positive.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(MetricError::InvalidProbabilities("non-finite score".into()));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    Ok(RocCurve { points })
}

/// Area under the ROC curve for one binary problem.
pub fn roc_auc_class(scores: &[f64], positive: &[bool]) -> Result<f64, MetricError> {
    Ok(roc_curve(scores, positive)?.area())
}

/// Unweighted mean of one-vs-rest AUCs, using column `c` as class `c`'s score.
pub fn macro_roc_auc(p: &PredictionSet) -> Result<f64, MetricError> {
    let c = p.n_classes();
    check_labels(p.labels(), c)?;
    let missing: Vec<usize> = (0..c).filter(|k| !p.labels().contains(k)).collect();
    if !missing.is_empty() {
        return Err(MetricError::MissingClasses(missing));
    }
    let mut total = 0.0;
    for k in 0..c {
        let scores: Vec<f64> = p.probs().column(k).iter().copied().collect();
        let pos: Vec<bool> = p.labels().iter().map(|&l| l == k).collect();
        total += roc_auc_class(&scores, &pos)?;
    }
    Ok(total / c as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Mann-Whitney pair count with half credit for ties.
    fn pair_oracle(scores: &[f64], pos: &[bool]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if pos[i] && !pos[j] {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn perfect_and_inverted() {
        let pos = [true, true, false, false];
        assert_eq!(roc_auc_class(&[0.9, 0.8, 0.2, 0.1], &pos).unwrap(), 1.0);
        assert_eq!(roc_auc_class(&[0.1, 0.2, 0.8, 0.9], &pos).unwrap(), 0.0);
    }

    #[test]
    fn matches_pair_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut done = 0;
        while done < 200 {
            let n = rng.random_range(2..=20);
            // Coarse scores force ties.
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64 / 5.0).collect();
            let pos: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
            if pos.iter().all(|&p| p) || pos.iter().all(|&p| !p) {
                continue;
            }
            let got = roc_auc_class(&scores, &pos).unwrap();
            assert!((got - pair_oracle(&scores, &pos)).abs() < 1e-9);
            done += 1;
        }
    }

    #[test]
    fn single_class_is_error() {
        assert!(matches!(roc_auc_class(&[0.1, 0.2], &[true, true]), Err(MetricError::SingleClass)));
    }

    #[test]
    fn curve_is_monotone() {
        let c = roc_curve(&[0.3, 0.3, 0.9, 0.1, 0.5], &[true, false, true, false, false]).unwrap();
        assert_eq!(*c.points.first().unwrap(), (0.0, 0.0));
        assert_eq!(*c.points.last().unwrap(), (1.0, 1.0));
        assert!(c.points.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1));
    }

    #[test]
    fn macro_cases() {
        let eye = PredictionSet::new(
            nalgebra::DMatrix::from_row_slice(3, 3, &[1., 0., 0., 0., 1., 0., 0., 0., 1.]),
            vec![0, 1, 2],
        )
        .unwrap();
        assert_eq!(macro_roc_auc(&eye).unwrap(), 1.0);
        let uni = PredictionSet::new(nalgebra::DMatrix::from_element(4, 2, 0.5), vec![0, 1, 0, 1]).unwrap();
        assert_eq!(macro_roc_auc(&uni).unwrap(), 0.5);
        let missing = PredictionSet::new(nalgebra::DMatrix::from_element(2, 3, 1.0 / 3.0), vec![0, 0]).unwrap();
        match macro_roc_auc(&missing) {
            Err(MetricError::MissingClasses(m)) => assert_eq!(m, vec![1, 2]),
            other => panic!("{other:?}"),
        }
    }
}
