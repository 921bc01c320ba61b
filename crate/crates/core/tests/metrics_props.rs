use proptest::prelude::*;
use shiftbench::metrics::{
    accuracy_ovr, accuracy_top1, confusion_counts, f1_aggregated, f1_macro_per_class, macro_roc_auc, roc_auc_class,
    silhouette, MetricReport, PredictionSet,
};

/// Rows of a random row-stochastic matrix plus labels covering every class.
fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
    (2usize..6, 0usize..25).prop_flat_map(|(c, extra)| {
        let n = c + extra;
        (
            prop::collection::vec(prop::collection::vec(0.01f64..1.0, c), n),
            prop::collection::vec(0..c, extra),
            Just(c),
        )
            .prop_map(|(raw, tail, c)| {
                let rows = raw
                    .into_iter()
                    .map(|r| {
                        let s: f64 = r.iter().sum();
                        r.into_iter().map(|v| v / s).collect()
                    })
                    .collect();
                let labels = (0..c).chain(tail).collect();
                (rows, labels)
            })
    })
}

fn all_metrics(p: &PredictionSet) -> Vec<f64> {
    let c = confusion_counts(&p.predicted(), p.labels(), p.n_classes()).unwrap();
    vec![
        accuracy_top1(p),
        accuracy_ovr(&c).unwrap(),
        f1_aggregated(&c).unwrap(),
        f1_macro_per_class(&c).unwrap(),
        macro_roc_auc(p).unwrap(),
    ]
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
}

proptest! {
    #[test]
    fn metrics_lie_in_unit_interval((rows, labels) in instance()) {
        let p = PredictionSet::from_rows(&rows, labels).unwrap();
        for v in all_metrics(&p) {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let report = MetricReport::compute("RS", &p);
        prop_assert!(report.metrics.iter().all(|m| m.value.is_some()));
    }

    #[test]
    fn sample_order_does_not_matter((rows, labels) in instance(), rot in any::<usize>()) {
        let p = PredictionSet::from_rows(&rows, labels.clone()).unwrap();
        let n = rows.len();
        let order: Vec<usize> = (0..n).map(|i| (i * 7 + rot) % n).collect();
        let unique: std::collections::BTreeSet<_> = order.iter().collect();
        prop_assume!(unique.len() == n);
        let rows2: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();
        let labels2: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
        let q = PredictionSet::from_rows(&rows2, labels2).unwrap();
        prop_assert!(close(&all_metrics(&p), &all_metrics(&q)));
    }

    #[test]
    fn relabeling_classes_does_not_matter((rows, labels) in instance(), shift in 1usize..6) {
        let c = rows[0].len();
        let perm: Vec<usize> = (0..c).map(|k| (k + shift) % c).collect();
        let rows2: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let mut out = vec![0.0; c];
                for (k, &v) in r.iter().enumerate() {
                    out[perm[k]] = v;
                }
                out
            })
            .collect();
        let labels2: Vec<usize> = labels.iter().map(|&l| perm[l]).collect();
        let p = PredictionSet::from_rows(&rows, labels).unwrap();
        let q = PredictionSet::from_rows(&rows2, labels2).unwrap();
        prop_assert!(close(&all_metrics(&p), &all_metrics(&q)));
    }

    #[test]
    fn pooled_f1_equals_top1((rows, labels) in instance()) {
        let p = PredictionSet::from_rows(&rows, labels).unwrap();
        let c = confusion_counts(&p.predicted(), p.labels(), p.n_classes()).unwrap();
        prop_assert!((f1_aggregated(&c).unwrap() - accuracy_top1(&p)).abs() < 1e-12);
    }

    #[test]
    fn auc_complement(
        scores in prop::collection::btree_set(-1_000_000i64..1_000_000, 2..40),
        flags in prop::collection::vec(any::<bool>(), 40),
    ) {
        let scores: Vec<f64> = scores.into_iter().map(|s| s as f64 / 1000.0).collect();
        let y: Vec<bool> = flags[..scores.len()].to_vec();
        prop_assume!(y.iter().any(|&b| b) && y.iter().any(|&b| !b));
        let flipped: Vec<bool> = y.iter().map(|b| !b).collect();
        let sum = roc_auc_class(&scores, &y).unwrap() + roc_auc_class(&scores, &flipped).unwrap();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn silhouette_in_range(
        points in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 3..30),
        labels_raw in prop::collection::vec(0usize..3, 30),
    ) {
        let mut labels = labels_raw[..points.len()].to_vec();
        labels[0] = 0;
        labels[1] = 1;
        let s = silhouette(&points, &labels).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s));
    }
}
