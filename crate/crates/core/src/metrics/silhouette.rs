use super::MetricError;

/// Mean silhouette over all points with Euclidean distance. Points alone in
/// their class score 0.
pub fn silhouette(embeddings: &[Vec<f64>], labels: &[usize]) -> Result<f64, MetricError> {
    let n = embeddings.len();
    if n != labels.len() {
        return Err(MetricError::Shape(format!("{n} embeddings vs {} labels", labels.len())));
    }
    if n < 2 {
        return Err(MetricError::Empty);
    }
    let d = embeddings[0].len();
    if embeddings.iter().any(|e| e.len() != d) {
        return Err(MetricError::Shape("embeddings have differing dimensions".into()));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; classes];
    for &l in labels {
        counts[l] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(MetricError::SingleClass);
    }

    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let mut total = 0.0;
    let mut sums = vec![0.0; classes];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if i != j {
                sums[labels[j]] += dist(&embeddings[i], &embeddings[j]);
            }
        }
        let own = labels[i];
        if counts[own] < 2 {
            continue;
        }
        let a = sums[own] / (counts[own] - 1) as f64;
        let b = (0..classes)
            .filter(|&k| k != own && counts[k] > 0)
            .map(|k| sums[k] / counts[k] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}
