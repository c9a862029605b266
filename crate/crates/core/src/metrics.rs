//! Agreement and quality metrics for comparing pipeline output with
//! reference inference.

use serde::Serialize;

/// Fraction of positions where `a` and `b` agree. Empty input gives 1.
pub fn agreement(a: &[u64], b: &[u64]) -> f64 {
    assert_eq!(a.len(), b.len(), "prediction lists differ in length");
    if a.is_empty() {
        return 1.0;
    }
    a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64
}

/// Accuracy of `pred` against ground truth `truth`.
pub fn accuracy(pred: &[u64], truth: &[u64]) -> f64 {
    agreement(pred, truth)
}

/// Pipeline accuracy over reference accuracy, both against `truth`.
/// `None` when the reference gets nothing right.
pub fn relative_accuracy(pipeline: &[u64], reference: &[u64], truth: &[u64]) -> Option<f64> {
    let r = accuracy(reference, truth);
    (r > 0.0).then(|| accuracy(pipeline, truth) / r)
}

/// `matrix[actual][predicted]` counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub matrix: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(pred: &[u64], actual: &[u64], n_classes: usize) -> Self {
        assert_eq!(pred.len(), actual.len(), "prediction lists differ in length");
        let n = pred.iter().chain(actual).map(|&v| v as usize + 1).max().unwrap_or(0).max(n_classes);
        let mut matrix = vec![vec![0; n]; n];
        for (&p, &a) in pred.iter().zip(actual) {
            matrix[a as usize][p as usize] += 1;
        }
        ConfusionMatrix { matrix }
    }

    pub fn n_classes(&self) -> usize {
        self.matrix.len()
    }

    /// Unweighted mean of per-class F1 over classes that occur in either
    /// list. A class with no true positives scores 0.
    pub fn macro_f1(&self) -> f64 {
        let n = self.n_classes();
        let mut sum = 0.0;
        let mut present = 0;
        for c in 0..n {
            let tp = self.matrix[c][c] as f64;
            let actual: u64 = self.matrix[c].iter().sum();
            let predicted: u64 = (0..n).map(|r| self.matrix[r][c]).sum();
            if actual == 0 && predicted == 0 {
                continue;
            }
            present += 1;
            let denom = actual as f64 + predicted as f64;
            sum += 2.0 * tp / denom;
        }
        if present == 0 {
            1.0
        } else {
            sum / present as f64
        }
    }
}

pub fn macro_f1(pred: &[u64], actual: &[u64]) -> f64 {
    ConfusionMatrix::new(pred, actual, 0).macro_f1()
}

/// Pearson correlation; `None` when either series is constant or empty.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "series differ in length");
    if a.is_empty() {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa.sqrt() * sbb.sqrt()))
}
