//! Floating-point reference inference for every family. Mapped pipelines are
//! verified against these functions.

use super::{FeatureVector, Label, ModelParams, ModelSpec};
use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.5772156649;

/// Average path length of an unsuccessful search in a binary search tree
/// built on `n` points, the isolation-forest normaliser `c(n)`.
pub fn average_path_length(n: u64) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_v || i == 0 {
            best = i;
            best_v = v;
        }
    }
    best
}

pub(crate) fn argmin(values: impl IntoIterator<Item = f64>) -> usize {
    argmax(values.into_iter().map(|v| -v))
}

/// Majority label; ties go to the lowest label.
pub(crate) fn majority(labels: impl IntoIterator<Item = Label>, n_classes: usize) -> Label {
    let mut counts = vec![0usize; n_classes];
    for l in labels {
        counts[l as usize] += 1;
    }
    argmax(counts.into_iter().map(|c| c as f64)) as Label
}

fn squared_distance(x: &[u64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(&v, &c)| (v as f64 - c).powi(2)).sum()
}

impl ModelSpec {
    /// Exact floating-point prediction for classifier families.
    pub fn reference_predict(&self, x: &FeatureVector) -> Result<Label> {
        self.schema.check(x)?;
        let x = x.values();
        let k = self.n_outputs;
        let label = match &self.params {
            ModelParams::Dt(tree) => tree.predict(x).label,
            ModelParams::Rf(forest) => majority(forest.trees.iter().map(|t| t.predict(x).label), k),
            ModelParams::Xgb(p) => xgb_decide(p, xgb_scores(p, x)),
            ModelParams::Iforest(p) => iforest_decide(p, iforest_mean_path(p, x)),
            ModelParams::Kmeans(p) => argmin(p.centroids.iter().map(|c| squared_distance(x, c))) as Label,
            ModelParams::Knn(p) => {
                let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
                knn_label(p, &xf, k)
            }
            ModelParams::Svm(p) => {
                let votes = p.hyperplanes.iter().map(|h| {
                    let d: f64 = h.w.iter().zip(x).map(|(w, &v)| w * v as f64).sum::<f64>() + h.b;
                    svm_vote(d, h.classes)
                });
                majority(votes, k)
            }
            ModelParams::Nb(p) => argmax((0..k).map(|c| {
                let mut score = p.priors[c].ln();
                for (i, &v) in x.iter().enumerate() {
                    score += gaussian_ln_pdf(v as f64, p.means[c][i], p.variances[c][i]);
                }
                score
            })) as Label,
            ModelParams::Bnn(p) => {
                let mut input = concat_bits(&self.schema, x);
                let last = p.layers.len() - 1;
                let mut label = 0;
                for (i, layer) in p.layers.iter().enumerate() {
                    // ±1 dot products, independent of the XNOR/popcount route
                    let dots: Vec<i64> = layer
                        .rows
                        .iter()
                        .map(|row| {
                            row.0
                                .iter()
                                .zip(&input)
                                .map(|(&w, &b)| if w == b { 1 } else { -1 })
                                .sum()
                        })
                        .collect();
                    if i == last {
                        label = argmax(dots.iter().map(|&d| d as f64)) as Label;
                    } else {
                        input = dots.iter().map(|&d| d >= 0).collect();
                    }
                }
                label
            }
            ModelParams::Pca(_) | ModelParams::Ae(_) => {
                return Err(Error::WrongFamily {
                    family: self.family().to_string(),
                    message: "not a classifier; use reference_transform".into(),
                })
            }
        };
        Ok(label)
    }

    /// Exact linear map for pca and ae.
    pub fn reference_transform(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        self.schema.check(x)?;
        let x = x.values();
        match &self.params {
            ModelParams::Pca(p) => Ok((0..self.n_outputs)
                .map(|j| {
                    x.iter()
                        .enumerate()
                        .map(|(i, &v)| (v as f64 - p.means[i]) * p.components[i][j])
                        .sum()
                })
                .collect()),
            ModelParams::Ae(p) => Ok((0..self.n_outputs)
                .map(|j| {
                    x.iter()
                        .enumerate()
                        .map(|(i, &v)| v as f64 * p.weights[i][j])
                        .sum::<f64>()
                        + p.bias[j]
                })
                .collect()),
            _ => Err(Error::WrongFamily {
                family: self.family().to_string(),
                message: "reference_transform applies to pca and ae only".into(),
            }),
        }
    }
}

pub(crate) fn svm_vote(decision: f64, classes: [Label; 2]) -> Label {
    let [a, b] = classes;
    if decision > 0.0 {
        a
    } else if decision < 0.0 {
        b
    } else {
        a.min(b)
    }
}

pub(crate) fn gaussian_ln_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (x - mean).powi(2) / (2.0 * var)
}

pub(crate) fn xgb_scores(p: &super::XgbParams, x: &[u64]) -> Vec<f64> {
    let mut scores = p.base_score.clone();
    let groups = p.groups();
    for (t, tree) in p.trees.iter().enumerate() {
        scores[t % groups] += tree.predict(x).value;
    }
    scores
}

pub(crate) fn iforest_path_length(tree: &super::Tree<super::IsoLeaf>, node: usize, depth: u32) -> f64 {
    depth as f64 + average_path_length(tree.payload(node).size)
}

pub(crate) fn iforest_mean_path(p: &super::IForestParams, x: &[u64]) -> f64 {
    iforest_mean(p.trees.iter().map(|t| {
        let (node, depth) = t.route(x);
        iforest_path_length(t, node, depth)
    }))
}

/// Mean of per-tree path lengths, summed in tree order.
pub(crate) fn iforest_mean(paths: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = paths.len();
    let total: f64 = paths.sum();
    total / n as f64
}

/// 1 (anomaly) iff the mean path length is at or below the threshold.
pub(crate) fn iforest_decide(p: &super::IForestParams, mean_path: f64) -> Label {
    (mean_path <= iforest_threshold(p)) as Label
}

/// Binary: label 1 iff the raw score is positive. Multi-class: argmax.
pub(crate) fn xgb_decide(p: &super::XgbParams, scores: Vec<f64>) -> Label {
    if p.groups() == 1 {
        (scores[0] > 0.0) as Label
    } else {
        argmax(scores) as Label
    }
}

/// Mean path length at or below which a point is an anomaly:
/// `-c(t) · log2(score_threshold)`.
pub(crate) fn iforest_threshold(p: &super::IForestParams) -> f64 {
    -average_path_length(p.n_samples) * p.score_threshold.log2()
}

/// Majority label among the `k` nearest training points (distance ties keep
/// training order).
pub(crate) fn knn_label(p: &super::KnnParams, x: &[f64], n_classes: usize) -> Label {
    let mut dists: Vec<(f64, usize)> = p
        .points
        .iter()
        .enumerate()
        .map(|(i, pt)| {
            let d: f64 = pt.x.iter().zip(x).map(|(&a, &b)| (a as f64 - b).powi(2)).sum();
            (d, i)
        })
        .collect();
    dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    majority(dists[..p.k].iter().map(|&(_, i)| p.points[i].label), n_classes)
}

/// Concatenated input bits, feature 0 first, each feature MSB first.
pub(crate) fn concat_bits(schema: &super::FeatureSchema, x: &[u64]) -> Vec<bool> {
    let mut bits = Vec::with_capacity(schema.total_bits() as usize);
    for (i, &v) in x.iter().enumerate() {
        let w = schema.bit_width(i);
        for b in (0..w).rev() {
            bits.push((v >> b) & 1 == 1);
        }
    }
    bits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;

    fn schema(widths: &[u32]) -> FeatureSchema {
        FeatureSchema::with_widths(widths).unwrap()
    }

    fn x(v: &[u64]) -> FeatureVector {
        FeatureVector(v.to_vec())
    }

    #[test]
    fn dt_single_split() {
        let spec = ModelSpec::new(
            schema(&[3]),
            2,
            ModelParams::Dt(Tree {
                nodes: vec![
                    Node::Split(Split { feature: 0, threshold: 4, left: 1, right: 2 }),
                    Node::Leaf(ClassLeaf { label: 1 }),
                    Node::Leaf(ClassLeaf { label: 0 }),
                ],
            }),
        )
        .unwrap();
        assert_eq!(spec.reference_predict(&x(&[3])).unwrap(), 1);
        assert_eq!(spec.reference_predict(&x(&[5])).unwrap(), 0);
        assert!(matches!(
            spec.reference_predict(&x(&[8])),
            Err(Error::FeatureDomain { value: 8, .. })
        ));
    }

    #[test]
    fn svm_tie_votes_for_lower_class() {
        // w=(1,-1), b=0 at x=(5,5): decision value exactly zero
        let spec = ModelSpec::new(
            schema(&[3, 3]),
            2,
            ModelParams::Svm(SvmParams {
                hyperplanes: vec![Hyperplane { w: vec![1.0, -1.0], b: 0.0, classes: [1, 0] }],
            }),
        )
        .unwrap();
        assert_eq!(spec.reference_predict(&x(&[5, 5])).unwrap(), 0);
        assert_eq!(spec.reference_predict(&x(&[6, 5])).unwrap(), 1);
        assert_eq!(spec.reference_predict(&x(&[4, 5])).unwrap(), 0);
    }

    #[test]
    fn svm_vote_order_invariant() {
        let planes = vec![
            Hyperplane { w: vec![1.0, 0.0], b: -3.0, classes: [0, 1] },
            Hyperplane { w: vec![0.0, 1.0], b: -3.0, classes: [0, 2] },
            Hyperplane { w: vec![1.0, -1.0], b: 0.5, classes: [1, 2] },
        ];
        let mut reversed = planes.clone();
        reversed.reverse();
        let a = ModelSpec::new(schema(&[3, 3]), 3, ModelParams::Svm(SvmParams { hyperplanes: planes })).unwrap();
        let b = ModelSpec::new(schema(&[3, 3]), 3, ModelParams::Svm(SvmParams { hyperplanes: reversed })).unwrap();
        for i in 0..64 {
            let p = a.schema.domain_point(i);
            assert_eq!(a.reference_predict(&p).unwrap(), b.reference_predict(&p).unwrap());
        }
    }

    #[test]
    fn iforest_threshold_for_128_samples() {
        // c(128) = 2(ln 127 + γ) - 2·127/128, times -log2(0.5) = 1
        let p = IForestParams {
            n_samples: 128,
            score_threshold: 0.5,
            trees: vec![Tree::leaf(IsoLeaf { size: 1 })],
        };
        let expected = 2.0 * (127f64.ln() + 0.5772156649) - 2.0 * 127.0 / 128.0;
        assert!((iforest_threshold(&p) - expected).abs() < 1e-12);
        assert!((iforest_threshold(&p) - 8.858_430_502_7).abs() < 1e-9);
    }

    #[test]
    fn iforest_short_paths_are_anomalies() {
        // depth-2 leaves of size 1 give mean path 2.0, well under c(128)
        let tree = Tree {
            nodes: vec![
                Node::Split(Split { feature: 0, threshold: 3, left: 1, right: 2 }),
                Node::Split(Split { feature: 0, threshold: 1, left: 3, right: 4 }),
                Node::Leaf(IsoLeaf { size: 120 }),
                Node::Leaf(IsoLeaf { size: 1 }),
                Node::Leaf(IsoLeaf { size: 1 }),
            ],
        };
        let spec = ModelSpec::new(
            schema(&[3]),
            2,
            ModelParams::Iforest(IForestParams { n_samples: 128, score_threshold: 0.5, trees: vec![tree] }),
        )
        .unwrap();
        assert_eq!(spec.reference_predict(&x(&[0])).unwrap(), 1);
        // 1 + c(120) ≈ 9.73 > 8.86
        assert_eq!(spec.reference_predict(&x(&[6])).unwrap(), 0);
    }

    #[test]
    fn nb_argmax_shift_invariant() {
        let mk = |priors: Vec<f64>| {
            ModelSpec::new(
                schema(&[4]),
                2,
                ModelParams::Nb(NbParams {
                    priors,
                    means: vec![vec![3.0], vec![9.0]],
                    variances: vec![vec![4.0], vec![4.0]],
                }),
            )
            .unwrap()
        };
        let spec = mk(vec![0.5, 0.5]);
        for v in 0..16 {
            let want = if v <= 6 { 0 } else { 1 };
            assert_eq!(spec.reference_predict(&x(&[v])).unwrap(), want, "x={v}");
        }
        // identical class conditionals: decided by the prior alone
        let flat = ModelSpec::new(
            schema(&[4]),
            2,
            ModelParams::Nb(NbParams {
                priors: vec![0.3, 0.7],
                means: vec![vec![3.0], vec![3.0]],
                variances: vec![vec![4.0], vec![4.0]],
            }),
        )
        .unwrap();
        assert!((0..16).all(|v| flat.reference_predict(&x(&[v])).unwrap() == 1));
    }

    #[test]
    fn bnn_matches_hand_evaluation() {
        // input 1010 against row 1010: all agree, dot = +4 → class 0 wins over complement row
        let spec = ModelSpec::new(
            schema(&[4]),
            2,
            ModelParams::Bnn(BnnParams {
                layers: vec![BnnLayer {
                    rows: vec![BitRow(vec![true, false, true, false]), BitRow(vec![false, true, false, true])],
                }],
            }),
        )
        .unwrap();
        assert_eq!(spec.reference_predict(&x(&[0b1010])).unwrap(), 0);
        assert_eq!(spec.reference_predict(&x(&[0b0101])).unwrap(), 1);
    }

    #[test]
    fn transforms() {
        let pca = ModelSpec::new(
            schema(&[4, 4]),
            1,
            ModelParams::Pca(PcaParams { means: vec![0.0, 0.0], components: vec![vec![1.0], vec![1.0]] }),
        )
        .unwrap();
        assert_eq!(pca.reference_transform(&x(&[3, 4])).unwrap(), vec![7.0]);
        assert!(pca.reference_predict(&x(&[3, 4])).is_err());

        let centred = ModelSpec::new(
            schema(&[4, 4]),
            2,
            ModelParams::Pca(PcaParams {
                means: vec![2.0, 5.0],
                components: vec![vec![0.3, -1.0], vec![0.7, 2.0]],
            }),
        )
        .unwrap();
        assert_eq!(centred.reference_transform(&x(&[2, 5])).unwrap(), vec![0.0, 0.0]);

        let ae = ModelSpec::new(
            schema(&[4, 4]),
            2,
            ModelParams::Ae(AeParams { weights: vec![vec![1.0, 0.0], vec![0.0, 1.0]], bias: vec![0.0, 0.0] }),
        )
        .unwrap();
        assert_eq!(ae.reference_transform(&x(&[3, 9])).unwrap(), vec![3.0, 9.0]);
        assert!(ae.reference_transform(&x(&[3, 16])).is_err());
    }

    #[test]
    fn ties_break_low() {
        assert_eq!(argmax([1.0, 3.0, 3.0]), 1);
        assert_eq!(argmin([2.0, 1.0, 1.0]), 1);
        assert_eq!(majority([2, 1, 2, 1], 3), 1);
        assert_eq!(argmax([f64::NEG_INFINITY, f64::NEG_INFINITY]), 0);
    }
}
