//! Seeded generators for models and datasets.
//!
//! Random models exercise the converters structurally; the Gaussian dataset
//! and the small fitters beside it give the lookup-based families models
//! with realistic decision boundaries. Everything is a pure function of the
//! RNG state.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::model::*;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn schema(widths: &[u32]) -> FeatureSchema {
    FeatureSchema::with_widths(widths).expect("generator widths are valid")
}

/// Random axis-aligned tree of depth at most `depth`. Every split cuts the
/// region reaching it, so no branch is empty. Below the root a node stops
/// early with probability 1/8.
pub fn random_tree<L, R: Rng>(
    rng: &mut R,
    schema: &FeatureSchema,
    depth: u32,
    mut leaf: impl FnMut(&mut R, u32) -> L,
) -> Tree<L> {
    fn grow<L, R: Rng>(
        rng: &mut R,
        nodes: &mut Vec<Option<Node<L>>>,
        bounds: &mut [(u64, u64)],
        d: u32,
        depth: u32,
        leaf: &mut impl FnMut(&mut R, u32) -> L,
    ) -> usize {
        let idx = nodes.len();
        nodes.push(None);
        let splittable: Vec<usize> = (0..bounds.len()).filter(|&i| bounds[i].0 < bounds[i].1).collect();
        let stop = d >= depth || splittable.is_empty() || (d > 0 && rng.gen_ratio(1, 8));
        if stop {
            nodes[idx] = Some(Node::Leaf(leaf(rng, d)));
            return idx;
        }
        let feature = *splittable.choose(rng).expect("non-empty");
        let (lo, hi) = bounds[feature];
        let threshold = rng.gen_range(lo..hi);
        bounds[feature] = (lo, threshold);
        let left = grow(rng, nodes, bounds, d + 1, depth, leaf);
        bounds[feature] = (threshold + 1, hi);
        let right = grow(rng, nodes, bounds, d + 1, depth, leaf);
        bounds[feature] = (lo, hi);
        nodes[idx] = Some(Node::Split(Split { feature, threshold, left, right }));
        idx
    }
    let mut bounds: Vec<(u64, u64)> = (0..schema.len()).map(|i| (0, schema.max_value(i))).collect();
    let mut nodes = Vec::new();
    grow(rng, &mut nodes, &mut bounds, 0, depth, &mut leaf);
    Tree { nodes: nodes.into_iter().map(|n| n.expect("every node filled")).collect() }
}

fn class_leaf<R: Rng>(n_classes: usize) -> impl FnMut(&mut R, u32) -> ClassLeaf {
    move |rng: &mut R, _| ClassLeaf { label: rng.gen_range(0..n_classes as u32) }
}

pub fn random_dt<R: Rng>(rng: &mut R, widths: &[u32], depth: u32, n_classes: usize) -> ModelSpec {
    let s = schema(widths);
    let tree = random_tree(rng, &s, depth, class_leaf(n_classes));
    ModelSpec::new(s, n_classes, ModelParams::Dt(tree)).expect("generated dt is valid")
}

pub fn random_rf<R: Rng>(rng: &mut R, widths: &[u32], depth: u32, n_trees: usize, n_classes: usize) -> ModelSpec {
    let s = schema(widths);
    let trees = (0..n_trees).map(|_| random_tree(rng, &s, depth, class_leaf(n_classes))).collect();
    ModelSpec::new(s, n_classes, ModelParams::Rf(ForestParams { trees })).expect("generated rf is valid")
}

pub fn random_xgb<R: Rng>(rng: &mut R, widths: &[u32], depth: u32, n_trees: usize, n_classes: usize) -> ModelSpec {
    let s = schema(widths);
    let groups = if n_classes <= 2 { 1 } else { n_classes };
    let base_score = (0..groups).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let trees = (0..n_trees)
        .map(|_| random_tree(rng, &s, depth, |rng: &mut R, _| ScoreLeaf { value: rng.gen_range(-1.0..1.0) }))
        .collect();
    ModelSpec::new(s, n_classes, ModelParams::Xgb(XgbParams { base_score, trees })).expect("generated xgb is valid")
}

/// Leaf sizes shrink with depth the way sub-sample counts do.
pub fn random_iforest<R: Rng>(rng: &mut R, widths: &[u32], depth: u32, n_trees: usize, n_samples: u64) -> ModelSpec {
    let s = schema(widths);
    let trees = (0..n_trees)
        .map(|_| {
            random_tree(rng, &s, depth, |rng: &mut R, d| IsoLeaf {
                size: rng.gen_range(1..=(n_samples >> d).max(1)),
            })
        })
        .collect();
    let params = IForestParams { n_samples, score_threshold: 0.5, trees };
    ModelSpec::new(s, 2, ModelParams::Iforest(params)).expect("generated iforest is valid")
}

fn uniform_point<R: Rng>(rng: &mut R, s: &FeatureSchema) -> Vec<f64> {
    (0..s.len()).map(|i| rng.gen_range(0.0..=s.max_value(i) as f64)).collect()
}

pub fn random_kmeans<R: Rng>(rng: &mut R, widths: &[u32], k: usize) -> ModelSpec {
    let s = schema(widths);
    let centroids = (0..k).map(|_| uniform_point(rng, &s)).collect();
    ModelSpec::new(s, k, ModelParams::Kmeans(KmeansParams { centroids })).expect("generated kmeans is valid")
}

pub fn random_knn<R: Rng>(rng: &mut R, widths: &[u32], n_points: usize, k: usize, n_classes: usize) -> ModelSpec {
    let s = schema(widths);
    let points = (0..n_points)
        .map(|_| KnnPoint {
            x: (0..s.len()).map(|i| rng.gen_range(0..=s.max_value(i))).collect(),
            label: rng.gen_range(0..n_classes as u32),
        })
        .collect();
    ModelSpec::new(s, n_classes, ModelParams::Knn(KnnParams { k, points })).expect("generated knn is valid")
}

fn class_pairs(k: usize) -> impl Iterator<Item = [Label; 2]> {
    (0..k as u32).flat_map(move |a| (a + 1..k as u32).map(move |b| [a, b]))
}

/// Hyperplanes through a random domain point with random normals.
pub fn random_svm<R: Rng>(rng: &mut R, widths: &[u32], n_classes: usize) -> ModelSpec {
    let s = schema(widths);
    let hyperplanes = class_pairs(n_classes)
        .map(|classes| {
            let w: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let at = uniform_point(rng, &s);
            let b = -w.iter().zip(&at).map(|(w, x)| w * x).sum::<f64>();
            Hyperplane { w, b, classes }
        })
        .collect();
    ModelSpec::new(s, n_classes, ModelParams::Svm(SvmParams { hyperplanes })).expect("generated svm is valid")
}

pub fn random_nb<R: Rng>(rng: &mut R, widths: &[u32], n_classes: usize) -> ModelSpec {
    let s = schema(widths);
    let raw: Vec<f64> = (0..n_classes).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let priors = raw.iter().map(|p| p / total).collect();
    let means = (0..n_classes).map(|_| uniform_point(rng, &s)).collect();
    let variances = (0..n_classes)
        .map(|_| {
            (0..s.len())
                .map(|i| {
                    let span = s.max_value(i) as f64 + 1.0;
                    (span * rng.gen_range(0.05..0.3)).powi(2)
                })
                .collect()
        })
        .collect();
    ModelSpec::new(s, n_classes, ModelParams::Nb(NbParams { priors, means, variances })).expect("generated nb is valid")
}

pub fn random_pca<R: Rng>(rng: &mut R, widths: &[u32], out_dim: usize) -> ModelSpec {
    let s = schema(widths);
    let means = uniform_point(rng, &s);
    let components = (0..s.len()).map(|_| (0..out_dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    ModelSpec::new(s, out_dim, ModelParams::Pca(PcaParams { means, components })).expect("generated pca is valid")
}

pub fn random_ae<R: Rng>(rng: &mut R, widths: &[u32], out_dim: usize) -> ModelSpec {
    let s = schema(widths);
    let weights = (0..s.len()).map(|_| (0..out_dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let bias = (0..out_dim).map(|_| rng.gen_range(-10.0..10.0)).collect();
    ModelSpec::new(s, out_dim, ModelParams::Ae(AeParams { weights, bias })).expect("generated ae is valid")
}

/// Random binarized network; `hidden` lists hidden layer widths.
pub fn random_bnn<R: Rng>(rng: &mut R, widths: &[u32], hidden: &[usize], n_classes: usize) -> ModelSpec {
    let s = schema(widths);
    let mut fan_in = s.total_bits() as usize;
    let mut layers = Vec::new();
    for &out in hidden.iter().chain([n_classes].iter()) {
        let rows = (0..out).map(|_| BitRow((0..fan_in).map(|_| rng.gen()).collect())).collect();
        layers.push(BnnLayer { rows });
        fan_in = out;
    }
    ModelSpec::new(s, n_classes, ModelParams::Bnn(BnnParams { layers })).expect("generated bnn is valid")
}

/// Labelled integer feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub x: Vec<Vec<u64>>,
    pub y: Vec<u64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn n_classes(&self) -> usize {
        self.y.iter().max().map_or(0, |&m| m as usize + 1)
    }
}

/// Two overlapping Gaussian classes, equally likely, rounded and clamped
/// into each feature's domain. Class centers sit at 35% and 65% of the
/// domain with a standard deviation of 12% of it.
pub fn gaussian_two_class<R: Rng>(rng: &mut R, widths: &[u32], n: usize) -> Dataset {
    let s = schema(widths);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let label = rng.gen_range(0..2u64);
        let row = (0..s.len())
            .map(|i| {
                let max = s.max_value(i) as f64;
                let center = if label == 0 { 0.35 } else { 0.65 } * max;
                let v = Normal::new(center, 0.12 * max).expect("positive deviation").sample(rng);
                v.round().clamp(0.0, max) as u64
            })
            .collect();
        x.push(row);
        y.push(label);
    }
    Dataset { schema: s, x, y }
}

/// Gaussian naive Bayes by maximum likelihood, with a variance floor of
/// 1e-9 of the largest feature variance.
pub fn fit_nb(data: &Dataset) -> ModelSpec {
    let k = data.n_classes();
    let n = data.schema.len();
    let mut counts = vec![0usize; k];
    let mut sums = vec![vec![0.0; n]; k];
    for (row, &c) in data.x.iter().zip(&data.y) {
        counts[c as usize] += 1;
        for (s, &v) in sums[c as usize].iter_mut().zip(row) {
            *s += v as f64;
        }
    }
    let means: Vec<Vec<f64>> =
        sums.iter().zip(&counts).map(|(s, &c)| s.iter().map(|v| v / c.max(1) as f64).collect()).collect();
    let mut vars = vec![vec![0.0; n]; k];
    for (row, &c) in data.x.iter().zip(&data.y) {
        for i in 0..n {
            vars[c as usize][i] += (row[i] as f64 - means[c as usize][i]).powi(2);
        }
    }
    let mut largest: f64 = 0.0;
    for (vs, &c) in vars.iter_mut().zip(&counts) {
        for v in vs.iter_mut() {
            *v /= c.max(1) as f64;
            largest = largest.max(*v);
        }
    }
    let floor = (largest * 1e-9).max(1e-9);
    for v in vars.iter_mut().flatten() {
        *v += floor;
    }
    let priors = counts.iter().map(|&c| c as f64 / data.len() as f64).collect();
    ModelSpec::new(data.schema.clone(), k, ModelParams::Nb(NbParams { priors, means, variances: vars }))
        .expect("fitted nb is valid")
}

/// Lloyd's algorithm from `k` distinct random samples.
pub fn fit_kmeans<R: Rng>(rng: &mut R, data: &Dataset, k: usize, iterations: usize) -> ModelSpec {
    let n = data.schema.len();
    let mut centroids: Vec<Vec<f64>> = rand::seq::index::sample(rng, data.len(), k)
        .into_iter()
        .map(|i| data.x[i].iter().map(|&v| v as f64).collect())
        .collect();
    for _ in 0..iterations {
        let mut sums = vec![vec![0.0; n]; k];
        let mut counts = vec![0usize; k];
        for row in &data.x {
            let j = nearest(&centroids, row);
            counts[j] += 1;
            for (s, &v) in sums[j].iter_mut().zip(row) {
                *s += v as f64;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
    }
    ModelSpec::new(data.schema.clone(), k, ModelParams::Kmeans(KmeansParams { centroids })).expect("fitted kmeans is valid")
}

fn nearest(centroids: &[Vec<f64>], row: &[u64]) -> usize {
    let dist = |c: &[f64]| c.iter().zip(row).map(|(c, &x)| (x as f64 - c).powi(2)).sum::<f64>();
    let mut best = 0;
    for j in 1..centroids.len() {
        if dist(&centroids[j]) < dist(&centroids[best]) {
            best = j;
        }
    }
    best
}

/// One-vs-one linear SVMs trained by Pegasos subgradient descent on
/// features scaled to [0, 1], then mapped back to raw feature units.
pub fn fit_svm<R: Rng>(rng: &mut R, data: &Dataset, epochs: usize) -> ModelSpec {
    let k = data.n_classes();
    let n = data.schema.len();
    let scale: Vec<f64> = (0..n).map(|i| data.schema.max_value(i).max(1) as f64).collect();
    let lambda = 1e-3;
    let hyperplanes = class_pairs(k)
        .map(|classes| {
            let idx: Vec<usize> =
                (0..data.len()).filter(|&r| classes.contains(&(data.y[r] as Label))).collect();
            // the last weight multiplies a constant 1 and serves as the bias
            let mut w = vec![0.0; n + 1];
            let mut t = 0usize;
            let mut order = idx;
            for _ in 0..epochs {
                order.shuffle(rng);
                for &r in &order {
                    t += 1;
                    let eta = 1.0 / (lambda * t as f64);
                    let yv = if data.y[r] as Label == classes[0] { 1.0 } else { -1.0 };
                    let xs: Vec<f64> =
                        data.x[r].iter().zip(&scale).map(|(&v, s)| v as f64 / s).chain([1.0]).collect();
                    let margin = yv * w.iter().zip(&xs).map(|(w, x)| w * x).sum::<f64>();
                    for wi in w.iter_mut() {
                        *wi *= 1.0 - eta * lambda;
                    }
                    if margin < 1.0 {
                        for (wi, x) in w.iter_mut().zip(&xs) {
                            *wi += eta * yv * x;
                        }
                    }
                }
            }
            let b = w[n];
            Hyperplane { w: w.iter().zip(&scale).map(|(w, s)| w / s).collect(), b, classes }
        })
        .collect();
    ModelSpec::new(data.schema.clone(), k, ModelParams::Svm(SvmParams { hyperplanes })).expect("fitted svm is valid")
}
