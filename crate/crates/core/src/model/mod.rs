//! The trained-model interchange format and its reference inference.
//!
//! A model document is a JSON object:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "family": "dt",
//!   "features": [{ "name": "f0", "bit_width": 3 }],
//!   "n_classes": 2,
//!   "params": { "nodes": [ ... ] }
//! }
//! ```
//!
//! Feature values are unsigned integers below `2^bit_width`. `params` depends
//! on `family`; see `docs/model-schema.md` at the repository root.

mod reference;
pub mod tree;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use reference::{average_path_length, EULER_GAMMA};
pub(crate) use reference::{iforest_decide, iforest_mean, iforest_path_length, majority, xgb_decide};
pub use tree::{ClassLeaf, IsoLeaf, Node, Region, ScoreLeaf, Split, Tree};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Class index produced by classifiers.
pub type Label = u32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Feature {
    pub name: String,
    pub bit_width: u32,
    /// Distinct values seen in training, used by the unique-value table
    /// population mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<Vec<u64>>,
}

impl Feature {
    pub fn new(name: impl Into<String>, bit_width: u32) -> Self {
        Feature {
            name: name.into(),
            bit_width,
            observed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureSchema {
    features: Vec<Feature>,
}

impl FeatureSchema {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        let schema = FeatureSchema { features };
        schema.validate()?;
        Ok(schema)
    }

    /// Features named `f0..` with the given widths.
    pub fn with_widths(widths: &[u32]) -> Result<Self> {
        FeatureSchema::new(
            widths
                .iter()
                .enumerate()
                .map(|(i, &w)| Feature::new(format!("f{i}"), w))
                .collect(),
        )
    }

    fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::invalid("features", "at least one feature is required"));
        }
        let mut names = HashSet::new();
        for (i, f) in self.features.iter().enumerate() {
            if !(1..=32).contains(&f.bit_width) {
                return Err(Error::invalid(
                    format!("features[{i}].bit_width"),
                    format!("bit_width {} outside 1..=32", f.bit_width),
                ));
            }
            if !names.insert(f.name.as_str()) {
                return Err(Error::invalid(
                    format!("features[{i}].name"),
                    format!("duplicate feature name {:?}", f.name),
                ));
            }
            if let Some(obs) = &f.observed {
                let max = (1u64 << f.bit_width) - 1;
                if let Some(v) = obs.iter().find(|&&v| v > max) {
                    return Err(Error::invalid(
                        format!("features[{i}].observed"),
                        format!("value {v} outside {}-bit domain", f.bit_width),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &Feature {
        &self.features[i]
    }

    pub fn bit_width(&self, i: usize) -> u32 {
        self.features[i].bit_width
    }

    pub fn max_value(&self, i: usize) -> u64 {
        (1u64 << self.features[i].bit_width) - 1
    }

    pub fn total_bits(&self) -> u32 {
        self.features.iter().map(|f| f.bit_width).sum()
    }

    /// Number of points in the feature domain, if it fits in a `u64`.
    pub fn domain_size(&self) -> Option<u64> {
        let bits = self.total_bits();
        (bits < 64).then(|| 1u64 << bits)
    }

    /// The `index`-th domain point, feature 0 varying slowest.
    pub fn domain_point(&self, mut index: u64) -> FeatureVector {
        let mut values = vec![0u64; self.len()];
        for i in (0..self.len()).rev() {
            let w = self.bit_width(i);
            values[i] = index & ((1u64 << w) - 1);
            index >>= w;
        }
        FeatureVector(values)
    }

    pub fn check(&self, x: &FeatureVector) -> Result<()> {
        if x.len() != self.len() {
            return Err(Error::invalid(
                "input",
                format!("expected {} feature values, got {}", self.len(), x.len()),
            ));
        }
        for (i, &v) in x.values().iter().enumerate() {
            if v > self.max_value(i) {
                return Err(Error::FeatureDomain {
                    index: i,
                    value: v,
                    bit_width: self.bit_width(i),
                });
            }
        }
        Ok(())
    }
}

/// Ordered feature values, one per schema feature.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureVector(pub Vec<u64>);

impl FeatureVector {
    pub fn values(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<u64>> for FeatureVector {
    fn from(v: Vec<u64>) -> Self {
        FeatureVector(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Dt,
    Rf,
    Xgb,
    Iforest,
    Kmeans,
    Knn,
    Svm,
    Nb,
    Pca,
    Ae,
    Bnn,
}

impl Family {
    pub const ALL: [Family; 11] = [
        Family::Dt,
        Family::Rf,
        Family::Xgb,
        Family::Iforest,
        Family::Kmeans,
        Family::Knn,
        Family::Svm,
        Family::Nb,
        Family::Pca,
        Family::Ae,
        Family::Bnn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Dt => "dt",
            Family::Rf => "rf",
            Family::Xgb => "xgb",
            Family::Iforest => "iforest",
            Family::Kmeans => "kmeans",
            Family::Knn => "knn",
            Family::Svm => "svm",
            Family::Nb => "nb",
            Family::Pca => "pca",
            Family::Ae => "ae",
            Family::Bnn => "bnn",
        }
    }

    /// Whether the family predicts a label (pca and ae produce vectors).
    pub fn is_classifier(self) -> bool {
        !matches!(self, Family::Pca | Family::Ae)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestParams<L: tree::LeafPayload> {
    #[serde(bound(deserialize = "L: tree::LeafPayload"))]
    pub trees: Vec<Tree<L>>,
}

/// Gradient-boosted trees. Tree `t` adds to output group `t % groups`, where
/// `groups = base_score.len()`: one group for binary tasks (label 1 iff the
/// raw score is positive), `n_classes` groups otherwise (argmax).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XgbParams {
    pub base_score: Vec<f64>,
    pub trees: Vec<Tree<ScoreLeaf>>,
}

impl XgbParams {
    pub fn groups(&self) -> usize {
        self.base_score.len()
    }
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IForestParams {
    /// Sub-sample size each tree was grown on (`t`).
    pub n_samples: u64,
    /// Anomaly-score cut-off; 0.5 is the customary choice.
    #[serde(default = "half")]
    pub score_threshold: f64,
    pub trees: Vec<Tree<IsoLeaf>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KmeansParams {
    pub centroids: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnnPoint {
    pub x: Vec<u64>,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
    pub points: Vec<KnnPoint>,
}

/// One-vs-one separating hyperplane `w·x + b`; positive decision values vote
/// for `classes[0]`, negative for `classes[1]`, zero for the lower index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperplane {
    pub w: Vec<f64>,
    pub b: f64,
    pub classes: [Label; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmParams {
    pub hyperplanes: Vec<Hyperplane>,
}

/// Gaussian naive Bayes; `means` and `variances` are indexed `[class][feature]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NbParams {
    pub priors: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

/// `(x - means) · components`, components indexed `[feature][output]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcaParams {
    pub means: Vec<f64>,
    pub components: Vec<Vec<f64>>,
}

/// Single encoder layer `x · weights + bias`, weights indexed `[feature][output]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AeParams {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

/// A row of binary weights; `true` is +1. Index 0 pairs with the most
/// significant bit of the layer input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitRow(pub Vec<bool>);

impl BitRow {
    pub fn width(&self) -> usize {
        self.0.len()
    }

    /// Packs the row so that index 0 lands in bit `width - 1`.
    pub fn to_word(&self) -> u64 {
        self.0.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
    }

    pub fn from_word(word: u64, width: usize) -> Self {
        BitRow((0..width).map(|i| (word >> (width - 1 - i)) & 1 == 1).collect())
    }

    /// Binarizes real weights by sign, with zero mapped to +1.
    pub fn from_real(weights: &[f64]) -> Self {
        BitRow(weights.iter().map(|&w| w >= 0.0).collect())
    }
}

impl Serialize for BitRow {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let text: String = self.0.iter().map(|&b| if b { '1' } else { '0' }).collect();
        s.serialize_str(&text)
    }
}

impl<'de> Deserialize<'de> for BitRow {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.chars()
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                other => Err(serde::de::Error::custom(format!(
                    "bit rows contain only '0'/'1', found {other:?}"
                ))),
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(BitRow)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum BnnLayerDoc {
    Bits { rows: Vec<BitRow> },
    Real { weights: Vec<Vec<f64>> },
}

/// One binarized layer: a weight row per output node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "BnnLayerDoc", into = "BnnLayerDoc")]
pub struct BnnLayer {
    pub rows: Vec<BitRow>,
}

impl From<BnnLayerDoc> for BnnLayer {
    fn from(doc: BnnLayerDoc) -> Self {
        match doc {
            BnnLayerDoc::Bits { rows } => BnnLayer { rows },
            BnnLayerDoc::Real { weights } => BnnLayer {
                rows: weights.iter().map(|w| BitRow::from_real(w)).collect(),
            },
        }
    }
}

impl From<BnnLayer> for BnnLayerDoc {
    fn from(layer: BnnLayer) -> Self {
        BnnLayerDoc::Bits { rows: layer.rows }
    }
}

impl BnnLayer {
    pub fn input_width(&self) -> usize {
        self.rows.first().map_or(0, BitRow::width)
    }

    pub fn output_width(&self) -> usize {
        self.rows.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BnnParams {
    pub layers: Vec<BnnLayer>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Dt(Tree<ClassLeaf>),
    Rf(ForestParams<ClassLeaf>),
    Xgb(XgbParams),
    Iforest(IForestParams),
    Kmeans(KmeansParams),
    Knn(KnnParams),
    Svm(SvmParams),
    Nb(NbParams),
    Pca(PcaParams),
    Ae(AeParams),
    Bnn(BnnParams),
}

impl ModelParams {
    pub fn family(&self) -> Family {
        match self {
            ModelParams::Dt(_) => Family::Dt,
            ModelParams::Rf(_) => Family::Rf,
            ModelParams::Xgb(_) => Family::Xgb,
            ModelParams::Iforest(_) => Family::Iforest,
            ModelParams::Kmeans(_) => Family::Kmeans,
            ModelParams::Knn(_) => Family::Knn,
            ModelParams::Svm(_) => Family::Svm,
            ModelParams::Nb(_) => Family::Nb,
            ModelParams::Pca(_) => Family::Pca,
            ModelParams::Ae(_) => Family::Ae,
            ModelParams::Bnn(_) => Family::Bnn,
        }
    }
}

/// A validated trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub schema: FeatureSchema,
    /// Class count for classifiers, output dimension for pca/ae.
    pub n_outputs: usize,
    pub params: ModelParams,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    schema_version: u64,
    family: String,
    features: Vec<Feature>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_classes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    out_dim: Option<usize>,
    params: serde_json::Value,
}

fn json_error<E: fmt::Display>(err: serde_path_to_error::Error<E>) -> Error {
    let path = err.path().to_string();
    Error::Json {
        path,
        message: err.into_inner().to_string(),
    }
}

fn typed_params<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." { "params".to_string() } else { format!("params.{inner}") };
        Error::Json {
            path,
            message: e.into_inner().to_string(),
        }
    })
}

impl ModelSpec {
    pub fn new(schema: FeatureSchema, n_outputs: usize, params: ModelParams) -> Result<Self> {
        let spec = ModelSpec {
            schema,
            n_outputs,
            params,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn family(&self) -> Family {
        self.params.family()
    }

    /// Parses and validates a model document.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: Document = serde_path_to_error::deserialize(de).map_err(json_error)?;
        if doc.schema_version != SCHEMA_VERSION as u64 {
            return Err(Error::SchemaVersion {
                found: doc.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        let family: Family = doc.family.parse()?;
        let schema = FeatureSchema::new(doc.features)?;
        let (count, field) = if family.is_classifier() {
            (doc.n_classes, "n_classes")
        } else {
            (doc.out_dim, "out_dim")
        };
        let n_outputs = count.ok_or_else(|| {
            Error::invalid(field, format!("required for family `{family}`"))
        })?;
        let params = match family {
            Family::Dt => ModelParams::Dt(typed_params(doc.params)?),
            Family::Rf => ModelParams::Rf(typed_params(doc.params)?),
            Family::Xgb => ModelParams::Xgb(typed_params(doc.params)?),
            Family::Iforest => ModelParams::Iforest(typed_params(doc.params)?),
            Family::Kmeans => ModelParams::Kmeans(typed_params(doc.params)?),
            Family::Knn => ModelParams::Knn(typed_params(doc.params)?),
            Family::Svm => ModelParams::Svm(typed_params(doc.params)?),
            Family::Nb => ModelParams::Nb(typed_params(doc.params)?),
            Family::Pca => ModelParams::Pca(typed_params(doc.params)?),
            Family::Ae => ModelParams::Ae(typed_params(doc.params)?),
            Family::Bnn => ModelParams::Bnn(typed_params(doc.params)?),
        };
        ModelSpec::new(schema, n_outputs, params)
    }

    /// Canonical pretty-printed JSON form.
    pub fn to_json(&self) -> String {
        let params = match &self.params {
            ModelParams::Dt(p) => serde_json::to_value(p),
            ModelParams::Rf(p) => serde_json::to_value(p),
            ModelParams::Xgb(p) => serde_json::to_value(p),
            ModelParams::Iforest(p) => serde_json::to_value(p),
            ModelParams::Kmeans(p) => serde_json::to_value(p),
            ModelParams::Knn(p) => serde_json::to_value(p),
            ModelParams::Svm(p) => serde_json::to_value(p),
            ModelParams::Nb(p) => serde_json::to_value(p),
            ModelParams::Pca(p) => serde_json::to_value(p),
            ModelParams::Ae(p) => serde_json::to_value(p),
            ModelParams::Bnn(p) => serde_json::to_value(p),
        }
        .expect("model params serialize");
        let family = self.family();
        let doc = Document {
            schema_version: SCHEMA_VERSION as u64,
            family: family.as_str().to_string(),
            features: self.schema.features.clone(),
            n_classes: family.is_classifier().then_some(self.n_outputs),
            out_dim: (!family.is_classifier()).then_some(self.n_outputs),
            params,
        };
        serde_json::to_string_pretty(&doc).expect("model document serializes")
    }

    fn validate(&self) -> Result<()> {
        let n = self.schema.len();
        let k = self.n_outputs;
        if k == 0 {
            return Err(Error::invalid("n_classes", "must be at least 1"));
        }
        let label_check = |label: Label, path: &str| -> Result<()> {
            if (label as usize) >= k {
                Err(Error::invalid(
                    format!("{path}.label"),
                    format!("label {label} >= n_classes {k}"),
                ))
            } else {
                Ok(())
            }
        };
        match &self.params {
            ModelParams::Dt(tree) => tree.validate(&self.schema, "params", |l, p| label_check(l.label, p)),
            ModelParams::Rf(forest) => {
                non_empty(&forest.trees, "params.trees")?;
                for (i, t) in forest.trees.iter().enumerate() {
                    t.validate(&self.schema, &format!("params.trees[{i}]"), |l, p| label_check(l.label, p))?;
                }
                Ok(())
            }
            ModelParams::Xgb(p) => {
                non_empty(&p.trees, "params.trees")?;
                let groups = p.groups();
                let expected = if k <= 2 { 1 } else { k };
                if groups != expected {
                    return Err(Error::invalid(
                        "params.base_score",
                        format!("expected {expected} output group(s) for n_classes={k}, got {groups}"),
                    ));
                }
                finite_all(&p.base_score, "params.base_score")?;
                for (i, t) in p.trees.iter().enumerate() {
                    t.validate(&self.schema, &format!("params.trees[{i}]"), |l, path| {
                        finite(l.value, &format!("{path}.value"))
                    })?;
                }
                Ok(())
            }
            ModelParams::Iforest(p) => {
                non_empty(&p.trees, "params.trees")?;
                if k != 2 {
                    return Err(Error::invalid("n_classes", "isolation forests have 2 classes (normal, anomaly)"));
                }
                if p.n_samples < 2 {
                    return Err(Error::invalid("params.n_samples", "must be at least 2"));
                }
                if !(p.score_threshold > 0.0 && p.score_threshold < 1.0) {
                    return Err(Error::invalid("params.score_threshold", "must lie in (0, 1)"));
                }
                for (i, t) in p.trees.iter().enumerate() {
                    t.validate(&self.schema, &format!("params.trees[{i}]"), |_, _| Ok(()))?;
                }
                Ok(())
            }
            ModelParams::Kmeans(p) => {
                non_empty(&p.centroids, "params.centroids")?;
                if p.centroids.len() != k {
                    return Err(Error::invalid(
                        "params.centroids",
                        format!("expected {k} centroids (n_classes), got {}", p.centroids.len()),
                    ));
                }
                for (j, c) in p.centroids.iter().enumerate() {
                    vector_len(c, n, &format!("params.centroids[{j}]"))?;
                    finite_all(c, &format!("params.centroids[{j}]"))?;
                }
                Ok(())
            }
            ModelParams::Knn(p) => {
                non_empty(&p.points, "params.points")?;
                if p.k == 0 || p.k > p.points.len() {
                    return Err(Error::invalid(
                        "params.k",
                        format!("k must be in 1..={}", p.points.len()),
                    ));
                }
                for (i, pt) in p.points.iter().enumerate() {
                    let path = format!("params.points[{i}]");
                    vector_len(&pt.x, n, &format!("{path}.x"))?;
                    self.schema
                        .check(&FeatureVector(pt.x.clone()))
                        .map_err(|e| Error::invalid(format!("{path}.x"), e.to_string()))?;
                    label_check(pt.label, &path)?;
                }
                Ok(())
            }
            ModelParams::Svm(p) => {
                let m = k * (k - 1) / 2;
                if p.hyperplanes.len() != m {
                    return Err(Error::invalid(
                        "params.hyperplanes",
                        format!("expected m={m} hyperplanes for {k} classes, got {}", p.hyperplanes.len()),
                    ));
                }
                let mut pairs = HashSet::new();
                for (j, h) in p.hyperplanes.iter().enumerate() {
                    let path = format!("params.hyperplanes[{j}]");
                    vector_len(&h.w, n, &format!("{path}.w"))?;
                    finite_all(&h.w, &format!("{path}.w"))?;
                    finite(h.b, &format!("{path}.b"))?;
                    let [a, b] = h.classes;
                    if a == b || a as usize >= k || b as usize >= k {
                        return Err(Error::invalid(
                            format!("{path}.classes"),
                            format!("invalid class pair ({a}, {b})"),
                        ));
                    }
                    if !pairs.insert((a.min(b), a.max(b))) {
                        return Err(Error::invalid(
                            format!("{path}.classes"),
                            format!("class pair ({a}, {b}) repeated"),
                        ));
                    }
                }
                Ok(())
            }
            ModelParams::Nb(p) => {
                vector_len(&p.priors, k, "params.priors")?;
                finite_all(&p.priors, "params.priors")?;
                if p.priors.iter().any(|&q| q <= 0.0) {
                    return Err(Error::invalid("params.priors", "priors must be positive"));
                }
                let total: f64 = p.priors.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid("params.priors", format!("priors sum to {total}, expected 1")));
                }
                matrix_shape(&p.means, k, n, "params.means")?;
                matrix_shape(&p.variances, k, n, "params.variances")?;
                for (c, row) in p.variances.iter().enumerate() {
                    for (i, &v) in row.iter().enumerate() {
                        if !(v > 0.0) || !v.is_finite() {
                            return Err(Error::invalid(
                                format!("params.variances[{c}][{i}]"),
                                format!("variance must be positive and finite, got {v}"),
                            ));
                        }
                    }
                }
                Ok(())
            }
            ModelParams::Pca(p) => {
                vector_len(&p.means, n, "params.means")?;
                finite_all(&p.means, "params.means")?;
                matrix_shape(&p.components, n, k, "params.components")
            }
            ModelParams::Ae(p) => {
                matrix_shape(&p.weights, n, k, "params.weights")?;
                vector_len(&p.bias, k, "params.bias")?;
                finite_all(&p.bias, "params.bias")
            }
            ModelParams::Bnn(p) => {
                non_empty(&p.layers, "params.layers")?;
                let mut width = self.schema.total_bits() as usize;
                for (i, layer) in p.layers.iter().enumerate() {
                    let path = format!("params.layers[{i}]");
                    non_empty(&layer.rows, &format!("{path}.rows"))?;
                    for (j, row) in layer.rows.iter().enumerate() {
                        if row.width() != width {
                            return Err(Error::invalid(
                                format!("{path}.rows[{j}]"),
                                format!("row width {} does not match layer input width {width}", row.width()),
                            ));
                        }
                    }
                    width = layer.output_width();
                }
                if width != k {
                    return Err(Error::invalid(
                        "n_classes",
                        format!("final layer has {width} outputs but n_classes is {k}"),
                    ));
                }
                Ok(())
            }
        }
    }
}

fn non_empty<T>(items: &[T], path: &str) -> Result<()> {
    if items.is_empty() {
        Err(Error::invalid(path, "must not be empty"))
    } else {
        Ok(())
    }
}

fn vector_len<T>(v: &[T], len: usize, path: &str) -> Result<()> {
    if v.len() != len {
        Err(Error::invalid(path, format!("expected length {len}, got {}", v.len())))
    } else {
        Ok(())
    }
}

fn matrix_shape(m: &[Vec<f64>], rows: usize, cols: usize, path: &str) -> Result<()> {
    vector_len(m, rows, path)?;
    for (i, row) in m.iter().enumerate() {
        let p = format!("{path}[{i}]");
        vector_len(row, cols, &p)?;
        finite_all(row, &p)?;
    }
    Ok(())
}

fn finite(v: f64, path: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(path, format!("value {v} is not finite")))
    }
}

fn finite_all(v: &[f64], path: &str) -> Result<()> {
    for (i, &x) in v.iter().enumerate() {
        finite(x, &format!("{path}[{i}]"))?;
    }
    Ok(())
}
