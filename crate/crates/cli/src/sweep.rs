//! Resource and fidelity sweeps over one model axis.
//!
//! Every point regenerates its model from the same seed, so points that
//! differ only in conversion settings (bits, quadtree depth, observed values)
//! share one model. Depth sweeps over trees grow one model at the deepest
//! value and cut it back, so each point is a prefix of the next.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, ValueEnum};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use tablewright::ir::bits_for;
use tablewright::mapping::Population;
use tablewright::metrics;
use tablewright::model::{ClassLeaf, Feature, ForestParams, IForestParams, IsoLeaf, ModelParams, ScoreLeaf, XgbParams};
use tablewright::preset::Preset;
use tablewright::report::resource_report;
use tablewright::synth::{self, rng};
use tablewright::{Family, FeatureSchema, FeatureVector, ModelSpec, Simulator, Variant};

use crate::commands::mapping_config;
use crate::dataset::{self, LABEL_COLUMN};
use crate::{Invalid, MappingArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    #[value(name = "depth")]
    Depth,
    #[value(name = "n_trees", alias = "n-trees")]
    NTrees,
    #[value(name = "n_bits", alias = "n-bits")]
    NBits,
    #[value(name = "n_features", alias = "n-features")]
    NFeatures,
    #[value(name = "unique_values", alias = "unique-values")]
    UniqueValues,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.to_possible_value().expect("no skipped variants").get_name())
    }
}

/// One axis position; `Full` is only meaningful for `n_bits`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Value {
    N(u32),
    Full,
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::N(n) => write!(f, "{n}"),
            Value::Full => f.write_str("full"),
        }
    }
}

/// Parses `a..b` (inclusive) or a comma list such as `4,8,full`.
fn parse_values(s: &str) -> Result<Vec<Value>, Invalid> {
    let bad = || Invalid(format!("invalid --values {s:?} (expected `a..b` or a comma list)"));
    if let Some((a, b)) = s.split_once("..") {
        let a: u32 = a.trim().parse().map_err(|_| bad())?;
        let b: u32 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).map(Value::N).collect());
    }
    s.split(',')
        .map(|v| match v.trim() {
            "full" => Ok(Value::Full),
            n => n.parse().map(Value::N).map_err(|_| bad()),
        })
        .collect()
}

#[derive(Args)]
pub struct SweepArgs {
    /// Model family to generate.
    #[arg(long, value_parser = |s: &str| s.parse::<Family>().map_err(|e| e.to_string()))]
    family: Family,
    #[arg(long)]
    axis: Axis,
    /// Axis values: `a..b` inclusive, or a comma list (`full` allowed for n_bits).
    #[arg(long)]
    values: String,
    /// Dataset to evaluate on (and to fit nb, svm and kmeans to); random
    /// samples when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Random samples per point when no dataset is given.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Bit width of generated features.
    #[arg(long, default_value_t = 8)]
    width: u32,
    /// Number of generated features.
    #[arg(long, default_value_t = 2)]
    features: usize,
    /// Classes of generated classifiers.
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    mapping: MappingArgs,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Model generation parameters at one sweep point.
#[derive(Debug, Clone)]
struct Gen {
    widths: Vec<u32>,
    names: Option<Vec<String>>,
    depth: u32,
    n_trees: usize,
    classes: usize,
    iforest_samples: u64,
    knn_k: usize,
    nn_hidden: usize,
}

/// Evaluation rows, plus labels when they came from a dataset.
struct Data {
    widths: Vec<u32>,
    names: Vec<String>,
    x: Vec<Vec<u64>>,
    labels: Option<Vec<u64>>,
}

impl Data {
    fn load(path: &std::path::Path) -> Result<Self> {
        let raw = dataset::read_raw(path)?;
        let label_col = raw.header.iter().position(|h| h == LABEL_COLUMN);
        let cols: Vec<usize> = (0..raw.header.len()).filter(|&i| Some(i) != label_col).collect();
        let x: Vec<Vec<u64>> = raw.rows.iter().map(|r| cols.iter().map(|&i| r[i]).collect()).collect();
        if x.is_empty() {
            return Err(Invalid(format!("{}: no rows", path.display())).into());
        }
        let widths = (0..cols.len())
            .map(|j| bits_for(x.iter().map(|r| r[j]).max().unwrap_or(0)).max(1))
            .collect();
        Ok(Data {
            widths,
            names: cols.iter().map(|&i| raw.header[i].clone()).collect(),
            labels: label_col.map(|i| raw.rows.iter().map(|r| r[i]).collect()),
            x,
        })
    }

    fn first_features(&self, n: usize) -> Data {
        Data {
            widths: self.widths[..n].to_vec(),
            names: self.names[..n].to_vec(),
            x: self.x.iter().map(|r| r[..n].to_vec()).collect(),
            labels: self.labels.clone(),
        }
    }
}

fn schema(widths: &[u32], names: &Option<Vec<String>>) -> Result<FeatureSchema> {
    let features = match names {
        Some(n) => n
            .iter()
            .zip(widths)
            .map(|(name, &w)| Feature::new(name.clone(), w))
            .collect(),
        None => widths
            .iter()
            .enumerate()
            .map(|(i, &w)| Feature::new(format!("f{i}"), w))
            .collect(),
    };
    Ok(FeatureSchema::new(features)?)
}

fn generate(family: Family, g: &Gen, data: Option<&Data>, r: &mut ChaCha8Rng) -> Result<ModelSpec> {
    let w = &g.widths;
    let fitted = |data: &Data| synth::Dataset {
        schema: schema(w, &g.names).expect("widths validated"),
        x: data.x.clone(),
        y: data.labels.clone().unwrap_or_default(),
    };
    let spec = match (family, data) {
        (Family::Nb | Family::Svm, Some(d)) if d.labels.is_none() => {
            return Err(Invalid(format!("fitting {family} needs a `{LABEL_COLUMN}` column")).into())
        }
        (Family::Nb, Some(d)) => synth::fit_nb(&fitted(d)),
        (Family::Svm, Some(d)) => synth::fit_svm(r, &fitted(d), 10),
        (Family::Kmeans, Some(d)) => synth::fit_kmeans(r, &fitted(d), g.classes.min(d.x.len()), 20),
        (Family::Dt, _) => synth::random_dt(r, w, g.depth, g.classes),
        (Family::Rf, _) => synth::random_rf(r, w, g.depth, g.n_trees, g.classes),
        (Family::Xgb, _) => synth::random_xgb(r, w, g.depth, g.n_trees, g.classes),
        (Family::Iforest, _) => synth::random_iforest(r, w, g.depth, g.n_trees, g.iforest_samples),
        (Family::Kmeans, None) => synth::random_kmeans(r, w, g.classes),
        (Family::Knn, _) => synth::random_knn(r, w, 20 * g.classes, g.knn_k, g.classes),
        (Family::Svm, None) => synth::random_svm(r, w, g.classes),
        (Family::Nb, None) => synth::random_nb(r, w, g.classes),
        (Family::Pca, _) => synth::random_pca(r, w, 2.min(w.len())),
        (Family::Ae, _) => synth::random_ae(r, w, 2.min(w.len())),
        (Family::Bnn, _) => synth::random_bnn(r, w, &[g.nn_hidden], g.classes),
    };
    // carry dataset column names so programs accept the dataset's header
    let schema = schema(w, &g.names)?;
    Ok(ModelSpec::new(schema, spec.n_outputs, spec.params)?)
}

struct Row {
    tables: usize,
    entries: usize,
    stages: usize,
    relative_accuracy: Option<f64>,
    pearson: Option<f64>,
}

fn max_value(values: &str) -> Result<u32> {
    Ok(parse_values(values)?
        .into_iter()
        .filter_map(|v| match v {
            Value::N(n) => Some(n),
            Value::Full => None,
        })
        .max()
        .unwrap_or(0))
}

fn majority(leaves: &[&ClassLeaf]) -> ClassLeaf {
    let mut counts = BTreeMap::new();
    for l in leaves {
        *counts.entry(l.label).or_insert(0usize) += 1;
    }
    let top = counts.values().copied().max().unwrap_or(0);
    ClassLeaf {
        label: counts.into_iter().find(|&(_, c)| c == top).map_or(0, |(l, _)| l),
    }
}

/// Every tree cut at `depth`: class leaves merge by majority (ties low),
/// score leaves by mean, isolation leaves by total size.
fn truncated(spec: &ModelSpec, depth: u32) -> Result<ModelSpec> {
    let params = match &spec.params {
        ModelParams::Dt(t) => ModelParams::Dt(t.truncate(depth, &majority)),
        ModelParams::Rf(f) => ModelParams::Rf(ForestParams {
            trees: f.trees.iter().map(|t| t.truncate(depth, &majority)).collect(),
        }),
        ModelParams::Xgb(x) => ModelParams::Xgb(XgbParams {
            base_score: x.base_score.clone(),
            trees: x
                .trees
                .iter()
                .map(|t| {
                    t.truncate(depth, &|ls: &[&ScoreLeaf]| ScoreLeaf {
                        value: ls.iter().map(|l| l.value).sum::<f64>() / ls.len() as f64,
                    })
                })
                .collect(),
        }),
        ModelParams::Iforest(p) => ModelParams::Iforest(IForestParams {
            trees: p
                .trees
                .iter()
                .map(|t| {
                    t.truncate(depth, &|ls: &[&IsoLeaf]| IsoLeaf {
                        size: ls.iter().map(|l| l.size).sum(),
                    })
                })
                .collect(),
            ..p.clone()
        }),
        other => other.clone(),
    };
    Ok(ModelSpec::new(spec.schema.clone(), spec.n_outputs, params)?)
}

fn check_axis(args: &SweepArgs, variant: Variant) -> Result<()> {
    let f = args.family;
    let ok = match args.axis {
        Axis::Depth => {
            matches!(f, Family::Dt | Family::Rf | Family::Xgb | Family::Iforest)
                || (matches!(f, Family::Kmeans | Family::Knn) && variant == Variant::Eb)
        }
        Axis::NTrees => matches!(f, Family::Rf | Family::Xgb | Family::Iforest),
        Axis::NBits | Axis::UniqueValues => variant == Variant::Lb,
        Axis::NFeatures => true,
    };
    if ok {
        Ok(())
    } else {
        Err(Invalid(format!(
            "axis {} is not valid for {f} with variant {variant}",
            args.axis
        ))
        .into())
    }
}

fn point(args: &SweepArgs, base: &Gen, data: Option<&Data>, value: Value) -> Result<Row> {
    let family = args.family;
    let mut cfg = mapping_config(&args.mapping, family);
    let mut g = base.clone();
    let n = match value {
        Value::N(n) => n,
        Value::Full if args.axis == Axis::NBits => 0,
        Value::Full => {
            return Err(Invalid(format!("`full` is only valid on the n_bits axis, not {}", args.axis)).into())
        }
    };
    let mut observed = None;
    let narrowed;
    let mut data = data;
    match args.axis {
        Axis::Depth if matches!(family, Family::Kmeans | Family::Knn) => cfg.max_depth = Some(n),
        // nested models: grow to the deepest point, then cut back
        Axis::Depth => g.depth = max_value(&args.values)?,
        Axis::NTrees => g.n_trees = n as usize,
        Axis::NBits => cfg.action_bits = (value != Value::Full).then_some(n),
        Axis::NFeatures => match data {
            Some(d) if n as usize > d.widths.len() || n == 0 => {
                return Err(Invalid(format!("dataset has {} features, cannot use {n}", d.widths.len())).into())
            }
            Some(d) => {
                narrowed = d.first_features(n as usize);
                g.widths = narrowed.widths.clone();
                g.names = Some(narrowed.names.clone());
                data = Some(&narrowed);
            }
            None => g.widths = vec![args.width; n as usize],
        },
        Axis::UniqueValues => {
            cfg.population = Population::Unique;
            observed = Some(n as usize);
        }
    }
    let mut spec = generate(family, &g, data, &mut rng(args.seed))?;
    if args.axis == Axis::Depth && !matches!(family, Family::Kmeans | Family::Knn) {
        spec = truncated(&spec, n)?;
    }
    let mut sampler = rng(args.seed.wrapping_add(1));
    if let Some(v) = observed {
        let mut features = spec.schema.features().to_vec();
        for (i, f) in features.iter_mut().enumerate() {
            let pool: Vec<u64> = match data {
                Some(d) => d.x.iter().map(|r| r[i]).collect::<BTreeSet<_>>().into_iter().collect(),
                None => (0..=spec.schema.max_value(i)).collect(),
            };
            let mut picked: Vec<u64> = pool.choose_multiple(&mut sampler, v.min(pool.len())).copied().collect();
            picked.sort_unstable();
            f.observed = Some(picked);
        }
        spec.schema = FeatureSchema::new(features)?;
    }
    let xs: Vec<Vec<u64>> = match data {
        Some(d) => d.x.clone(),
        None => (0..args.samples)
            .map(|_| {
                (0..spec.schema.len())
                    .map(|i| sampler.gen_range(0..=spec.schema.max_value(i)))
                    .collect()
            })
            .collect(),
    };

    let program = tablewright::convert(&spec, &cfg)?;
    let report = resource_report(&program)?;
    let sim = Simulator::new(&program)?;
    let mut row = Row {
        tables: report.tables.len(),
        entries: report.total_entries,
        stages: report.stages,
        relative_accuracy: None,
        pearson: None,
    };
    if family.is_classifier() {
        let pred: Vec<u64> = xs.iter().map(|x| sim.predict(x)).collect::<tablewright::Result<_>>()?;
        let reference = xs
            .iter()
            .map(|x| Ok(spec.reference_predict(&FeatureVector(x.clone()))? as u64))
            .collect::<Result<Vec<u64>>>()?;
        row.relative_accuracy = match data.and_then(|d| d.labels.as_ref()) {
            Some(truth) => metrics::relative_accuracy(&pred, &reference, truth),
            None => Some(metrics::agreement(&pred, &reference)),
        };
    } else {
        let mut got = vec![Vec::with_capacity(xs.len()); spec.n_outputs];
        let mut want = vec![Vec::with_capacity(xs.len()); spec.n_outputs];
        for x in &xs {
            let g = sim.run(x)?.values();
            let w = spec.reference_transform(&FeatureVector(x.clone()))?;
            for j in 0..spec.n_outputs {
                got[j].push(g[j]);
                want[j].push(w[j]);
            }
        }
        // weakest output dimension
        row.pearson = (0..spec.n_outputs)
            .map(|j| metrics::pearson(&got[j], &want[j]))
            .collect::<Option<Vec<f64>>>()
            .and_then(|rs| rs.into_iter().reduce(f64::min));
    }
    Ok(row)
}

pub fn run(args: &SweepArgs) -> Result<()> {
    let values = parse_values(&args.values)?;
    let variant = tablewright::ConvertConfig {
        variant: args.mapping.variant,
        ..Default::default()
    }
    .resolve_variant(args.family)?;
    check_axis(args, variant)?;
    let data = args.data.as_deref().map(Data::load).transpose()?;
    let preset = args.mapping.preset.unwrap_or(Preset::S).params();
    let base = Gen {
        widths: data
            .as_ref()
            .map_or_else(|| vec![args.width; args.features], |d| d.widths.clone()),
        names: data.as_ref().map(|d| d.names.clone()),
        depth: match args.family {
            Family::Iforest => bits_for(preset.iforest_samples.saturating_sub(1)),
            _ => preset.tree_depth,
        },
        n_trees: match args.family {
            Family::Iforest => preset.iforest_trees,
            _ => preset.n_trees,
        },
        classes: args.classes,
        iforest_samples: preset.iforest_samples,
        knn_k: preset.knn_neighbors,
        nn_hidden: preset.nn_hidden,
    };
    log::info!("sweeping {} over {} points", args.axis, values.len());
    let rows: Vec<Row> = values
        .par_iter()
        .map(|&v| point(args, &base, data.as_ref(), v).map_err(|e| e.context(format!("{} = {v}", args.axis))))
        .collect::<Result<_>>()?;

    let header: Vec<String> = [
        "family",
        "variant",
        "axis",
        "value",
        "tables",
        "entries",
        "stages",
        "relative_accuracy",
        "pearson",
    ]
    .map(String::from)
    .to_vec();
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6}"));
    let lines = values.iter().zip(&rows).map(|(v, r)| {
        vec![
            args.family.to_string(),
            variant.to_string(),
            args.axis.to_string(),
            v.to_string(),
            r.tables.to_string(),
            r.entries.to_string(),
            r.stages.to_string(),
            opt(r.relative_accuracy),
            opt(r.pearson),
        ]
    });
    dataset::write_rows(dataset::output(args.out.as_deref())?, &header, lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_lists() {
        assert_eq!(
            parse_values("2..4").unwrap(),
            vec![Value::N(2), Value::N(3), Value::N(4)]
        );
        assert_eq!(parse_values("2..=3").unwrap(), vec![Value::N(2), Value::N(3)]);
        assert_eq!(parse_values("8, full").unwrap(), vec![Value::N(8), Value::Full]);
        assert!(parse_values("5..2").is_err());
        assert!(parse_values("x").is_err());
    }
}
