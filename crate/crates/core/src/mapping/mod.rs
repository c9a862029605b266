//! Model-to-pipeline converters.
//!
//! Three strategies are available, not all for every family:
//!
//! | family  | eb | lb | dm |
//! |---------|----|----|----|
//! | dt, rf  | ✓  |    | ✓  |
//! | xgb, iforest, knn | ✓ | | |
//! | kmeans  | ✓  | ✓  |    |
//! | svm, nb, pca, ae | | ✓ | |
//! | bnn     |    |    | ✓  |

mod dm;
mod eb;
mod lb;
mod quadtree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ir::PipelineProgram;
use crate::model::{Family, ModelParams, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Encode-based: feature tables emit region codes, a decision table maps codes to labels.
    Eb,
    /// Lookup-based: feature tables emit quantized partial sums, logic combines them.
    Lb,
    /// Direct mapping: the model's control structure becomes chained tables or registers.
    Dm,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Eb => "eb",
            Variant::Lb => "lb",
            Variant::Dm => "dm",
        }
    }

    pub fn supported(family: Family) -> &'static [Variant] {
        use Variant::*;
        match family {
            Family::Dt | Family::Rf => &[Eb, Dm],
            Family::Xgb | Family::Iforest | Family::Knn => &[Eb],
            Family::Kmeans => &[Lb, Eb],
            Family::Svm | Family::Nb | Family::Pca | Family::Ae => &[Lb],
            Family::Bnn => &[Dm],
        }
    }

    /// The first supported variant.
    pub fn default_for(family: Family) -> Variant {
        Variant::supported(family)[0]
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "eb" => Ok(Variant::Eb),
            "lb" => Ok(Variant::Lb),
            "dm" => Ok(Variant::Dm),
            _ => Err(Error::invalid("variant", format!("unknown variant {s:?} (expected eb, lb or dm)"))),
        }
    }
}

/// Match kind used for feature and decision tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyStyle {
    Ternary,
    Lpm,
    /// One entry per key value; the uncompressed baseline.
    Exact,
}

/// How a random forest combines per-tree votes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoteMode {
    /// Exact-match table over reachable per-tree label tuples.
    Table,
    /// Vote-count logic in the final stage.
    Logic,
}

/// Which feature values get lookup-table entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Population {
    /// Full domain up to 16-bit features, observed values beyond.
    Auto,
    FullDomain,
    /// Observed values only, with the domain-median vector as default.
    Unique,
}

impl FromStr for Population {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Population::Auto),
            "full-domain" => Ok(Population::FullDomain),
            "unique" => Ok(Population::Unique),
            _ => Err(Error::invalid("mode", format!("unknown mode {s:?} (expected auto, full-domain or unique)"))),
        }
    }
}

/// Bits used for action data at full precision.
pub const FULL_PRECISION_BITS: u32 = 48;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvertConfig {
    /// Defaults to the family's first supported variant.
    pub variant: Option<Variant>,
    /// Key style of encode-based feature and decision tables.
    pub keys: KeyStyle,
    /// Absorb the most common outcome of each table into its default action.
    pub default_action: bool,
    pub vote: VoteMode,
    /// Action-data bits for lookup-based words; `None` is full precision.
    pub action_bits: Option<u32>,
    pub population: Population,
    /// Key style of lookup-based feature tables (run-compressed unless exact).
    pub lb_keys: KeyStyle,
    /// Quadtree depth limit; defaults to the feature bit width.
    pub max_depth: Option<u32>,
    /// Entry budget per table, also bounding offline tuple enumeration.
    pub max_entries: usize,
    /// Budget on code bits in a single key.
    pub max_key_bits: u32,
    /// Register word budget for binarized layers.
    pub max_word_bits: u32,
}

impl Default for ConvertConfig {
    fn default() -> Self {
        ConvertConfig {
            variant: None,
            keys: KeyStyle::Ternary,
            default_action: true,
            vote: VoteMode::Table,
            action_bits: Some(16),
            population: Population::Auto,
            lb_keys: KeyStyle::Exact,
            max_depth: None,
            max_entries: 1 << 20,
            max_key_bits: 256,
            max_word_bits: 64,
        }
    }
}

impl ConvertConfig {
    pub fn with_variant(mut self, v: Variant) -> Self {
        self.variant = Some(v);
        self
    }

    pub fn resolve_variant(&self, family: Family) -> Result<Variant> {
        let v = self.variant.unwrap_or_else(|| Variant::default_for(family));
        if Variant::supported(family).contains(&v) {
            Ok(v)
        } else {
            Err(Error::UnsupportedVariant {
                family: family.to_string(),
                variant: v.to_string(),
            })
        }
    }

    fn check_entries(&self, what: &str, n: u128) -> Result<()> {
        if n > self.max_entries as u128 {
            return Err(Error::Budget(format!(
                "{what} needs {n} entries, over the budget of {}",
                self.max_entries
            )));
        }
        Ok(())
    }
}

/// Converts `spec` with the configured (or default) variant.
pub fn convert(spec: &ModelSpec, cfg: &ConvertConfig) -> Result<PipelineProgram> {
    let variant = cfg.resolve_variant(spec.family())?;
    let mut program = match (&spec.params, variant) {
        (ModelParams::Dt(_), Variant::Eb) => eb::map_dt(spec, cfg)?,
        (ModelParams::Rf(_), Variant::Eb) => eb::map_rf(spec, cfg)?,
        (ModelParams::Xgb(_), Variant::Eb) => eb::map_xgb(spec, cfg)?,
        (ModelParams::Iforest(_), Variant::Eb) => eb::map_iforest(spec, cfg)?,
        (ModelParams::Kmeans(_) | ModelParams::Knn(_), Variant::Eb) => quadtree::map(spec, cfg)?,
        (ModelParams::Kmeans(_), Variant::Lb) => lb::map_kmeans(spec, cfg)?,
        (ModelParams::Svm(_), Variant::Lb) => lb::map_svm(spec, cfg)?,
        (ModelParams::Nb(_), Variant::Lb) => lb::map_nb(spec, cfg)?,
        (ModelParams::Pca(_), Variant::Lb) => lb::map_pca(spec, cfg)?,
        (ModelParams::Ae(_), Variant::Lb) => lb::map_ae(spec, cfg)?,
        (ModelParams::Dt(_), Variant::Dm) => dm::map_dt(spec)?,
        (ModelParams::Rf(_), Variant::Dm) => dm::map_rf(spec)?,
        (ModelParams::Bnn(_), Variant::Dm) => dm::map_bnn(spec, cfg)?,
        _ => unreachable!("variant support checked above"),
    };
    program.name = format!("{}_{}", spec.family(), variant);
    program.family = spec.family().to_string();
    program.variant = variant.to_string();
    Ok(program)
}

/// Declares one input field per feature, named `f{i}`.
fn declare_inputs(p: &mut PipelineProgram, spec: &ModelSpec) -> Vec<String> {
    (0..spec.schema.len())
        .map(|i| {
            let field = p.declare_input(format!("f{i}"), spec.schema.bit_width(i));
            let feature = &spec.schema.feature(i).name;
            if *feature != field {
                p.fields.last_mut().expect("just declared").feature = Some(feature.clone());
            }
            field
        })
        .collect()
}

/// Key with the largest total weight; ties go to the smallest key.
fn heaviest<K: Ord + Clone>(items: impl IntoIterator<Item = (K, usize)>) -> Option<K> {
    let mut totals = std::collections::BTreeMap::new();
    for (k, w) in items {
        *totals.entry(k).or_insert(0usize) += w;
    }
    let mut best: Option<(K, usize)> = None;
    for (k, w) in totals {
        if best.as_ref().is_none_or(|(_, bw)| w > *bw) {
            best = Some((k, w));
        }
    }
    best.map(|(k, _)| k)
}
