//! Named model-size profiles.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapping::ConvertConfig;
use crate::model::Family;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    S,
    M,
    L,
    /// Server-scale models; not meant for switch targets.
    H,
}

/// Hyperparameters a preset fixes. `None` means full precision or full depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PresetParams {
    pub action_bits: Option<u32>,
    pub tree_depth: u32,
    pub max_leaves: usize,
    pub n_trees: usize,
    pub iforest_trees: usize,
    pub iforest_samples: u64,
    pub quadtree_depth: Option<u32>,
    pub knn_neighbors: usize,
    pub nn_hidden: usize,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::S, Preset::M, Preset::L, Preset::H];

    pub fn params(self) -> PresetParams {
        let (action_bits, tree_depth, max_leaves, n_trees, iforest_trees, iforest_samples, quadtree_depth, nn_hidden) =
            match self {
                Preset::S => (Some(8), 4, 1000, 6, 3, 128, Some(2), 16),
                Preset::M => (Some(16), 5, 1000, 9, 9, 128, Some(3), 32),
                Preset::L => (Some(32), 6, 1000, 12, 12, 128, Some(4), 48),
                Preset::H => (None, 30, 100_000, 200, 200, 1280, None, 48),
            };
        PresetParams {
            action_bits,
            tree_depth,
            max_leaves,
            n_trees,
            iforest_trees,
            iforest_samples,
            quadtree_depth,
            knn_neighbors: 5,
            nn_hidden,
        }
    }

    /// Applies the conversion-time settings of this preset for `family`.
    /// Tree sizes are training-time settings and are left to the exporter.
    pub fn apply(self, family: Family, mut cfg: ConvertConfig) -> ConvertConfig {
        let p = self.params();
        match family {
            Family::Svm | Family::Nb | Family::Kmeans | Family::Pca | Family::Ae => cfg.action_bits = p.action_bits,
            _ => {}
        }
        if matches!(family, Family::Kmeans | Family::Knn) {
            cfg.max_depth = p.quadtree_depth;
        }
        cfg
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Preset::S => "S",
            Preset::M => "M",
            Preset::L => "L",
            Preset::H => "H",
        };
        f.write_str(s)
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S" => Ok(Preset::S),
            "M" => Ok(Preset::M),
            "L" => Ok(Preset::L),
            "H" => Ok(Preset::H),
            _ => Err(Error::Invalid {
                path: "preset".into(),
                message: format!("unknown preset {s:?} (expected S, M, L or H)"),
            }),
        }
    }
}
