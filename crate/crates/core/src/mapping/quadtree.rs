//! Quadtree encoding for k-means and KNN.
//!
//! The feature space is split recursively into 2^n equal cells, most
//! significant bit first. A cell becomes one ternary entry as soon as the
//! model labels all of its 2^n corner vertices alike; at the depth limit the
//! cell takes the label of its center point.

use std::collections::HashMap;

use super::{declare_inputs, ConvertConfig};
use crate::error::{Error, Result};
use crate::ir::{bits_for, width_mask, Action, ActionCall, MatchKind, PipelineProgram, ProgramOutput, Table, TableEntry, TableKey};
use crate::model::{FeatureVector, Label, ModelSpec};
use crate::table::MatchKey;

pub(super) fn map(spec: &ModelSpec, cfg: &ConvertConfig) -> Result<PipelineProgram> {
    let n = spec.schema.len();
    let width = spec.schema.bit_width(0);
    if (1..n).any(|i| spec.schema.bit_width(i) != width) {
        return Err(Error::invalid("features", "quadtree encoding needs equal feature bit widths"));
    }
    if n > 16 {
        return Err(Error::invalid("features", format!("quadtree encoding supports at most 16 features, got {n}")));
    }
    let depth = cfg.max_depth.unwrap_or(width).min(width);
    if depth * n as u32 > cfg.max_key_bits {
        return Err(Error::Budget(format!(
            "quadtree depth {depth} over {n} features needs {} code bits, over the key budget of {}",
            depth * n as u32,
            cfg.max_key_bits
        )));
    }

    let mut p = PipelineProgram::new("quadtree", spec.family().as_str(), "eb");
    let inputs = declare_inputs(&mut p, spec);
    let label = p.declare("label", bits_for(spec.n_outputs.saturating_sub(1) as u64));
    let mut table = Table::new(
        "quadtree",
        inputs
            .iter()
            .map(|f| TableKey { field: f.clone(), kind: MatchKind::Ternary })
            .collect(),
        vec![Action { name: "set_label".into(), params: vec![label.clone()] }],
    );

    let mut cache: HashMap<Vec<u64>, Label> = HashMap::new();
    let mut label_at = |point: Vec<u64>| -> Result<Label> {
        if let Some(&l) = cache.get(&point) {
            return Ok(l);
        }
        let l = spec.reference_predict(&FeatureVector(point.clone()))?;
        cache.insert(point, l);
        Ok(l)
    };

    // (depth, per-feature prefix) in depth-first order, lowest child first
    let mut stack: Vec<(u32, Vec<u64>)> = vec![(0, vec![0; n])];
    while let Some((d, prefix)) = stack.pop() {
        let span = width - d;
        let lo: Vec<u64> = prefix.iter().map(|&p| p << span).collect();
        let hi: Vec<u64> = lo.iter().map(|&l| l | width_mask(span)).collect();
        let mut uniform = None;
        let mut agree = true;
        for corner in 0..1u32 << n {
            let point = (0..n).map(|i| if corner >> i & 1 == 1 { hi[i] } else { lo[i] }).collect();
            let l = label_at(point)?;
            match uniform {
                None => uniform = Some(l),
                Some(u) if u != l => {
                    agree = false;
                    break;
                }
                Some(_) => {}
            }
        }
        let emit = if agree {
            uniform
        } else if d == depth {
            Some(label_at(lo.iter().zip(&hi).map(|(&l, &h)| l + (h - l) / 2).collect())?)
        } else {
            None
        };
        match emit {
            Some(l) => {
                let mask = width_mask(width) & !width_mask(span);
                let keys = lo.iter().map(|&v| MatchKey::ternary(v, mask)).collect();
                table.entries.push(TableEntry::new(keys, ActionCall { action_id: 0, action_data: vec![l as u64] }));
                cfg.check_entries("quadtree table", table.entries.len() as u128)?;
            }
            None => {
                for child in (0..1u64 << n).rev() {
                    let next = (0..n).map(|i| prefix[i] << 1 | (child >> (n - 1 - i)) & 1).collect();
                    stack.push((d + 1, next));
                }
            }
        }
    }
    table.number_priorities();
    p.tables.push(table);
    p.output = ProgramOutput::Label { field: label };
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::Simulator;
    use crate::mapping::Variant;
    use crate::model::{FeatureSchema, KmeansParams, KnnParams, KnnPoint, ModelParams};

    fn kmeans(widths: &[u32], centroids: Vec<Vec<f64>>) -> ModelSpec {
        let k = centroids.len();
        ModelSpec::new(FeatureSchema::with_widths(widths).unwrap(), k, ModelParams::Kmeans(KmeansParams { centroids })).unwrap()
    }

    fn cfg(depth: Option<u32>) -> ConvertConfig {
        ConvertConfig { max_depth: depth, ..ConvertConfig::default().with_variant(Variant::Eb) }
    }

    #[test]
    fn single_centroid_is_one_wildcard_entry() {
        let p = map(&kmeans(&[4, 4], vec![vec![3.0, 9.0]]), &cfg(None)).unwrap();
        assert_eq!(p.tables[0].entries.len(), 1);
        assert!(p.tables[0].entries[0].keys.iter().all(|k| k.specificity(4) == 0));
    }

    #[test]
    fn cell_codes_use_d_bits_per_feature() {
        let spec = kmeans(&[6, 6], vec![vec![5.0, 7.0], vec![40.0, 12.0], vec![20.0, 50.0]]);
        let p = map(&spec, &cfg(Some(3))).unwrap();
        let widest = p.tables[0]
            .entries
            .iter()
            .map(|e| e.keys.iter().map(|k| k.specificity(6)).sum::<u32>())
            .max()
            .unwrap();
        assert_eq!(widest, 6);
    }

    /// Cells are disjoint and cover the domain.
    #[test]
    fn cells_partition_the_domain() {
        let spec = kmeans(&[5, 5], vec![vec![3.0, 3.0], vec![25.0, 9.0], vec![14.0, 28.0]]);
        for depth in [1, 2, 3, 5] {
            let p = map(&spec, &cfg(Some(depth))).unwrap();
            for a in 0..32 {
                for b in 0..32 {
                    let hits = p.tables[0]
                        .entries
                        .iter()
                        .filter(|e| e.keys[0].matches(a, 5) && e.keys[1].matches(b, 5))
                        .count();
                    assert_eq!(hits, 1, "depth {depth} ({a},{b})");
                }
            }
        }
    }

    #[test]
    fn full_depth_kmeans_is_exact() {
        let spec = kmeans(&[6, 6], vec![vec![5.5, 7.0], vec![40.0, 12.25], vec![20.0, 50.0]]);
        let sim = Simulator::new(&map(&spec, &cfg(None)).unwrap()).unwrap();
        for a in 0..64 {
            for b in 0..64 {
                let want = spec.reference_predict(&vec![a, b].into()).unwrap() as u64;
                assert_eq!(sim.predict(&[a, b]).unwrap(), want);
            }
        }
    }

    #[test]
    fn single_knn_point_is_constant() {
        let spec = ModelSpec::new(
            FeatureSchema::with_widths(&[4, 4]).unwrap(),
            2,
            ModelParams::Knn(KnnParams { k: 1, points: vec![KnnPoint { x: vec![3, 3], label: 1 }] }),
        )
        .unwrap();
        let p = map(&spec, &cfg(None)).unwrap();
        assert_eq!(p.tables[0].entries.len(), 1);
        assert_eq!(p.tables[0].entries[0].action_data, vec![1]);
    }

    #[test]
    fn mixed_widths_rejected_and_budget() {
        assert!(map(&kmeans(&[4, 5], vec![vec![0.0, 0.0]]), &cfg(None)).is_err());
        let tight = ConvertConfig { max_key_bits: 5, ..cfg(Some(3)) };
        assert!(map(&kmeans(&[4, 4], vec![vec![0.0, 0.0]]), &tight).unwrap_err().is_budget());
    }
}
