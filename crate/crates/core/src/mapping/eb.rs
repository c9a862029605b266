//! Encode-based tree converters.
//!
//! Every feature gets one table that maps each value to the index of the
//! threshold interval it falls in, per tree ("codes", numbered by ascending
//! interval lower bound). Tree tables then match boxes of code space. For
//! ensembles the per-tree outcomes are combined by an exact-match table over
//! reachable outcome tuples, computed offline.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{declare_inputs, heaviest, ConvertConfig, KeyStyle, VoteMode};
use crate::error::{Error, Result};
use crate::ir::{bits_for, width_mask, Action, ActionCall, LogicOp, MatchKind, PipelineProgram, ProgramOutput, Table, TableEntry, TableKey};
use crate::model::tree::LeafPayload;
use crate::model::{iforest_decide, iforest_mean, iforest_path_length, majority, xgb_decide, Label, ModelParams, ModelSpec, Region, Tree};
use crate::table::{range_to_prefixes, MatchKey};

/// Per-tree code layout.
struct TreeCodes {
    /// Sorted thresholds per feature, restricted to those that cut the domain.
    thresholds: Vec<Vec<u64>>,
    fields: Vec<Option<(String, u32)>>,
}

impl TreeCodes {
    fn new<L: LeafPayload>(p: &mut PipelineProgram, tree: &Tree<L>, spec: &ModelSpec, prefix: &str) -> Self {
        let n = spec.schema.len();
        let mut sets = vec![BTreeSet::new(); n];
        for s in tree.splits() {
            if s.threshold < spec.schema.max_value(s.feature) {
                sets[s.feature].insert(s.threshold);
            }
        }
        let thresholds: Vec<Vec<u64>> = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        let fields = thresholds
            .iter()
            .enumerate()
            .map(|(i, t)| {
                (!t.is_empty()).then(|| {
                    let w = bits_for(t.len() as u64);
                    (p.declare(format!("{prefix}code_f{i}"), w), w)
                })
            })
            .collect();
        TreeCodes { thresholds, fields }
    }

    fn code(&self, feature: usize, v: u64) -> u64 {
        self.thresholds[feature].partition_point(|&t| t < v) as u64
    }

    fn max_code(&self, feature: usize) -> u64 {
        self.thresholds[feature].len() as u64
    }

    fn key_bits(&self) -> u32 {
        self.fields.iter().flatten().map(|f| f.1).sum()
    }
}

fn product(lists: &[Vec<MatchKey>]) -> Vec<Vec<MatchKey>> {
    let mut out = vec![Vec::new()];
    for list in lists {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                list.iter().map(move |k| {
                    let mut v = prefix.clone();
                    v.push(*k);
                    v
                })
            })
            .collect();
    }
    out
}

fn keys_for_range(lo: u64, hi: u64, width: u32, style: KeyStyle) -> Result<Vec<MatchKey>> {
    Ok(match style {
        KeyStyle::Exact => (lo..=hi).map(MatchKey::exact).collect(),
        KeyStyle::Ternary | KeyStyle::Lpm => {
            let kind = if style == KeyStyle::Lpm { MatchKind::Lpm } else { MatchKind::Ternary };
            range_to_prefixes(lo, hi, width)?
                .into_iter()
                .map(|p| MatchKey::from_prefix(kind, p, width))
                .collect()
        }
    })
}

fn key_kind(style: KeyStyle) -> MatchKind {
    match style {
        KeyStyle::Exact => MatchKind::Exact,
        KeyStyle::Ternary => MatchKind::Ternary,
        KeyStyle::Lpm => MatchKind::Lpm,
    }
}

/// One table per feature writing the codes of every tree that splits on it.
fn feature_tables(p: &mut PipelineProgram, spec: &ModelSpec, trees: &[TreeCodes], cfg: &ConvertConfig) -> Result<()> {
    for i in 0..spec.schema.len() {
        let users: Vec<(&TreeCodes, &str)> = trees
            .iter()
            .filter_map(|t| t.fields[i].as_ref().map(|f| (t, f.0.as_str())))
            .collect();
        if users.is_empty() {
            continue;
        }
        let width = spec.schema.bit_width(i);
        if cfg.keys == KeyStyle::Exact {
            cfg.check_entries(&format!("exact feature table f{i}"), 1u128 << width)?;
        }
        let cuts: BTreeSet<u64> = users.iter().flat_map(|(t, _)| t.thresholds[i].iter().copied()).collect();
        let mut intervals = Vec::new();
        let mut lo = 0;
        for &c in &cuts {
            intervals.push((lo, c));
            lo = c + 1;
        }
        intervals.push((lo, spec.schema.max_value(i)));

        let mut table = Table::new(
            format!("feature_f{i}"),
            vec![TableKey { field: format!("f{i}"), kind: key_kind(cfg.keys) }],
            vec![Action {
                name: format!("set_codes_f{i}"),
                params: users.iter().map(|(_, f)| f.to_string()).collect(),
            }],
        );
        let keyed: Vec<(Vec<MatchKey>, ActionCall)> = intervals
            .iter()
            .map(|&(lo, hi)| {
                let data = users.iter().map(|(t, _)| t.code(i, lo)).collect();
                Ok((keys_for_range(lo, hi, width, cfg.keys)?, ActionCall { action_id: 0, action_data: data }))
            })
            .collect::<Result<_>>()?;
        // the interval costing the most entries becomes the default, the later one on ties
        let default = (cfg.default_action && cfg.keys != KeyStyle::Exact)
            .then(|| (0..keyed.len()).max_by_key(|&j| keyed[j].0.len()))
            .flatten();
        for (j, (keys, call)) in keyed.into_iter().enumerate() {
            if Some(j) == default {
                table.default_action = Some(call);
                continue;
            }
            for k in keys {
                table.entries.push(TableEntry::new(vec![k], call.clone()));
            }
        }
        if table.is_ternary() {
            table.number_priorities();
        }
        p.tables.push(table);
    }
    Ok(())
}

/// A table matching boxes of one tree's code space, writing `value` of the
/// box to `dst`.
fn region_table(
    name: String,
    codes: &TreeCodes,
    boxes: &[(Region, u64)],
    dst: &str,
    cfg: &ConvertConfig,
) -> Result<Table> {
    if codes.key_bits() > cfg.max_key_bits {
        return Err(Error::Budget(format!(
            "table {name} needs {} code bits, over the key budget of {}",
            codes.key_bits(),
            cfg.max_key_bits
        )));
    }
    let used: Vec<(usize, &str, u32)> = codes
        .fields
        .iter()
        .enumerate()
        .filter_map(|(i, f)| f.as_ref().map(|(name, w)| (i, name.as_str(), *w)))
        .collect();
    let style = if cfg.keys == KeyStyle::Exact { KeyStyle::Exact } else { KeyStyle::Ternary };
    let mut table = Table::new(
        name.clone(),
        used.iter()
            .map(|&(_, f, _)| TableKey { field: f.to_string(), kind: key_kind(style) })
            .collect(),
        vec![Action { name: format!("set_{dst}"), params: vec![dst.to_string()] }],
    );
    let call = |v: u64| ActionCall { action_id: 0, action_data: vec![v] };
    if used.is_empty() {
        table.default_action = Some(call(boxes[0].1));
        return Ok(table);
    }
    let mut rows: Vec<(Vec<Vec<MatchKey>>, u64)> = Vec::with_capacity(boxes.len());
    let mut total: u128 = 0;
    for (region, value) in boxes {
        let mut lists = Vec::with_capacity(used.len());
        for &(i, _, w) in &used {
            let (lo, hi) = region.bounds[i];
            let (c_lo, mut c_hi) = (codes.code(i, lo), codes.code(i, hi));
            if style == KeyStyle::Ternary && c_hi == codes.max_code(i) {
                // codes above the last one never occur, so let the range absorb them
                c_hi = width_mask(w);
            }
            lists.push(keys_for_range(c_lo, c_hi, w, style)?);
        }
        let count: u128 = lists.iter().map(|l| l.len() as u128).product();
        total += count;
        cfg.check_entries(&format!("table {name}"), total)?;
        rows.push((lists, *value));
    }
    let default = if cfg.default_action && style != KeyStyle::Exact {
        heaviest(rows.iter().map(|(lists, v)| (*v, lists.iter().map(Vec::len).product())))
    } else {
        None
    };
    for (lists, value) in rows {
        if Some(value) == default {
            continue;
        }
        for keys in product(&lists) {
            table.entries.push(TableEntry::new(keys, call(value)));
        }
    }
    table.default_action = default.map(call);
    if table.is_ternary() {
        table.number_priorities();
    }
    Ok(table)
}

/// Every combination of per-tree leaves whose regions intersect, as node
/// indices. `None` once more than `cap` partial combinations are live.
fn reachable_leaves<L: LeafPayload>(trees: &[&Tree<L>], domain: &Region, cap: usize) -> Option<Vec<Vec<usize>>> {
    let mut states: Vec<(Region, Vec<usize>)> = vec![(domain.clone(), Vec::new())];
    for tree in trees {
        let mut next = Vec::new();
        for (region, nodes) in &states {
            for leaf in tree.leaf_regions(region) {
                let mut n = nodes.clone();
                n.push(leaf.node);
                next.push((leaf.region, n));
                if next.len() > cap {
                    return None;
                }
            }
        }
        states = next;
    }
    Some(states.into_iter().map(|(_, n)| n).collect())
}

/// Exact-match table over outcome tuples of `srcs`, with the most common
/// result as default.
fn tuple_table(name: &str, srcs: &[String], rows: BTreeMap<Vec<u64>, u64>, dst: &str, cfg: &ConvertConfig) -> Result<Table> {
    let mut table = Table::new(
        name,
        srcs.iter()
            .map(|f| TableKey { field: f.clone(), kind: MatchKind::Exact })
            .collect(),
        vec![Action { name: format!("set_{dst}"), params: vec![dst.to_string()] }],
    );
    let call = |v: u64| ActionCall { action_id: 0, action_data: vec![v] };
    let default = if cfg.default_action {
        heaviest(rows.values().map(|&v| (v, 1)))
    } else {
        None
    };
    for (tuple, value) in rows {
        if Some(value) != default {
            table.entries.push(TableEntry::new(tuple.into_iter().map(MatchKey::exact).collect(), call(value)));
        }
    }
    cfg.check_entries(&format!("table {name}"), table.entries.len() as u128)?;
    table.default_action = default.map(call);
    Ok(table)
}

fn label_width(spec: &ModelSpec) -> u32 {
    bits_for(spec.n_outputs.saturating_sub(1) as u64)
}

pub(super) fn map_dt(spec: &ModelSpec, cfg: &ConvertConfig) -> Result<PipelineProgram> {
    let ModelParams::Dt(tree) = &spec.params else { unreachable!() };
    let mut p = PipelineProgram::new("dt_eb", "dt", "eb");
    declare_inputs(&mut p, spec);
    let codes = TreeCodes::new(&mut p, tree, spec, "");
    let label = p.declare("label", label_width(spec));
    feature_tables(&mut p, spec, std::slice::from_ref(&codes), cfg)?;
    let boxes: Vec<(Region, u64)> = tree
        .leaf_regions(&Region::full(&spec.schema))
        .into_iter()
        .map(|l| (l.region, tree.payload(l.node).label as u64))
        .collect();
    p.tables.push(region_table("decision".into(), &codes, &boxes, &label, cfg)?);
    p.output = ProgramOutput::Label { field: label };
    Ok(p)
}

pub(super) fn map_rf(spec: &ModelSpec, cfg: &ConvertConfig) -> Result<PipelineProgram> {
    let ModelParams::Rf(forest) = &spec.params else { unreachable!() };
    let k = spec.n_outputs;
    let mut p = PipelineProgram::new("rf_eb", "rf", "eb");
    declare_inputs(&mut p, spec);
    let codes: Vec<TreeCodes> = forest
        .trees
        .iter()
        .enumerate()
        .map(|(t, tree)| TreeCodes::new(&mut p, tree, spec, &format!("t{t}_")))
        .collect();
    let votes: Vec<String> = (0..forest.trees.len())
        .map(|t| p.declare(format!("vote_t{t}"), label_width(spec)))
        .collect();
    let label = p.declare("label", label_width(spec));
    feature_tables(&mut p, spec, &codes, cfg)?;
    let full = Region::full(&spec.schema);
    for (t, tree) in forest.trees.iter().enumerate() {
        let boxes: Vec<(Region, u64)> = tree
            .leaf_regions(&full)
            .into_iter()
            .map(|l| (l.region, tree.payload(l.node).label as u64))
            .collect();
        p.tables.push(region_table(format!("tree_t{t}"), &codes[t], &boxes, &votes[t], cfg)?);
    }
    match cfg.vote {
        VoteMode::Logic => p.logic.push(LogicOp::VoteCount {
            dst: label.clone(),
            srcs: votes.clone(),
            n_classes: k as u32,
        }),
        VoteMode::Table => {
            let trees: Vec<&Tree<_>> = forest.trees.iter().collect();
            let tuples: BTreeSet<Vec<u64>> = match reachable_leaves(&trees, &full, cfg.max_entries) {
                Some(nodes) => nodes
                    .into_iter()
                    .map(|n| n.iter().zip(&trees).map(|(&i, t)| t.payload(i).label as u64).collect())
                    .collect(),
                None => {
                    let space = (k as u128).checked_pow(trees.len() as u32).unwrap_or(u128::MAX);
                    cfg.check_entries("vote table", space).map_err(|_| {
                        Error::Budget(format!(
                            "vote table over {} trees exceeds the entry budget of {}; use vote logic mode",
                            trees.len(),
                            cfg.max_entries
                        ))
                    })?;
                    let mut all = BTreeSet::new();
                    for idx in 0..space as u64 {
                        let mut rest = idx;
                        let mut tuple = vec![0; trees.len()];
                        for slot in tuple.iter_mut().rev() {
                            *slot = rest % k as u64;
                            rest /= k as u64;
                        }
                        all.insert(tuple);
                    }
                    all
                }
            };
            let rows = tuples
                .into_iter()
                .map(|t| {
                    let m = majority(t.iter().map(|&l| l as Label), k) as u64;
                    (t, m)
                })
                .collect();
            p.tables.push(tuple_table("vote", &votes, rows, &label, cfg)?);
        }
    }
    p.output = ProgramOutput::Label { field: label };
    Ok(p)
}

/// Shared layout for ensembles decided by an offline function of the
/// reached leaves: feature tables, per-tree leaf-id tables, decision table.
fn leaf_tuple_program<L: LeafPayload>(
    spec: &ModelSpec,
    family: &str,
    trees: &[Tree<L>],
    cfg: &ConvertConfig,
    decide: impl Fn(&[(usize, u32)]) -> Label,
) -> Result<PipelineProgram> {
    let mut p = PipelineProgram::new(format!("{family}_eb"), family, "eb");
    declare_inputs(&mut p, spec);
    let codes: Vec<TreeCodes> = trees
        .iter()
        .enumerate()
        .map(|(t, tree)| TreeCodes::new(&mut p, tree, spec, &format!("t{t}_")))
        .collect();
    let full = Region::full(&spec.schema);
    let leaves: Vec<_> = trees.iter().map(|t| t.leaf_regions(&full)).collect();
    let leaf_fields: Vec<String> = leaves
        .iter()
        .enumerate()
        .map(|(t, l)| p.declare(format!("leaf_t{t}"), bits_for(l.len().saturating_sub(1) as u64)))
        .collect();
    let label = p.declare("label", label_width(spec));
    feature_tables(&mut p, spec, &codes, cfg)?;
    // leaf ids are depth-first ordinals among the tree's reachable leaves
    let mut ordinal: Vec<HashMap<usize, (u64, u32)>> = Vec::new();
    for (t, regions) in leaves.iter().enumerate() {
        let boxes: Vec<(Region, u64)> = regions
            .iter()
            .enumerate()
            .map(|(j, l)| (l.region.clone(), j as u64))
            .collect();
        p.tables.push(region_table(format!("tree_t{t}"), &codes[t], &boxes, &leaf_fields[t], cfg)?);
        ordinal.push(regions.iter().enumerate().map(|(j, l)| (l.node, (j as u64, l.depth))).collect());
    }
    let refs: Vec<&Tree<L>> = trees.iter().collect();
    let tuples = reachable_leaves(&refs, &full, cfg.max_entries).ok_or_else(|| {
        Error::Budget(format!(
            "more than {} reachable leaf combinations across {} trees",
            cfg.max_entries,
            trees.len()
        ))
    })?;
    let mut rows = BTreeMap::new();
    for nodes in tuples {
        let reached: Vec<(usize, u32)> = nodes.iter().zip(&ordinal).map(|(n, o)| (*n, o[n].1)).collect();
        let key: Vec<u64> = nodes.iter().zip(&ordinal).map(|(n, o)| o[n].0).collect();
        rows.insert(key, decide(&reached) as u64);
    }
    p.tables.push(tuple_table("decision", &leaf_fields, rows, &label, cfg)?);
    p.output = ProgramOutput::Label { field: label };
    Ok(p)
}

pub(super) fn map_xgb(spec: &ModelSpec, cfg: &ConvertConfig) -> Result<PipelineProgram> {
    let ModelParams::Xgb(params) = &spec.params else { unreachable!() };
    leaf_tuple_program(spec, "xgb", &params.trees, cfg, |reached| {
        let mut scores = params.base_score.clone();
        let groups = params.groups();
        for (t, &(node, _)) in reached.iter().enumerate() {
            scores[t % groups] += params.trees[t].payload(node).value;
        }
        xgb_decide(params, scores)
    })
}

pub(super) fn map_iforest(spec: &ModelSpec, cfg: &ConvertConfig) -> Result<PipelineProgram> {
    let ModelParams::Iforest(params) = &spec.params else { unreachable!() };
    leaf_tuple_program(spec, "iforest", &params.trees, cfg, |reached| {
        let paths = reached
            .iter()
            .enumerate()
            .map(|(t, &(node, depth))| iforest_path_length(&params.trees[t], node, depth));
        iforest_decide(params, iforest_mean(paths))
    })
}
