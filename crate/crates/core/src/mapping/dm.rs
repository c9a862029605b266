//! Direct-mapping converters.
//!
//! Trees become a ladder of per-depth node tables. The root test is plain
//! logic. Table `l` keys on (breadth-first id of the depth `l - 1` node,
//! its comparison result) and writes the depth-`l` node's id, feature index
//! and threshold; logic then selects the feature value and compares. The
//! leaf table maps the last (id, result) pair to a label. A depth-`p` tree
//! takes `p` tables and `3p - 1` stages.
//!
//! Binarized networks keep their weight rows in registers and evaluate each
//! neuron as XNOR, popcount and a threshold in logic.

use std::collections::HashMap;

use super::{declare_inputs, ConvertConfig};
use crate::error::{Error, Result};
use crate::ir::{
    bits_for, width_mask, Action, ActionCall, Cmp, LogicOp, MatchKind, Operand, PipelineProgram, ProgramOutput, Register,
    Table, TableEntry, TableKey,
};
use crate::model::{ClassLeaf, ModelParams, ModelSpec, Node, Tree};
use crate::table::MatchKey;

/// Appends the ladder for `tree`, writing its label to `out`.
fn tree_ladder(p: &mut PipelineProgram, spec: &ModelSpec, tree: &Tree<ClassLeaf>, inputs: &[String], prefix: &str, out: &str) {
    let order = tree.bfs_order();
    let id: HashMap<usize, u64> = order.iter().enumerate().map(|(i, &n)| (n, i as u64)).collect();
    let depth = tree.depth();
    let id_w = bits_for(order.len().saturating_sub(1) as u64);
    let feat_w = bits_for(spec.schema.len().saturating_sub(1) as u64);
    let thr_w = (0..spec.schema.len()).map(|i| spec.schema.bit_width(i)).max().unwrap_or(1);
    let call = |data: Vec<u64>| ActionCall { action_id: 0, action_data: data };
    let exact = |field: &str| TableKey { field: field.to_string(), kind: MatchKind::Exact };

    let Node::Split(root) = &tree.nodes[0] else {
        let Node::Leaf(l) = &tree.nodes[0] else { unreachable!() };
        let mut t = Table::new(
            format!("{prefix}leaf"),
            vec![],
            vec![Action { name: format!("{prefix}set_label"), params: vec![out.to_string()] }],
        );
        t.default_action = Some(call(vec![l.label as u64]));
        p.tables.push(t);
        return;
    };

    // the root test needs no table: its feature and threshold are constants
    let mut cmp = p.declare(format!("{prefix}cmp_0"), 1);
    p.logic.push(LogicOp::Compare {
        dst: cmp.clone(),
        lhs: Operand::field(&inputs[root.feature]),
        cmp: Cmp::Le,
        rhs: Operand::Const(root.threshold),
    });
    let mut node: Option<String> = None;
    // nodes whose test produced the current `cmp`; leaves are carried down
    let mut frontier = vec![0usize];

    // (node, cmp) rows of the table consuming the current level: each
    // split yields both outcomes, a carried leaf only cmp = 1
    let transitions = |frontier: &[usize]| -> Vec<(usize, u64, usize)> {
        let mut rows = Vec::new();
        for &n in frontier {
            match &tree.nodes[n] {
                Node::Split(s) => {
                    rows.push((n, 1, s.left));
                    rows.push((n, 0, s.right));
                }
                Node::Leaf(_) => rows.push((n, 1, n)),
            }
        }
        rows
    };
    let keys_of = |node: &Option<String>, cmp: &str| -> Vec<TableKey> {
        node.iter().map(|n| exact(n)).chain([exact(cmp)]).collect()
    };
    let match_of = |node: &Option<String>, n: usize, c: u64| -> Vec<MatchKey> {
        node.iter().map(|_| MatchKey::exact(id[&n])).chain([MatchKey::exact(c)]).collect()
    };

    for level in 1..depth {
        let next_node = p.declare(format!("{prefix}node_{level}"), id_w);
        let feat = p.declare(format!("{prefix}feat_{level}"), feat_w);
        let thr = p.declare(format!("{prefix}thr_{level}"), thr_w);
        let mut t = Table::new(
            format!("{prefix}level_{level}"),
            keys_of(&node, &cmp),
            vec![Action {
                name: format!("{prefix}set_node_{level}"),
                params: vec![next_node.clone(), feat.clone(), thr.clone()],
            }],
        );
        let mut next = Vec::new();
        for (n, c, child) in transitions(&frontier) {
            let data = match &tree.nodes[child] {
                Node::Split(s) => vec![id[&child], s.feature as u64, s.threshold],
                // no value exceeds the all-ones threshold, so a carried leaf compares 1
                Node::Leaf(_) => vec![id[&child], 0, width_mask(thr_w)],
            };
            t.entries.push(TableEntry::new(match_of(&node, n, c), call(data)));
            next.push(child);
        }
        p.tables.push(t);
        frontier = next;

        let value = p.declare(format!("{prefix}value_{level}"), thr_w);
        p.logic.push(LogicOp::Mux {
            dst: value.clone(),
            index: feat,
            inputs: inputs.iter().map(Operand::field).collect(),
        });
        cmp = p.declare(format!("{prefix}cmp_{level}"), 1);
        p.logic.push(LogicOp::Compare {
            dst: cmp.clone(),
            lhs: Operand::field(value),
            cmp: Cmp::Le,
            rhs: Operand::field(thr),
        });
        node = Some(next_node);
    }

    let mut leaf = Table::new(
        format!("{prefix}leaf"),
        keys_of(&node, &cmp),
        vec![Action { name: format!("{prefix}set_label"), params: vec![out.to_string()] }],
    );
    for (n, c, child) in transitions(&frontier) {
        let Node::Leaf(l) = &tree.nodes[child] else { unreachable!("the last level reaches only leaves") };
        leaf.entries.push(TableEntry::new(match_of(&node, n, c), call(vec![l.label as u64])));
    }
    p.tables.push(leaf);
}

fn label_width(spec: &ModelSpec) -> u32 {
    bits_for(spec.n_outputs.saturating_sub(1) as u64)
}

pub(super) fn map_dt(spec: &ModelSpec) -> Result<PipelineProgram> {
    let ModelParams::Dt(tree) = &spec.params else { unreachable!() };
    let mut p = PipelineProgram::new("dt_dm", "dt", "dm");
    let inputs = declare_inputs(&mut p, spec);
    let label = p.declare("label", label_width(spec));
    tree_ladder(&mut p, spec, tree, &inputs, "", &label);
    p.output = ProgramOutput::Label { field: label };
    Ok(p)
}

pub(super) fn map_rf(spec: &ModelSpec) -> Result<PipelineProgram> {
    let ModelParams::Rf(forest) = &spec.params else { unreachable!() };
    let mut p = PipelineProgram::new("rf_dm", "rf", "dm");
    let inputs = declare_inputs(&mut p, spec);
    let mut votes = Vec::new();
    for (t, tree) in forest.trees.iter().enumerate() {
        let vote = p.declare(format!("vote_t{t}"), label_width(spec));
        tree_ladder(&mut p, spec, tree, &inputs, &format!("t{t}_"), &vote);
        votes.push(vote);
    }
    let label = p.declare("label", label_width(spec));
    p.logic.push(LogicOp::VoteCount { dst: label.clone(), srcs: votes, n_classes: spec.n_outputs as u32 });
    p.output = ProgramOutput::Label { field: label };
    Ok(p)
}

pub(super) fn map_bnn(spec: &ModelSpec, cfg: &ConvertConfig) -> Result<PipelineProgram> {
    let ModelParams::Bnn(params) = &spec.params else { unreachable!() };
    let mut p = PipelineProgram::new("bnn_dm", "bnn", "dm");
    let inputs = declare_inputs(&mut p, spec);
    let widest = params.layers.iter().map(|l| l.input_width()).max().unwrap_or(0) as u32;
    if widest > cfg.max_word_bits.min(64) {
        return Err(Error::Budget(format!(
            "layer input of {widest} bits exceeds the {}-bit register word",
            cfg.max_word_bits.min(64)
        )));
    }
    let mut x = p.declare("bnn_in_0", spec.schema.total_bits());
    p.logic.push(LogicOp::Concat { dst: x.clone(), srcs: inputs });
    let last = params.layers.len() - 1;
    let mut label = String::new();
    for (l, layer) in params.layers.iter().enumerate() {
        let w = layer.input_width() as u32;
        let reg = format!("weights_{l}");
        p.registers.push(Register {
            name: reg.clone(),
            width: w,
            values: layer.rows.iter().map(|r| r.to_word()).collect(),
        });
        let mut counts = Vec::new();
        for j in 0..layer.output_width() {
            let row = p.declare(format!("row_{l}_{j}"), w);
            p.logic.push(LogicOp::RegRead { dst: row.clone(), register: reg.clone(), index: j as u32 });
            let xn = p.declare(format!("xnor_{l}_{j}"), w);
            p.logic.push(LogicOp::Xnor { dst: xn.clone(), a: x.clone(), b: row });
            let pc = p.declare(format!("pop_{l}_{j}"), bits_for(w as u64));
            p.logic.push(LogicOp::Popcount { dst: pc.clone(), src: xn });
            counts.push(pc);
        }
        if l == last {
            label = p.declare("label", label_width(spec));
            p.logic.push(LogicOp::ArgMax { dst: label.clone(), srcs: counts });
        } else {
            // ±1 dot product 2·pop − w is non-negative iff pop ≥ ceil(w/2)
            let signs: Vec<String> = counts
                .iter()
                .enumerate()
                .map(|(j, pc)| {
                    let s = p.declare(format!("sign_{l}_{j}"), 1);
                    p.logic.push(LogicOp::Sign { dst: s.clone(), src: pc.clone(), threshold: (w as u64).div_ceil(2) });
                    s
                })
                .collect();
            x = p.declare(format!("bnn_in_{}", l + 1), signs.len() as u32);
            p.logic.push(LogicOp::Concat { dst: x.clone(), srcs: signs });
        }
    }
    p.output = ProgramOutput::Label { field: label };
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{stage_schedule, Simulator};
    use crate::model::{BitRow, BnnLayer, BnnParams, FeatureSchema, Split};

    fn dt(nodes: Vec<Node<ClassLeaf>>, widths: &[u32]) -> ModelSpec {
        ModelSpec::new(FeatureSchema::with_widths(widths).unwrap(), 3, ModelParams::Dt(Tree { nodes })).unwrap()
    }

    fn split(feature: usize, threshold: u64, left: usize, right: usize) -> Node<ClassLeaf> {
        Node::Split(Split { feature, threshold, left, right })
    }

    fn leaf(label: u32) -> Node<ClassLeaf> {
        Node::Leaf(ClassLeaf { label })
    }

    #[test]
    fn depth_one_is_compare_plus_leaf_table() {
        let spec = dt(vec![split(0, 4, 1, 2), leaf(0), leaf(1)], &[3]);
        let p = map_dt(&spec).unwrap();
        assert_eq!(p.tables.iter().map(|t| t.name.as_str()).collect::<Vec<_>>(), vec!["leaf"]);
        assert_eq!(p.tables[0].entries.len(), 2);
        assert_eq!(stage_schedule(&p).unwrap().n_stages, 2);
        let sim = Simulator::new(&p).unwrap();
        assert_eq!(sim.predict(&[4]).unwrap(), 0);
        assert_eq!(sim.predict(&[5]).unwrap(), 1);
    }

    #[test]
    fn unbalanced_tree_passes_leaves_down() {
        // root: x1 <= 1 ? 2 : (x0 <= 2 ? (x1 <= 2 ? 0 : 1) : 2)
        let spec = dt(
            vec![
                split(1, 1, 1, 2),
                leaf(2),
                split(0, 2, 3, 4),
                split(1, 2, 5, 6),
                leaf(2),
                leaf(0),
                leaf(1),
            ],
            &[3, 2],
        );
        let p = map_dt(&spec).unwrap();
        assert_eq!(p.tables.len(), 3);
        assert_eq!(stage_schedule(&p).unwrap().n_stages, 3 * 3 - 1);
        let sim = Simulator::new(&p).unwrap();
        for a in 0..8 {
            for b in 0..4 {
                let want = spec.reference_predict(&vec![a, b].into()).unwrap() as u64;
                assert_eq!(sim.predict(&[a, b]).unwrap(), want);
            }
        }
    }

    #[test]
    fn lone_leaf() {
        let spec = dt(vec![leaf(2)], &[3]);
        let sim = Simulator::new(&map_dt(&spec).unwrap()).unwrap();
        assert_eq!(sim.predict(&[6]).unwrap(), 2);
    }

    fn bnn(rows: &[&str], out: &[&str], widths: &[u32]) -> ModelSpec {
        let layer = |r: &[&str]| BnnLayer {
            rows: r.iter().map(|s| BitRow(s.chars().map(|c| c == '1').collect())).collect(),
        };
        ModelSpec::new(
            FeatureSchema::with_widths(widths).unwrap(),
            out.len(),
            ModelParams::Bnn(BnnParams { layers: vec![layer(rows), layer(out)] }),
        )
        .unwrap()
    }

    #[test]
    fn xnor_popcount_sign_identities() {
        let spec = bnn(&["1010", "0101"], &["10", "01"], &[4]);
        let p = map_bnn(&spec, &ConvertConfig::default()).unwrap();
        let sim = Simulator::new(&p).unwrap();
        let fields = sim.execute(&[0b1010]).unwrap();
        let get = |name: &str| fields[p.fields.iter().position(|f| f.name == name).unwrap()];
        assert_eq!(get("xnor_0_0"), 0b1111);
        assert_eq!(get("pop_0_0"), 4);
        assert_eq!(get("sign_0_0"), 1);
        // complement row
        assert_eq!(get("pop_0_1"), 0);
        assert_eq!(get("sign_0_1"), 0);
        assert_eq!(sim.predict(&[0b1010]).unwrap(), 0);
    }

    #[test]
    fn sign_threshold_boundaries() {
        // odd width 3: pop 2 -> 1, pop 1 -> 0; even width 4: pop 2 -> 1
        for (row, x, width, want) in [("111", 0b110u64, 3u32, 1u64), ("111", 0b100, 3, 0), ("1111", 0b1100, 4, 1), ("1111", 0b1000, 4, 0)] {
            let spec = bnn(&[row], &["1", "0"], &[width]);
            let p = map_bnn(&spec, &ConvertConfig::default()).unwrap();
            let sim = Simulator::new(&p).unwrap();
            let fields = sim.execute(&[x]).unwrap();
            let idx = p.fields.iter().position(|f| f.name == "sign_0_0").unwrap();
            assert_eq!(fields[idx], want, "row {row} x {x:b}");
            assert_eq!(sim.predict(&[x]).unwrap(), spec.reference_predict(&vec![x].into()).unwrap() as u64);
        }
    }

    #[test]
    fn register_budget() {
        let spec = bnn(&["1010"], &["1", "0"], &[4]);
        let cfg = ConvertConfig { max_word_bits: 3, ..ConvertConfig::default() };
        assert!(map_bnn(&spec, &cfg).unwrap_err().is_budget());
    }
}
