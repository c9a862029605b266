//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any fails.
//!
//! Oracles here are written against the model definitions directly and do
//! not call into the converters' internals.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::fixture;
use rand::Rng;
use rayon::prelude::*;
use tablewright::codegen::{emit_entries, load_entries};
use tablewright::ir::{ActionCall, MatchKind, Table, TableEntry};
use tablewright::mapping::KeyStyle;
use tablewright::model::{ClassLeaf, ForestParams, IForestParams, ModelParams, Node, Split, Tree, XgbParams};
use tablewright::preset::Preset;
use tablewright::synth::{self, rng};
use tablewright::table::{exact_to_lpm, exact_to_ternary, MatchKey};
use tablewright::{
    convert, ConvertConfig, Family, FeatureSchema, FeatureVector, ModelSpec, PipelineProgram, Simulator, Variant,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cfg(v: Variant) -> ConvertConfig {
    ConvertConfig::default().with_variant(v)
}

fn random_input<R: Rng>(r: &mut R, s: &FeatureSchema) -> Vec<u64> {
    (0..s.len()).map(|i| r.gen_range(0..=s.max_value(i))).collect()
}

fn reference(spec: &ModelSpec, x: &[u64]) -> u64 {
    spec.reference_predict(&FeatureVector(x.to_vec())).unwrap() as u64
}

// ---------------------------------------------------------------------------
// tree exactness

fn tree_exactness() -> Outcome {
    let mut r = rng(100);
    let mut specs = Vec::new();
    for depth in 2..=6u32 {
        for n_features in 2..=3usize {
            let budget = if n_features == 2 { 20 } else { 18 };
            let widths: Vec<u32> = (0..n_features)
                .map(|_| r.gen_range(3..=budget / n_features as u32))
                .collect();
            let k = r.gen_range(2..=4);
            specs.push(synth::random_dt(&mut r, &widths, depth, k));
            let n_trees = r.gen_range(2..=5);
            specs.push(synth::random_rf(&mut r, &widths, depth, n_trees, k));
        }
    }
    specs.push(synth::random_dt(&mut r, &[10, 10], 6, 3));
    specs.push(synth::random_rf(&mut r, &[10, 10], 5, 4, 3));

    let mut points = 0u64;
    for spec in &specs {
        let eb = Simulator::new(&convert(spec, &cfg(Variant::Eb)).map_err(|e| e.to_string())?).unwrap();
        let dm = Simulator::new(&convert(spec, &cfg(Variant::Dm)).map_err(|e| e.to_string())?).unwrap();
        let size = spec.schema.domain_size().unwrap();
        let bad = (0..size).into_par_iter().find_any(|&i| {
            let x = spec.schema.domain_point(i).0;
            let want = reference(spec, &x);
            eb.predict(&x).unwrap() != want || dm.predict(&x).unwrap() != want
        });
        if let Some(i) = bad {
            let x = spec.schema.domain_point(i).0;
            return Err(format!(
                "{} widths {:?}: at {x:?} reference {} eb {} dm {}",
                spec.family(),
                (0..spec.schema.len())
                    .map(|j| spec.schema.bit_width(j))
                    .collect::<Vec<_>>(),
                reference(spec, &x),
                eb.predict(&x).unwrap(),
                dm.predict(&x).unwrap()
            ));
        }
        points += size;
    }
    Ok(format!("{} models, {points} points, 0 disagreements", specs.len()))
}

// ---------------------------------------------------------------------------
// decision tables

type Bounds = Vec<(u64, u64)>;

/// Leaves in depth-first order (left first) with their boxes, skipping leaves
/// whose box is empty.
fn dfs_leaves<L>(tree: &Tree<L>, schema: &FeatureSchema) -> Vec<(usize, u32, Bounds)> {
    fn walk<L>(tree: &Tree<L>, node: usize, depth: u32, b: Bounds, out: &mut Vec<(usize, u32, Bounds)>) {
        match &tree.nodes[node] {
            Node::Leaf(_) => out.push((node, depth, b)),
            Node::Split(Split {
                feature,
                threshold,
                left,
                right,
            }) => {
                let (lo, hi) = b[*feature];
                if *threshold >= lo {
                    let mut l = b.clone();
                    l[*feature] = (lo, hi.min(*threshold));
                    walk(tree, *left, depth + 1, l, out);
                }
                if *threshold < hi {
                    let mut rb = b.clone();
                    rb[*feature] = (lo.max(threshold + 1), hi);
                    walk(tree, *right, depth + 1, rb, out);
                }
            }
        }
    }
    let full = (0..schema.len()).map(|i| (0, schema.max_value(i))).collect();
    let mut out = Vec::new();
    walk(tree, 0, 0, full, &mut out);
    out
}

fn boxes_meet(boxes: &[&Bounds]) -> bool {
    (0..boxes[0].len()).all(|f| {
        let lo = boxes.iter().map(|b| b[f].0).max().unwrap();
        let hi = boxes.iter().map(|b| b[f].1).min().unwrap();
        lo <= hi
    })
}

fn c_factor(n: u64) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let m = (n - 1) as f64;
            2.0 * (m.ln() + 0.577_215_664_901_532_9) - 2.0 * m / n as f64
        }
    }
}

/// Action data of the entry `table` selects for `key`, or of its default.
fn lookup(table: &Table, widths: &[u32], key: &[u64]) -> Option<Vec<u64>> {
    let hit = table
        .entries
        .iter()
        .filter(|e| e.keys.iter().zip(key).zip(widths).all(|((k, &v), &w)| k.matches(v, w)))
        .max_by_key(|e| e.priority);
    hit.map(|e| e.action_data.clone())
        .or_else(|| table.default_action.as_ref().map(|c| c.action_data.clone()))
}

fn check_decision_table(
    p: &PipelineProgram,
    leaves: &[Vec<(usize, u32, Bounds)>],
    decide: impl Fn(&[usize]) -> u64,
) -> Result<usize, String> {
    let table = p.table("decision").ok_or("no decision table")?;
    let widths: Vec<u32> = table.keys.iter().map(|k| p.field_width(&k.field).unwrap()).collect();
    for (t, k) in table.keys.iter().enumerate() {
        ensure(k.field == format!("leaf_t{t}"), || {
            format!("decision key {t} is {}", k.field)
        })?;
    }
    // every installed entry names a reachable tuple
    for e in &table.entries {
        let mut boxes = Vec::new();
        for (t, k) in e.keys.iter().enumerate() {
            let MatchKey::Exact { value } = k else {
                return Err(format!("non-exact decision key {k:?}"));
            };
            let leaf = leaves[t]
                .get(*value as usize)
                .ok_or_else(|| format!("leaf id {value} out of range"))?;
            boxes.push(&leaf.2);
        }
        ensure(boxes_meet(&boxes), || {
            format!("unreachable tuple {:?} has an entry", e.keys)
        })?;
    }
    // depth-first over trees, pruning empty intersections
    fn walk(
        leaves: &[Vec<(usize, u32, Bounds)>],
        acc: &Bounds,
        idx: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]) -> Result<(), String>,
    ) -> Result<(), String> {
        let t = idx.len();
        if t == leaves.len() {
            return visit(idx);
        }
        for (j, leaf) in leaves[t].iter().enumerate() {
            let meet: Bounds = acc
                .iter()
                .zip(&leaf.2)
                .map(|(a, b)| (a.0.max(b.0), a.1.min(b.1)))
                .collect();
            if meet.iter().all(|(lo, hi)| lo <= hi) {
                idx.push(j);
                walk(leaves, &meet, idx, visit)?;
                idx.pop();
            }
        }
        Ok(())
    }
    let full: Bounds = leaves[0][0].2.iter().map(|_| (0, u64::MAX)).collect();
    let mut reachable = 0;
    walk(leaves, &full, &mut Vec::new(), &mut |idx| {
        reachable += 1;
        let key: Vec<u64> = idx.iter().map(|&j| j as u64).collect();
        let want = decide(idx);
        let got = lookup(table, &widths, &key);
        ensure(got == Some(vec![want]), || {
            format!("tuple {key:?}: table {got:?}, oracle {want}")
        })
    })?;
    Ok(reachable)
}

fn decision_tables() -> Outcome {
    let mut r = rng(200);
    let mut specs = Vec::new();
    for case in 0..100 {
        let widths: Vec<u32> = (0..r.gen_range(2..=3)).map(|_| r.gen_range(3..=6)).collect();
        let depth = r.gen_range(2..=3);
        let n_trees = r.gen_range(2..=4);
        let spec = if case % 2 == 0 {
            let k = if case % 4 == 0 { 2 } else { 3 };
            synth::random_xgb(&mut r, &widths, depth, n_trees * if k == 2 { 1 } else { 2 }, k)
        } else {
            let n_samples = r.gen_range(16..=256);
            synth::random_iforest(&mut r, &widths, depth + 1, n_trees, n_samples)
        };
        specs.push(spec);
    }
    let counts: Vec<usize> = specs
        .par_iter()
        .enumerate()
        .map(|(case, spec)| decision_case(case, spec))
        .collect::<Result<_, _>>()?;
    Ok(format!(
        "100 ensembles, {} reachable tuples checked",
        counts.iter().sum::<usize>()
    ))
}

fn decision_case(case: usize, spec: &ModelSpec) -> Result<usize, String> {
    let p = convert(spec, &ConvertConfig::default()).map_err(|e| format!("case {case}: {e}"))?;
    let n = match &spec.params {
        ModelParams::Xgb(XgbParams { base_score, trees }) => {
            let leaves: Vec<_> = trees.iter().map(|t| dfs_leaves(t, &spec.schema)).collect();
            check_decision_table(&p, &leaves, |idx| {
                let mut s = base_score.clone();
                for (t, &j) in idx.iter().enumerate() {
                    let Node::Leaf(l) = &trees[t].nodes[leaves[t][j].0] else {
                        unreachable!()
                    };
                    s[t % base_score.len()] += l.value;
                }
                if s.len() == 1 {
                    (s[0] > 0.0) as u64
                } else {
                    let mut best = 0;
                    for c in 1..s.len() {
                        if s[c] > s[best] {
                            best = c;
                        }
                    }
                    best as u64
                }
            })
        }
        ModelParams::Iforest(IForestParams {
            n_samples,
            score_threshold,
            trees,
        }) => {
            let leaves: Vec<_> = trees.iter().map(|t| dfs_leaves(t, &spec.schema)).collect();
            let threshold = -c_factor(*n_samples) * score_threshold.log2();
            check_decision_table(&p, &leaves, |idx| {
                let mut total = 0.0;
                for (t, &j) in idx.iter().enumerate() {
                    let (node, depth, _) = &leaves[t][j];
                    let Node::Leaf(l) = &trees[t].nodes[*node] else {
                        unreachable!()
                    };
                    total += *depth as f64 + c_factor(l.size);
                }
                (total / trees.len() as f64 <= threshold) as u64
            })
        }
        _ => unreachable!(),
    }
    .map_err(|e| format!("case {case} ({}): {e}", spec.family()))?;
    Ok(n)
}

// ---------------------------------------------------------------------------
// lookup-based fidelity

fn lb_fidelity() -> Outcome {
    let data = synth::gaussian_two_class(&mut rng(13), &[8, 8], 10_000);
    let bits: [Option<u32>; 6] = [Some(4), Some(6), Some(8), Some(12), Some(16), None];
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for name in ["nb_gauss", "km_gauss", "svm_gauss"] {
        let spec = fixture(name);
        let want: Vec<u64> = data.x.iter().map(|x| reference(&spec, x)).collect();
        let mut curve = Vec::new();
        for b in bits {
            let c = ConvertConfig {
                action_bits: b,
                ..ConvertConfig::default()
            };
            let sim = Simulator::new(&convert(&spec, &c).map_err(|e| e.to_string())?).unwrap();
            let same = data
                .x
                .par_iter()
                .zip(&want)
                .filter(|(x, w)| sim.predict(x).unwrap() == **w)
                .count();
            curve.push(same as f64 / data.len() as f64);
        }
        let pts: Vec<String> = curve.iter().map(|a| format!("{:.2}", a * 100.0)).collect();
        lines.push(format!("{name} [{}]", pts.join(" ")));
        for i in 1..curve.len() {
            if curve[i] + 0.01 < curve[i - 1] {
                failures.push(format!(
                    "{name} drops from {:.4} to {:.4} at {:?} bits",
                    curve[i - 1],
                    curve[i],
                    bits[i]
                ));
            }
        }
        if curve[5] != 1.0 {
            failures.push(format!("{name} full precision at {:.4}", curve[5]));
        }
        if name != "svm_gauss" && curve[2] < 0.99 {
            failures.push(format!("{name} at 8 bits is {:.4}", curve[2]));
        }
    }
    let summary = format!("{} (bits 4 6 8 12 16 full)", lines.join(", "));
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{}; {summary}", failures.join("; ")))
    }
}

// ---------------------------------------------------------------------------
// pca and ae

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn linear_correlation() -> Outcome {
    let mut parts = Vec::new();
    for name in ["pca", "ae"] {
        let spec = fixture(name);
        let c = ConvertConfig {
            action_bits: Some(16),
            ..ConvertConfig::default()
        };
        let sim = Simulator::new(&convert(&spec, &c).map_err(|e| e.to_string())?).unwrap();
        let mut r = rng(14);
        let xs: Vec<Vec<u64>> = (0..10_000).map(|_| random_input(&mut r, &spec.schema)).collect();
        let got: Vec<Vec<f64>> = xs.iter().map(|x| sim.run(x).unwrap().values()).collect();
        let want: Vec<Vec<f64>> = xs
            .iter()
            .map(|x| spec.reference_transform(&FeatureVector(x.clone())).unwrap())
            .collect();
        for j in 0..spec.n_outputs {
            let a: Vec<f64> = got.iter().map(|v| v[j]).collect();
            let b: Vec<f64> = want.iter().map(|v| v[j]).collect();
            let rho = correlation(&a, &b);
            ensure(rho >= 0.999, || format!("{name} output {j}: r = {rho:.6}"))?;
            parts.push(format!("{name}[{j}] {rho:.6}"));
        }
    }
    Ok(format!("r: {}", parts.join(", ")))
}

// ---------------------------------------------------------------------------
// stage counts

fn stages(spec: &ModelSpec, v: Variant) -> Result<usize, String> {
    let p = convert(spec, &cfg(v)).map_err(|e| e.to_string())?;
    Ok(tablewright::ir::stage_schedule(&p).map_err(|e| e.to_string())?.n_stages)
}

/// Complete tree of `depth` over one 10-bit feature, splitting at midpoints.
fn complete_tree(depth: u32, salt: u32) -> Tree<ClassLeaf> {
    fn grow(nodes: &mut Vec<Node<ClassLeaf>>, lo: u64, hi: u64, left: u32, salt: u32) -> usize {
        let id = nodes.len();
        if left == 0 {
            nodes.push(Node::Leaf(ClassLeaf {
                label: ((lo + salt as u64) % 3) as u32,
            }));
            return id;
        }
        nodes.push(Node::Leaf(ClassLeaf { label: 0 }));
        let mid = (lo + hi) / 2;
        let l = grow(nodes, lo, mid, left - 1, salt);
        let r = grow(nodes, mid + 1, hi, left - 1, salt);
        nodes[id] = Node::Split(Split {
            feature: 0,
            threshold: mid,
            left: l,
            right: r,
        });
        id
    }
    let mut nodes = Vec::new();
    grow(&mut nodes, 0, 1023, depth, salt);
    Tree { nodes }
}

fn stage_stability() -> Outcome {
    let mut r = rng(300);
    let mut rf_eb = Vec::new();
    let mut xgb_eb = Vec::new();
    for n in 1..=12 {
        rf_eb.push(stages(&synth::random_rf(&mut r, &[6, 6], 3, n, 3), Variant::Eb)?);
        xgb_eb.push(stages(&synth::random_xgb(&mut r, &[6, 6], 3, n, 2), Variant::Eb)?);
    }
    ensure(rf_eb.iter().all(|&s| s == rf_eb[0]), || {
        format!("rf_eb stages vary: {rf_eb:?}")
    })?;
    ensure(xgb_eb.iter().all(|&s| s == xgb_eb[0]), || {
        format!("xgb_eb stages vary: {xgb_eb:?}")
    })?;

    let schema = FeatureSchema::with_widths(&[10]).unwrap();
    let mut dt_dm = Vec::new();
    let mut rf_dm = Vec::new();
    for depth in 2..=8 {
        let dt = ModelSpec::new(schema.clone(), 3, ModelParams::Dt(complete_tree(depth, 0))).unwrap();
        let trees = (0..3).map(|s| complete_tree(depth, s)).collect();
        let rf = ModelSpec::new(schema.clone(), 3, ModelParams::Rf(ForestParams { trees })).unwrap();
        dt_dm.push(stages(&dt, Variant::Dm)?);
        rf_dm.push(stages(&rf, Variant::Dm)?);
    }
    for s in [&dt_dm, &rf_dm] {
        ensure(s.windows(2).all(|w| w[1] > w[0]), || {
            format!("dm stages do not grow with depth: {s:?}")
        })?;
    }
    Ok(format!(
        "rf_eb {} and xgb_eb {} for 1..12 trees; dt_dm {dt_dm:?}, rf_dm {rf_dm:?} for depth 2..8",
        rf_eb[0], xgb_eb[0]
    ))
}

// ---------------------------------------------------------------------------
// compression

fn compressed_lookup(entries: &[TableEntry], kind: MatchKind, v: u64, w: u32) -> Result<Option<ActionCall>, String> {
    let hits: Vec<&TableEntry> = entries.iter().filter(|e| e.keys[0].matches(v, w)).collect();
    let best = match kind {
        MatchKind::Lpm => hits.iter().max_by_key(|e| e.keys[0].specificity(w)),
        _ => hits.iter().max_by_key(|e| e.priority),
    };
    if let Some(b) = best {
        ensure(hits.iter().all(|h| h.call() == b.call()), || {
            format!("overlapping entries disagree at {v}")
        })?;
    }
    Ok(best.map(|e| e.call()))
}

fn compression() -> Outcome {
    let mut r = rng(400);
    let mut tables = 0;
    for w in 1..=12u32 {
        for _ in 0..8 {
            let density: f64 = r.gen_range(0.1..1.0);
            let n_actions = r.gen_range(1..=4u64);
            let mut exact: BTreeMap<u64, u64> = BTreeMap::new();
            let mut cur = r.gen_range(0..n_actions);
            for v in 0..(1u64 << w) {
                if r.gen_bool(0.2) {
                    cur = r.gen_range(0..n_actions);
                }
                if r.gen_bool(density) {
                    exact.insert(v, cur);
                }
            }
            let entries: Vec<TableEntry> = exact
                .iter()
                .map(|(&k, &a)| {
                    TableEntry::new(
                        vec![MatchKey::exact(k)],
                        ActionCall {
                            action_id: 0,
                            action_data: vec![a],
                        },
                    )
                })
                .collect();
            let tern = exact_to_ternary(&entries, w).map_err(|e| e.to_string())?;
            let lpm = exact_to_lpm(&entries, w).map_err(|e| e.to_string())?;
            ensure(tern.len() <= entries.len().max(1) * w as usize, || {
                "ternary blow-up".into()
            })?;
            for v in 0..(1u64 << w) {
                let want = exact.get(&v).map(|&a| vec![a]);
                for (kind, t) in [(MatchKind::Ternary, &tern), (MatchKind::Lpm, &lpm)] {
                    let got = compressed_lookup(t, kind, v, w)?.map(|c| c.action_data);
                    ensure(got == want, || {
                        format!("width {w} {kind:?} at {v}: {got:?} vs {want:?}")
                    })?;
                }
            }
            tables += 1;
        }
    }

    // a tree with at least three thresholds on every feature
    let spec = (0..)
        .map(|s| synth::random_dt(&mut rng(500 + s), &[8, 8], 6, 3))
        .find(|s| {
            let ModelParams::Dt(t) = &s.params else { unreachable!() };
            (0..2).all(|f| {
                let mut th: Vec<u64> = t.splits().filter(|sp| sp.feature == f).map(|sp| sp.threshold).collect();
                th.sort_unstable();
                th.dedup();
                th.len() >= 3
            })
        })
        .unwrap();
    let total = |keys| -> Result<usize, String> {
        let c = ConvertConfig {
            keys,
            ..cfg(Variant::Eb)
        };
        Ok(convert(&spec, &c).map_err(|e| e.to_string())?.total_entries())
    };
    let (ternary, exact) = (total(KeyStyle::Ternary)?, total(KeyStyle::Exact)?);
    ensure(ternary < exact, || {
        format!("dt_eb ternary {ternary} entries, exact {exact}")
    })?;
    Ok(format!(
        "{tables} random tables equivalent; dt_eb entries ternary {ternary} < exact {exact}"
    ))
}

// ---------------------------------------------------------------------------
// binarized network

fn bnn_oracle(spec: &ModelSpec, x: &[u64]) -> u64 {
    let ModelParams::Bnn(p) = &spec.params else {
        unreachable!()
    };
    let mut word = 0u64;
    let mut width = 0u32;
    for (i, &v) in x.iter().enumerate() {
        let w = spec.schema.bit_width(i);
        word = (word << w) | v;
        width += w;
    }
    for (l, layer) in p.layers.iter().enumerate() {
        let mask = if width == 64 { u64::MAX } else { (1 << width) - 1 };
        let pops: Vec<u32> = layer
            .rows
            .iter()
            .map(|row| {
                let w = row.0.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
                (!(word ^ w) & mask).count_ones()
            })
            .collect();
        if l + 1 == p.layers.len() {
            let mut best = 0;
            for j in 1..pops.len() {
                if pops[j] > pops[best] {
                    best = j;
                }
            }
            return best as u64;
        }
        word = pops.iter().fold(0u64, |acc, &c| (acc << 1) | (2 * c >= width) as u64);
        width = pops.len() as u32;
    }
    unreachable!()
}

fn bnn_exactness() -> Outcome {
    let spec = fixture("bnn");
    let ModelParams::Bnn(params) = &spec.params else {
        unreachable!()
    };
    let shape: Vec<usize> = std::iter::once(params.layers[0].input_width())
        .chain(params.layers.iter().map(|l| l.output_width()))
        .collect();
    ensure(shape == [16, 16, 2], || format!("fixture shape {shape:?}"))?;
    let sim = Simulator::new(&convert(&spec, &ConvertConfig::default()).map_err(|e| e.to_string())?).unwrap();
    let mut r = rng(15);
    let mut counts = [0usize; 2];
    for _ in 0..10_000 {
        let x = random_input(&mut r, &spec.schema);
        let (got, want) = (sim.predict(&x).unwrap(), bnn_oracle(&spec, &x));
        ensure(got == want, || format!("input {x:?}: program {got}, oracle {want}"))?;
        counts[want as usize] += 1;
    }
    Ok(format!("10000 inputs exact, class counts {counts:?}"))
}

// ---------------------------------------------------------------------------
// conversion speed

fn realistic(family: Family, preset: Preset, r: &mut rand_chacha::ChaCha8Rng) -> ModelSpec {
    let p = preset.params();
    let w = [16u32; 5];
    match family {
        Family::Dt => synth::random_dt(r, &w, p.tree_depth, 3),
        Family::Rf => synth::random_rf(r, &w, p.tree_depth, p.n_trees, 3),
        Family::Xgb => synth::random_xgb(r, &w, p.tree_depth, p.n_trees, 2),
        Family::Iforest => {
            let depth = 64 - (p.iforest_samples - 1).leading_zeros();
            synth::random_iforest(r, &w, depth, p.iforest_trees, p.iforest_samples)
        }
        Family::Kmeans => synth::random_kmeans(r, &w, 4),
        Family::Knn => synth::random_knn(r, &w, 200, p.knn_neighbors, 3),
        Family::Svm => synth::random_svm(r, &w, 3),
        Family::Nb => synth::random_nb(r, &w, 3),
        Family::Pca => synth::random_pca(r, &w, 2),
        Family::Ae => synth::random_ae(r, &w, 3),
        // binarized input must fit one register word
        Family::Bnn => synth::random_bnn(r, &[16; 4], &[p.nn_hidden], 2),
    }
}

fn timed_convert(spec: &ModelSpec, preset: Preset, v: Variant) -> Result<Duration, String> {
    let c = preset.apply(spec.family(), cfg(v));
    let start = Instant::now();
    convert(spec, &c).map_err(|e| format!("{}_{v} at {preset}: {e}", spec.family()))?;
    Ok(start.elapsed())
}

fn conversion_speed() -> Outcome {
    let mut r = rng(600);
    let mut slowest = (Duration::ZERO, String::new());
    for family in Family::ALL {
        let spec = realistic(family, Preset::S, &mut r);
        for &v in Variant::supported(family) {
            let d = timed_convert(&spec, Preset::S, v)?;
            ensure(d < Duration::from_secs(10), || {
                format!("{family}_{v} at S took {d:.1?}")
            })?;
            if d > slowest.0 {
                slowest = (d, format!("{family}_{v}"));
            }
        }
    }
    let mut m = Vec::new();
    for (family, v) in [(Family::Xgb, Variant::Eb), (Family::Kmeans, Variant::Eb)] {
        let spec = realistic(family, Preset::M, &mut r);
        let d = timed_convert(&spec, Preset::M, v)?;
        ensure(d < Duration::from_secs(300), || {
            format!("{family}_{v} at M took {d:.1?}")
        })?;
        m.push(format!("{family}_{v} {d:.2?}"));
    }
    Ok(format!(
        "slowest S conversion {} {:.2?}; M: {}",
        slowest.1,
        slowest.0,
        m.join(", ")
    ))
}

// ---------------------------------------------------------------------------
// entries round-trip

fn strip(p: &PipelineProgram) -> PipelineProgram {
    let mut bare = p.clone();
    for t in &mut bare.tables {
        t.entries.clear();
        t.default_action = None;
    }
    for reg in &mut bare.registers {
        reg.values.iter_mut().for_each(|v| *v = 0);
    }
    bare
}

fn entries_round_trip() -> Outcome {
    let mut programs = 0;
    for name in [
        "dt_small",
        "rf_s",
        "xgb_s",
        "xgb_multi",
        "iforest_s",
        "kmeans_eb",
        "knn",
        "svm3",
        "pca",
        "ae",
        "bnn",
        "nb_gauss",
        "km_gauss",
        "svm_gauss",
    ] {
        let spec = fixture(name);
        for &v in Variant::supported(spec.family()) {
            let p = convert(&spec, &cfg(v)).map_err(|e| format!("{name} {v}: {e}"))?;
            let text = emit_entries(&p);
            let loaded = load_entries(&strip(&p), &text).map_err(|e| format!("{name} {v}: {e}"))?;
            ensure(emit_entries(&loaded) == text, || {
                format!("{name} {v}: re-emitted entries differ")
            })?;
            let (a, b) = (Simulator::new(&p).unwrap(), Simulator::new(&loaded).unwrap());
            let mut r = rng(16);
            for _ in 0..1000 {
                let x = random_input(&mut r, &spec.schema);
                let (ya, yb) = (a.run(&x).unwrap(), b.run(&x).unwrap());
                ensure(ya == yb, || format!("{name} {v} at {x:?}: {ya:?} vs {yb:?}"))?;
            }
            programs += 1;
        }
    }
    Ok(format!("{programs} programs identical on 1000 inputs each"))
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 9] = [
        ("tree-exactness", 60, tree_exactness),
        ("decision-table", 60, decision_tables),
        ("lb-fidelity", 300, lb_fidelity),
        ("pca-ae-correlation", 60, linear_correlation),
        ("stage-stability", 30, stage_stability),
        ("compression", 30, compression),
        ("bnn-exactness", 10, bnn_exactness),
        ("conversion-speed", 300, conversion_speed),
        ("entries-round-trip", 60, entries_round_trip),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(_) if elapsed > Duration::from_secs(budget) => Err(format!("over the {budget} s budget")),
            o => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("{tag} {name} ({:.2} s / {budget} s): {detail}", elapsed.as_secs_f64());
        failed += outcome.is_err() as usize;
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
