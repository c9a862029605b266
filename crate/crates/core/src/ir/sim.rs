//! Deterministic reference execution of a [`PipelineProgram`].
//!
//! Lookup semantics: an exact table hits on hash-equal keys; a ternary table
//! takes the highest-priority matching entry (earliest on ties); an LPM table
//! takes the entry with the most significant key bits (earliest on ties). A
//! miss runs the default action, and a miss without one is an error.

use std::collections::HashMap;

use super::schedule::Node;
use super::{check_program, stage_schedule, width_mask, LogicOp, MatchKind, Operand, PipelineProgram, ProgramOutput};
use crate::error::{Error, Result};
use crate::table::MatchKey;

/// Tables whose concatenated key is at most this wide get a dense lookup array.
const DENSE_KEY_BITS: u32 = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum SimOutput {
    Label(u64),
    Vector { words: Vec<u64>, values: Option<Vec<f64>> },
}

impl SimOutput {
    pub fn label(&self) -> Option<u64> {
        match self {
            SimOutput::Label(l) => Some(*l),
            SimOutput::Vector { .. } => None,
        }
    }

    /// Decoded values when a dequantizer is declared, raw words otherwise.
    pub fn values(&self) -> Vec<f64> {
        match self {
            SimOutput::Label(l) => vec![*l as f64],
            SimOutput::Vector { values: Some(v), .. } => v.clone(),
            SimOutput::Vector { words, .. } => words.iter().map(|&w| w as f64).collect(),
        }
    }
}

#[derive(Debug, Clone)]
enum Src {
    Field(usize),
    Const(u64),
}

#[derive(Debug, Clone)]
struct Write {
    field: usize,
    mask: u64,
}

#[derive(Debug, Clone)]
enum Lookup {
    /// Entry index (or `usize::MAX` for a miss) per concatenated key value.
    Dense(Vec<usize>),
    Exact(HashMap<Box<[u64]>, usize>),
    /// Entry indices in resolution order; the first match wins.
    Scan(Vec<usize>),
}

#[derive(Debug, Clone)]
struct CompiledTable {
    name: String,
    keys: Vec<(usize, u32)>,
    /// Per entry, per key: (value, mask).
    patterns: Vec<Vec<(u64, u64)>>,
    lookup: Lookup,
    /// Per entry: (action id, data).
    calls: Vec<(usize, Vec<u64>)>,
    default: Option<(usize, Vec<u64>)>,
    actions: Vec<Vec<Write>>,
}

impl CompiledTable {
    fn matches(&self, entry: usize, fields: &[u64]) -> bool {
        self.patterns[entry]
            .iter()
            .zip(&self.keys)
            .all(|(&(v, m), &(f, _))| fields[f] & m == v)
    }

    fn resolve(&self, fields: &[u64], scratch: &mut Vec<u64>) -> Option<usize> {
        match &self.lookup {
            Lookup::Dense(slots) => {
                let mut k = 0u64;
                for &(f, w) in &self.keys {
                    k = (k << w) | fields[f];
                }
                let e = slots[k as usize];
                (e != usize::MAX).then_some(e)
            }
            Lookup::Exact(map) => {
                scratch.clear();
                scratch.extend(self.keys.iter().map(|&(f, _)| fields[f]));
                map.get(scratch.as_slice()).copied()
            }
            Lookup::Scan(order) => order.iter().copied().find(|&e| self.matches(e, fields)),
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Sum(Vec<Src>),
    Compare(Src, super::Cmp, Src),
    Select(usize, Src, Src),
    Mux(usize, Vec<Src>),
    Xnor(usize, usize),
    Popcount(usize),
    Sign(usize, u64),
    Concat(Vec<(usize, u32)>),
    Const(u64),
    ArgMax(Vec<usize>),
    ArgMin(Vec<usize>),
    VoteCount(Vec<usize>, u32),
}

#[derive(Debug, Clone)]
enum Step {
    Table(CompiledTable),
    Logic { dst: usize, mask: u64, op: Op },
}

/// A validated, pre-indexed program ready for repeated execution.
#[derive(Debug, Clone)]
pub struct Simulator {
    program: PipelineProgram,
    n_fields: usize,
    inputs: Vec<(usize, u32)>,
    steps: Vec<Step>,
}

impl Simulator {
    /// Validates `program` and prepares it for execution.
    pub fn new(program: &PipelineProgram) -> Result<Self> {
        let diags = check_program(program);
        if !diags.is_empty() {
            let list: Vec<String> = diags.iter().map(ToString::to_string).collect();
            return Err(Error::Program(list.join("; ")));
        }
        let schedule = stage_schedule(program)?;
        let index: HashMap<&str, usize> = program
            .fields
            .iter()
            .enumerate()
            .map(|(i, f)| (f.name.as_str(), i))
            .collect();
        let width = |f: &str| program.fields[index[f]].width;
        let inputs = program
            .fields
            .iter()
            .enumerate()
            .filter(|(_, f)| f.input)
            .map(|(i, f)| (i, f.width))
            .collect();
        let src = |o: &Operand| match o {
            Operand::Field(f) => Src::Field(index[f.as_str()]),
            Operand::Const(c) => Src::Const(*c),
        };
        let mut steps = Vec::new();
        for node in schedule.order() {
            steps.push(match node {
                Node::Table(t) => Step::Table(compile_table(program, t, &index)),
                Node::Logic(i) => {
                    let op = &program.logic[i];
                    let dst = index[op.dst()];
                    let f = |n: &String| index[n.as_str()];
                    let compiled = match op {
                        LogicOp::Sum { srcs, .. } => Op::Sum(srcs.iter().map(src).collect()),
                        LogicOp::Compare { lhs, cmp, rhs, .. } => Op::Compare(src(lhs), *cmp, src(rhs)),
                        LogicOp::Select { cond, then, otherwise, .. } => Op::Select(f(cond), src(then), src(otherwise)),
                        LogicOp::Mux { index: sel, inputs, .. } => Op::Mux(f(sel), inputs.iter().map(src).collect()),
                        LogicOp::Xnor { a, b, .. } => Op::Xnor(f(a), f(b)),
                        LogicOp::Popcount { src, .. } => Op::Popcount(f(src)),
                        LogicOp::Sign { src, threshold, .. } => Op::Sign(f(src), *threshold),
                        LogicOp::Concat { srcs, .. } => Op::Concat(srcs.iter().map(|s| (f(s), width(s))).collect()),
                        LogicOp::RegRead { register, index: at, .. } => {
                            let r = program.registers.iter().find(|r| &r.name == register).expect("checked");
                            Op::Const(r.values[*at as usize])
                        }
                        LogicOp::ArgMax { srcs, .. } => Op::ArgMax(srcs.iter().map(f).collect()),
                        LogicOp::ArgMin { srcs, .. } => Op::ArgMin(srcs.iter().map(f).collect()),
                        LogicOp::VoteCount { srcs, n_classes, .. } => {
                            Op::VoteCount(srcs.iter().map(f).collect(), *n_classes)
                        }
                    };
                    Step::Logic {
                        dst,
                        mask: width_mask(program.fields[dst].width),
                        op: compiled,
                    }
                }
            });
        }
        Ok(Simulator {
            program: program.clone(),
            n_fields: program.fields.len(),
            inputs,
            steps,
        })
    }

    pub fn program(&self) -> &PipelineProgram {
        &self.program
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    /// Runs one feature vector through the pipeline.
    pub fn run(&self, x: &[u64]) -> Result<SimOutput> {
        let fields = self.execute(x)?;
        let idx = |name: &str| self.program.fields.iter().position(|f| f.name == name).expect("checked");
        Ok(match &self.program.output {
            ProgramOutput::Label { field } => SimOutput::Label(fields[idx(field)]),
            ProgramOutput::Vector { fields: out, dequant } => {
                let words: Vec<u64> = out.iter().map(|f| fields[idx(f)]).collect();
                let values = dequant.as_ref().map(|d| words.iter().map(|&w| d.decode(w)).collect());
                SimOutput::Vector { words, values }
            }
        })
    }

    /// Label output; errors if the program emits a vector.
    pub fn predict(&self, x: &[u64]) -> Result<u64> {
        self.run(x)?
            .label()
            .ok_or_else(|| Error::Simulation("program emits a vector, not a label".into()))
    }

    /// Final value of every declared field, in declaration order.
    pub fn execute(&self, x: &[u64]) -> Result<Vec<u64>> {
        if x.len() != self.inputs.len() {
            return Err(Error::Simulation(format!(
                "expected {} input values, got {}",
                self.inputs.len(),
                x.len()
            )));
        }
        let mut fields = vec![0u64; self.n_fields];
        for (i, (&(f, w), &v)) in self.inputs.iter().zip(x).enumerate() {
            if v & !width_mask(w) != 0 {
                return Err(Error::FeatureDomain {
                    index: i,
                    value: v,
                    bit_width: w,
                });
            }
            fields[f] = v;
        }
        let mut scratch = Vec::new();
        for step in &self.steps {
            match step {
                Step::Table(t) => {
                    let (action, data) = match t.resolve(&fields, &mut scratch) {
                        Some(e) => (&t.calls[e].0, &t.calls[e].1),
                        None => match &t.default {
                            Some((a, d)) => (a, d),
                            None => {
                                return Err(Error::Simulation(format!(
                                    "table `{}`: no entry matches and no default action",
                                    t.name
                                )))
                            }
                        },
                    };
                    for (w, &word) in t.actions[*action].iter().zip(data) {
                        fields[w.field] = word & w.mask;
                    }
                }
                Step::Logic { dst, mask, op } => {
                    let value = eval(op, &fields);
                    fields[*dst] = value & mask;
                }
            }
        }
        Ok(fields)
    }
}

fn read(s: &Src, fields: &[u64]) -> u64 {
    match *s {
        Src::Field(f) => fields[f],
        Src::Const(c) => c,
    }
}

fn eval(op: &Op, fields: &[u64]) -> u64 {
    match op {
        Op::Sum(srcs) => srcs.iter().fold(0u64, |acc, s| acc.wrapping_add(read(s, fields))),
        Op::Compare(a, cmp, b) => u64::from(cmp.eval(read(a, fields), read(b, fields))),
        Op::Select(c, t, o) => {
            if fields[*c] != 0 {
                read(t, fields)
            } else {
                read(o, fields)
            }
        }
        Op::Mux(sel, inputs) => inputs.get(fields[*sel] as usize).map_or(0, |s| read(s, fields)),
        Op::Xnor(a, b) => !(fields[*a] ^ fields[*b]),
        Op::Popcount(s) => fields[*s].count_ones() as u64,
        Op::Sign(s, t) => u64::from(fields[*s] >= *t),
        Op::Concat(srcs) => srcs.iter().fold(0u64, |acc, &(f, w)| {
            if w >= 64 {
                fields[f]
            } else {
                (acc << w) | fields[f]
            }
        }),
        Op::Const(c) => *c,
        Op::ArgMax(srcs) => {
            let mut best = 0;
            for (i, &s) in srcs.iter().enumerate() {
                if fields[s] > fields[srcs[best]] {
                    best = i;
                }
            }
            best as u64
        }
        Op::ArgMin(srcs) => {
            let mut best = 0;
            for (i, &s) in srcs.iter().enumerate() {
                if fields[s] < fields[srcs[best]] {
                    best = i;
                }
            }
            best as u64
        }
        Op::VoteCount(srcs, n) => {
            let mut counts = vec![0u32; *n as usize];
            for &s in srcs {
                if let Some(c) = counts.get_mut(fields[s] as usize) {
                    *c += 1;
                }
            }
            let mut best = 0;
            for (i, &c) in counts.iter().enumerate() {
                if c > counts[best] {
                    best = i;
                }
            }
            best as u64
        }
    }
}

fn compile_table(p: &PipelineProgram, t: usize, index: &HashMap<&str, usize>) -> CompiledTable {
    let table = &p.tables[t];
    let keys: Vec<(usize, u32)> = table
        .keys
        .iter()
        .map(|k| {
            let i = index[k.field.as_str()];
            (i, p.fields[i].width)
        })
        .collect();
    let patterns: Vec<Vec<(u64, u64)>> = table
        .entries
        .iter()
        .map(|e| e.keys.iter().zip(&keys).map(|(k, &(_, w))| k.value_mask(w)).collect())
        .collect();
    let calls = table
        .entries
        .iter()
        .map(|e| (e.action_id, e.action_data.clone()))
        .collect();
    let actions = table
        .actions
        .iter()
        .map(|a| {
            a.params
                .iter()
                .map(|f| {
                    let i = index[f.as_str()];
                    Write {
                        field: i,
                        mask: width_mask(p.fields[i].width),
                    }
                })
                .collect()
        })
        .collect();

    let mut order: Vec<usize> = (0..table.entries.len()).collect();
    let has_lpm = table.keys.iter().any(|k| k.kind == MatchKind::Lpm);
    if has_lpm {
        let spec = |e: usize| -> u32 {
            table.entries[e]
                .keys
                .iter()
                .zip(&keys)
                .map(|(k, &(_, w))| k.specificity(w))
                .sum()
        };
        order.sort_by_key(|&e| std::cmp::Reverse(spec(e)));
    } else if table.is_ternary() {
        order.sort_by_key(|&e| std::cmp::Reverse(table.entries[e].priority));
    }
    let all_exact = table.keys.iter().all(|k| k.kind == MatchKind::Exact);

    let mut compiled = CompiledTable {
        name: table.name.clone(),
        keys,
        patterns,
        lookup: Lookup::Scan(Vec::new()),
        calls,
        default: table.default_action.as_ref().map(|d| (d.action_id, d.action_data.clone())),
        actions,
    };
    let key_bits: u32 = compiled.keys.iter().map(|k| k.1).sum();
    compiled.lookup = if key_bits <= DENSE_KEY_BITS && !table.entries.is_empty() {
        Lookup::Dense(dense_slots(&compiled, &order))
    } else if all_exact {
        let mut map = HashMap::new();
        for (e, entry) in table.entries.iter().enumerate() {
            let key: Box<[u64]> = entry
                .keys
                .iter()
                .map(|k| match k {
                    MatchKey::Exact { value } => *value,
                    _ => unreachable!("all keys exact"),
                })
                .collect();
            map.entry(key).or_insert(e);
        }
        Lookup::Exact(map)
    } else {
        Lookup::Scan(order)
    };
    compiled
}

/// Resolves every concatenated key value once using the scan order.
fn dense_slots(t: &CompiledTable, order: &[usize]) -> Vec<usize> {
    let bits: u32 = t.keys.iter().map(|k| k.1).sum();
    let mut slots = vec![usize::MAX; 1usize << bits];
    let mut fields = vec![0u64; t.keys.iter().map(|k| k.0 + 1).max().unwrap_or(0)];
    for (k, slot) in slots.iter_mut().enumerate() {
        let mut rest = k as u64;
        for &(f, w) in t.keys.iter().rev() {
            fields[f] = rest & width_mask(w);
            rest >>= w;
        }
        if let Some(&e) = order.iter().find(|&&e| t.matches(e, &fields)) {
            *slot = e;
        }
    }
    slots
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{Action, ActionCall, Table, TableEntry, TableKey};
    use proptest::prelude::*;

    fn program(kind: MatchKind, width: u32, entries: Vec<TableEntry>, default: Option<u64>) -> PipelineProgram {
        let mut p = PipelineProgram::new("t", "dt", "eb");
        p.declare_input("x", width);
        p.declare_input("y", 4);
        p.declare("out", 8);
        let mut t = Table::new(
            "t",
            vec![
                TableKey { field: "x".into(), kind },
                TableKey { field: "y".into(), kind: MatchKind::Exact },
            ],
            vec![Action { name: "set".into(), params: vec!["out".into()] }],
        );
        t.entries = entries;
        t.default_action = default.map(|d| ActionCall { action_id: 0, action_data: vec![d] });
        p.tables.push(t);
        p.output = ProgramOutput::Label { field: "out".into() };
        p
    }

    /// Plain linear-scan reference with no precompilation.
    fn reference(p: &PipelineProgram, x: u64, y: u64) -> Option<u64> {
        let t = &p.tables[0];
        let w = p.fields[0].width;
        let hits = t
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.keys[0].matches(x, w) && e.keys[1].matches(y, 4));
        let best = match t.keys[0].kind {
            MatchKind::Lpm => hits.max_by_key(|(i, e)| (e.keys[0].specificity(w), std::cmp::Reverse(*i))),
            _ => hits.max_by_key(|(i, e)| (e.priority, std::cmp::Reverse(*i))),
        };
        best.map(|(_, e)| e.action_data[0])
            .or_else(|| t.default_action.as_ref().map(|d| d.action_data[0]))
    }

    fn check_against_reference(p: &PipelineProgram) {
        let sim = Simulator::new(p).unwrap();
        let w = p.fields[0].width;
        for x in 0..(1u64 << w) {
            for y in 0..16 {
                match reference(p, x, y) {
                    Some(v) => assert_eq!(sim.predict(&[x, y]).unwrap(), v, "x={x} y={y}"),
                    None => assert!(sim.predict(&[x, y]).is_err()),
                }
            }
        }
    }

    fn entry_strategy(kind: MatchKind, width: u32) -> impl Strategy<Value = TableEntry> {
        (any::<u64>(), 0..=width, any::<u64>(), 0u64..16, 0u64..200).prop_map(move |(v, len, m, y, d)| {
            let v = v & width_mask(width);
            let key = match kind {
                MatchKind::Ternary => MatchKey::ternary(v, m & width_mask(width)),
                MatchKind::Lpm => {
                    let p = crate::table::Prefix { value: 0, len };
                    MatchKey::Lpm { value: v & p.mask(width), prefix_len: len }
                }
                MatchKind::Exact => MatchKey::exact(v),
            };
            TableEntry::new(vec![key, MatchKey::exact(y)], ActionCall { action_id: 0, action_data: vec![d] })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn ternary_matches_linear_scan(width in 1u32..=10, entries in proptest::collection::vec(entry_strategy(MatchKind::Ternary, 10), 0..24), default in proptest::option::of(0u64..200)) {
            let mut entries: Vec<TableEntry> = entries.into_iter().map(|mut e| {
                if let MatchKey::Ternary { value, mask } = e.keys[0] {
                    e.keys[0] = MatchKey::ternary(value & width_mask(width), mask & width_mask(width));
                }
                e
            }).collect();
            // unique priorities in scrambled order
            for (i, e) in entries.iter_mut().enumerate() {
                e.priority = (i as u32 * 37) % 101 + 1;
            }
            let p = program(MatchKind::Ternary, width, entries, default);
            check_against_reference(&p);
        }

        #[test]
        fn lpm_matches_linear_scan(entries in proptest::collection::vec(entry_strategy(MatchKind::Lpm, 8), 0..24), default in proptest::option::of(0u64..200)) {
            let p = program(MatchKind::Lpm, 8, entries, default);
            check_against_reference(&p);
        }
    }

    #[test]
    fn wide_exact_tables_use_hashing() {
        let mut p = program(MatchKind::Exact, 20, vec![], Some(7));
        p.tables[0].entries.push(TableEntry::new(
            vec![MatchKey::exact(123_456), MatchKey::exact(3)],
            ActionCall { action_id: 0, action_data: vec![42] },
        ));
        let sim = Simulator::new(&p).unwrap();
        assert_eq!(sim.predict(&[123_456, 3]).unwrap(), 42);
        assert_eq!(sim.predict(&[123_456, 4]).unwrap(), 7);
        assert!(matches!(sim.predict(&[1 << 20, 0]), Err(Error::FeatureDomain { index: 0, .. })));
    }

    #[test]
    fn constant_program() {
        let p = program(MatchKind::Ternary, 3, vec![], Some(5));
        let sim = Simulator::new(&p).unwrap();
        for x in 0..8 {
            assert_eq!(sim.predict(&[x, 0]).unwrap(), 5);
        }
    }

    #[test]
    fn miss_without_default_is_an_error() {
        let p = program(MatchKind::Exact, 3, vec![], None);
        let err = Simulator::new(&p).unwrap().predict(&[1, 1]).unwrap_err();
        assert!(err.to_string().contains("no default"));
    }

    #[test]
    fn logic_semantics() {
        let mut p = PipelineProgram::new("l", "bnn", "dm");
        p.declare_input("a", 4);
        p.declare_input("b", 4);
        for (name, w) in [("x", 4), ("pc", 3), ("s", 1), ("cat", 8), ("am", 2), ("vc", 2), ("mux", 4), ("sum", 3)] {
            p.declare(name, w);
        }
        p.logic = vec![
            LogicOp::Xnor { dst: "x".into(), a: "a".into(), b: "b".into() },
            LogicOp::Popcount { dst: "pc".into(), src: "x".into() },
            LogicOp::Sign { dst: "s".into(), src: "pc".into(), threshold: 2 },
            LogicOp::Concat { dst: "cat".into(), srcs: vec!["a".into(), "b".into()] },
            LogicOp::ArgMax { dst: "am".into(), srcs: vec!["a".into(), "b".into(), "a".into()] },
            LogicOp::VoteCount { dst: "vc".into(), srcs: vec!["s".into(), "s".into(), "am".into()], n_classes: 3 },
            LogicOp::Mux { dst: "mux".into(), index: "s".into(), inputs: vec![Operand::field("a"), Operand::field("b")] },
            LogicOp::Sum { dst: "sum".into(), srcs: vec![Operand::field("a"), Operand::field("b")] },
        ];
        p.output = ProgramOutput::Vector {
            fields: vec!["x", "pc", "s", "cat", "am", "vc", "mux", "sum"].into_iter().map(String::from).collect(),
            dequant: None,
        };
        let sim = Simulator::new(&p).unwrap();
        let SimOutput::Vector { words, .. } = sim.run(&[0b1010, 0b1010]).unwrap() else { panic!() };
        // identical inputs: xnor all ones, popcount 4 (in 3 bits), sign 1
        assert_eq!(words, vec![0b1111, 4, 1, 0b1010_1010, 0, 1, 0b1010, (10 + 10) & 7]);
        let SimOutput::Vector { words, .. } = sim.run(&[0b1010, 0b0101]).unwrap() else { panic!() };
        assert_eq!(&words[..3], &[0, 0, 0]);
        // argmax tie between a and a goes to index 0; b wins when larger
        let SimOutput::Vector { words, .. } = sim.run(&[1, 2]).unwrap() else { panic!() };
        assert_eq!(words[4], 1);
    }
}
