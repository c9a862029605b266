use std::collections::{HashMap, HashSet};
use std::fmt;

use super::{width_mask, ActionCall, LogicOp, MatchKind, PipelineProgram, ProgramOutput, Table, IR_SCHEMA_VERSION};
use crate::table::MatchKey;

/// One violated invariant, located by table/entry/field name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

struct Checker<'p> {
    p: &'p PipelineProgram,
    widths: HashMap<&'p str, u32>,
    out: Vec<Diagnostic>,
}

impl<'p> Checker<'p> {
    fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.out.push(Diagnostic {
            location: location.into(),
            message: message.into(),
        });
    }

    fn width(&mut self, location: &str, field: &str) -> Option<u32> {
        let w = self.widths.get(field).copied();
        if w.is_none() {
            self.push(location, format!("undeclared field `{field}`"));
        }
        w
    }

    fn fields(&mut self) {
        let mut seen = HashSet::new();
        for f in &self.p.fields {
            let loc = format!("field `{}`", f.name);
            if !seen.insert(f.name.as_str()) {
                self.push(&loc, "declared twice");
            }
            if f.width == 0 || f.width > 64 {
                self.push(&loc, format!("width {} outside 1..=64", f.width));
            }
            self.widths.insert(&f.name, f.width);
        }
        for r in &self.p.registers {
            let loc = format!("register `{}`", r.name);
            if r.width == 0 || r.width > 64 {
                self.push(&loc, format!("width {} outside 1..=64", r.width));
            }
            if let Some(i) = r.values.iter().position(|&v| v & !width_mask(r.width) != 0) {
                self.push(&loc, format!("value {i} wider than {} bits", r.width));
            }
        }
    }

    fn writers(&mut self) {
        let mut writers: HashMap<&str, Vec<String>> = HashMap::new();
        for t in &self.p.tables {
            for f in t.written_fields() {
                writers.entry(f).or_default().push(format!("table `{}`", t.name));
            }
        }
        for (i, op) in self.p.logic.iter().enumerate() {
            writers.entry(op.dst()).or_default().push(format!("logic[{i}]"));
        }
        let inputs: HashSet<&str> = self.p.inputs().map(|f| f.name.as_str()).collect();
        let mut names: Vec<_> = writers.into_iter().collect();
        names.sort();
        for (field, w) in &names {
            if inputs.contains(field) {
                self.push(format!("field `{field}`"), format!("input field written by {}", w.join(", ")));
            } else if w.len() > 1 {
                self.push(format!("field `{field}`"), format!("multiple writers: {}", w.join(", ")));
            }
        }
        let written: HashSet<&str> = names.iter().map(|(f, _)| *f).collect();
        let mut reads: Vec<(String, &str)> = Vec::new();
        for t in &self.p.tables {
            for k in &t.keys {
                reads.push((format!("table `{}`", t.name), &k.field));
            }
        }
        for (i, op) in self.p.logic.iter().enumerate() {
            for f in op.reads() {
                reads.push((format!("logic[{i}]"), f));
            }
        }
        for (loc, f) in reads {
            if self.widths.contains_key(f) && !inputs.contains(f) && !written.contains(f) {
                self.push(loc, format!("reads `{f}` which is never written"));
            }
        }
    }

    fn call(&mut self, t: &Table, loc: &str, call: &ActionCall) {
        let Some(action) = t.actions.get(call.action_id) else {
            self.push(loc, format!("action_id {} out of range", call.action_id));
            return;
        };
        if action.params.len() != call.action_data.len() {
            self.push(
                loc,
                format!(
                    "action `{}` takes {} data words, got {}",
                    action.name,
                    action.params.len(),
                    call.action_data.len()
                ),
            );
            return;
        }
        for (param, &word) in action.params.iter().zip(&call.action_data) {
            if let Some(w) = self.widths.get(param.as_str()) {
                if word & !width_mask(*w) != 0 {
                    self.push(loc, format!("data word {word} wider than field `{param}` ({w} bits)"));
                }
            }
        }
    }

    fn table(&mut self, t: &Table) {
        let tloc = format!("table `{}`", t.name);
        let mut key_widths = Vec::new();
        for k in &t.keys {
            key_widths.push(self.width(&tloc, &k.field));
        }
        if t.keys.iter().filter(|k| k.kind == MatchKind::Lpm).count() > 1 {
            self.push(&tloc, "more than one lpm key");
        }
        let mut action_names = HashSet::new();
        for a in &t.actions {
            if !action_names.insert(a.name.as_str()) {
                self.push(&tloc, format!("action `{}` declared twice", a.name));
            }
            for p in &a.params {
                self.width(&format!("{tloc} action `{}`", a.name), p);
            }
        }
        if let Some(d) = &t.default_action {
            self.call(t, &format!("{tloc} default action"), d);
        }
        let mut priorities = HashSet::new();
        for (i, e) in t.entries.iter().enumerate() {
            let eloc = format!("{tloc} entry {i}");
            if e.keys.len() != t.keys.len() {
                self.push(&eloc, format!("{} keys, table has {}", e.keys.len(), t.keys.len()));
                continue;
            }
            for ((key, spec), width) in e.keys.iter().zip(&t.keys).zip(&key_widths) {
                if key.kind() != spec.kind {
                    self.push(
                        &eloc,
                        format!("key on `{}` is {}, table expects {}", spec.field, key.kind().as_str(), spec.kind.as_str()),
                    );
                }
                let Some(w) = *width else { continue };
                let over = !width_mask(w);
                let bad = match *key {
                    MatchKey::Exact { value } => value & over != 0,
                    MatchKey::Ternary { value, mask } => (value | mask) & over != 0 || value & !mask != 0,
                    MatchKey::Lpm { value, prefix_len } => {
                        prefix_len > w || value & over != 0 || value & !key.value_mask(w).1 != 0
                    }
                };
                if bad {
                    self.push(&eloc, format!("key wider than field `{}` ({w} bits)", spec.field));
                }
            }
            if t.is_ternary() && !priorities.insert(e.priority) {
                self.push(&eloc, format!("duplicate priority {}", e.priority));
            }
            self.call(t, &eloc, &e.call());
        }
    }

    fn logic(&mut self, i: usize, op: &LogicOp) {
        let loc = format!("logic[{i}] {}", op.name());
        self.width(&loc, op.dst());
        for f in op.reads() {
            self.width(&loc, f);
        }
        match op {
            LogicOp::RegRead { register, index, .. } => match self.p.registers.iter().find(|r| &r.name == register) {
                None => self.push(&loc, format!("undeclared register `{register}`")),
                Some(r) if *index as usize >= r.values.len() => {
                    self.push(&loc, format!("index {index} outside register `{register}`"))
                }
                Some(_) => {}
            },
            LogicOp::Mux { inputs, .. } if inputs.is_empty() => self.push(&loc, "no inputs"),
            LogicOp::ArgMax { srcs, .. } | LogicOp::ArgMin { srcs, .. } | LogicOp::VoteCount { srcs, .. }
                if srcs.is_empty() =>
            {
                self.push(&loc, "no sources")
            }
            _ => {}
        }
    }
}

/// Lists every violated program invariant; empty iff the program is valid.
pub fn check_program(p: &PipelineProgram) -> Vec<Diagnostic> {
    let mut c = Checker {
        p,
        widths: HashMap::new(),
        out: Vec::new(),
    };
    if p.schema_version != IR_SCHEMA_VERSION {
        c.push("program", format!("schema_version {} (expected {IR_SCHEMA_VERSION})", p.schema_version));
    }
    c.fields();
    let mut names = HashSet::new();
    for t in &p.tables {
        if !names.insert(t.name.as_str()) {
            c.push(format!("table `{}`", t.name), "declared twice");
        }
        c.table(t);
    }
    for (i, op) in p.logic.iter().enumerate() {
        c.logic(i, op);
    }
    c.writers();
    match &p.output {
        ProgramOutput::Label { field } => {
            c.width("output", field);
        }
        ProgramOutput::Vector { fields, .. } => {
            for f in fields {
                c.width("output", f);
            }
        }
    }
    if c.out.is_empty() {
        if let Err(e) = super::stage_schedule(p) {
            c.push("program", e.to_string());
        }
    }
    c.out
}
