//! Target-agnostic match/action program representation.
//!
//! A program is a set of metadata fields, match/action tables, registers and
//! straight-line logic operations. Every field has at most one writer (a table
//! whose actions set it, or a logic op whose destination it is), so def-use
//! edges form a DAG whose levels are the logical pipeline stages.

mod check;
mod schedule;
mod sim;

use serde::{Deserialize, Serialize};

pub use check::{check_program, Diagnostic};
pub use schedule::{stage_schedule, Node, StageSchedule};
pub use sim::{SimOutput, Simulator};

pub use crate::table::MatchKey;

pub const IR_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDecl {
    pub name: String,
    pub width: u32,
    /// Input fields carry the feature vector, in declaration order.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub input: bool,
    /// Model feature name of an input, when it differs from `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<String>,
}

impl FieldDecl {
    /// The column name datasets use for this field.
    pub fn column(&self) -> &str {
        self.feature.as_deref().unwrap_or(&self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    Exact,
    Ternary,
    Lpm,
}

impl MatchKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchKind::Exact => "exact",
            MatchKind::Ternary => "ternary",
            MatchKind::Lpm => "lpm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableKey {
    pub field: String,
    pub kind: MatchKind,
}

/// An action assigns its data words, in order, to the listed fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Action {
    pub name: String,
    pub params: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionCall {
    pub action_id: usize,
    pub action_data: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub keys: Vec<MatchKey>,
    pub priority: u32,
    pub action_id: usize,
    pub action_data: Vec<u64>,
}

impl TableEntry {
    pub fn new(keys: Vec<MatchKey>, call: ActionCall) -> Self {
        TableEntry {
            keys,
            priority: 0,
            action_id: call.action_id,
            action_data: call.action_data,
        }
    }

    pub fn call(&self) -> ActionCall {
        ActionCall {
            action_id: self.action_id,
            action_data: self.action_data.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table {
    pub name: String,
    pub keys: Vec<TableKey>,
    pub actions: Vec<Action>,
    pub entries: Vec<TableEntry>,
    #[serde(default)]
    pub default_action: Option<ActionCall>,
}

impl Table {
    pub fn new(name: impl Into<String>, keys: Vec<TableKey>, actions: Vec<Action>) -> Self {
        Table {
            name: name.into(),
            keys,
            actions,
            entries: Vec::new(),
            default_action: None,
        }
    }

    pub fn is_ternary(&self) -> bool {
        self.keys.iter().any(|k| k.kind == MatchKind::Ternary)
    }

    /// Assigns unique descending priorities in current entry order, so the
    /// first entry wins among overlapping ternary matches.
    pub fn number_priorities(&mut self) {
        let n = self.entries.len() as u32;
        for (i, e) in self.entries.iter_mut().enumerate() {
            e.priority = n - i as u32;
        }
    }

    /// Fields written by any of the table's actions.
    pub fn written_fields(&self) -> impl Iterator<Item = &str> {
        let mut seen: Vec<&str> = Vec::new();
        for a in &self.actions {
            for p in &a.params {
                if !seen.contains(&p.as_str()) {
                    seen.push(p);
                }
            }
        }
        seen.into_iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Register {
    pub name: String,
    pub width: u32,
    pub values: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operand {
    Field(String),
    Const(u64),
}

impl Operand {
    pub fn field(name: impl Into<String>) -> Self {
        Operand::Field(name.into())
    }

    pub fn as_field(&self) -> Option<&str> {
        match self {
            Operand::Field(f) => Some(f),
            Operand::Const(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cmp {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl Cmp {
    pub fn eval(self, a: u64, b: u64) -> bool {
        match self {
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Eq => a == b,
            Cmp::Ne => a != b,
            Cmp::Ge => a >= b,
            Cmp::Gt => a > b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Eq => "==",
            Cmp::Ne => "!=",
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
        }
    }
}

/// Final-stage logic. All arithmetic wraps at the destination width.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum LogicOp {
    Sum { dst: String, srcs: Vec<Operand> },
    Compare { dst: String, lhs: Operand, cmp: Cmp, rhs: Operand },
    Select { dst: String, cond: String, then: Operand, otherwise: Operand },
    /// `dst = inputs[index]`, or 0 when `index` is out of range.
    Mux { dst: String, index: String, inputs: Vec<Operand> },
    Xnor { dst: String, a: String, b: String },
    Popcount { dst: String, src: String },
    /// `dst = 1` iff `src >= threshold`.
    Sign { dst: String, src: String, threshold: u64 },
    /// Concatenation, first source in the most significant bits.
    Concat { dst: String, srcs: Vec<String> },
    RegRead { dst: String, register: String, index: u32 },
    /// Index of the largest source; ties go to the lowest index.
    ArgMax { dst: String, srcs: Vec<String> },
    ArgMin { dst: String, srcs: Vec<String> },
    /// Most frequent source value in `0..n_classes`; ties go to the lowest.
    VoteCount { dst: String, srcs: Vec<String>, n_classes: u32 },
}

impl LogicOp {
    pub fn dst(&self) -> &str {
        match self {
            LogicOp::Sum { dst, .. }
            | LogicOp::Compare { dst, .. }
            | LogicOp::Select { dst, .. }
            | LogicOp::Mux { dst, .. }
            | LogicOp::Xnor { dst, .. }
            | LogicOp::Popcount { dst, .. }
            | LogicOp::Sign { dst, .. }
            | LogicOp::Concat { dst, .. }
            | LogicOp::RegRead { dst, .. }
            | LogicOp::ArgMax { dst, .. }
            | LogicOp::ArgMin { dst, .. }
            | LogicOp::VoteCount { dst, .. } => dst,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LogicOp::Sum { .. } => "sum",
            LogicOp::Compare { .. } => "compare",
            LogicOp::Select { .. } => "select",
            LogicOp::Mux { .. } => "mux",
            LogicOp::Xnor { .. } => "xnor",
            LogicOp::Popcount { .. } => "popcount",
            LogicOp::Sign { .. } => "sign",
            LogicOp::Concat { .. } => "concat",
            LogicOp::RegRead { .. } => "reg_read",
            LogicOp::ArgMax { .. } => "argmax",
            LogicOp::ArgMin { .. } => "argmin",
            LogicOp::VoteCount { .. } => "vote_count",
        }
    }

    /// Fields this op reads.
    pub fn reads(&self) -> Vec<&str> {
        fn ops(v: &[Operand]) -> impl Iterator<Item = &str> {
            v.iter().filter_map(Operand::as_field)
        }
        match self {
            LogicOp::Sum { srcs, .. } => ops(srcs).collect(),
            LogicOp::Compare { lhs, rhs, .. } => ops(std::slice::from_ref(lhs))
                .chain(ops(std::slice::from_ref(rhs)))
                .collect(),
            LogicOp::Select { cond, then, otherwise, .. } => std::iter::once(cond.as_str())
                .chain(then.as_field())
                .chain(otherwise.as_field())
                .collect(),
            LogicOp::Mux { index, inputs, .. } => std::iter::once(index.as_str()).chain(ops(inputs)).collect(),
            LogicOp::Xnor { a, b, .. } => vec![a, b],
            LogicOp::Popcount { src, .. } | LogicOp::Sign { src, .. } => vec![src],
            LogicOp::Concat { srcs, .. }
            | LogicOp::ArgMax { srcs, .. }
            | LogicOp::ArgMin { srcs, .. }
            | LogicOp::VoteCount { srcs, .. } => srcs.iter().map(String::as_str).collect(),
            LogicOp::RegRead { .. } => Vec::new(),
        }
    }
}

/// Affine decoding of accumulator words back to real values:
/// `real = (word - zero) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dequant {
    pub scale: f64,
    pub zero: i64,
}

impl Dequant {
    pub fn decode(&self, word: u64) -> f64 {
        (word as i128 - self.zero as i128) as f64 / self.scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProgramOutput {
    Label {
        field: String,
    },
    Vector {
        fields: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dequant: Option<Dequant>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineProgram {
    pub schema_version: u32,
    pub name: String,
    pub family: String,
    pub variant: String,
    pub fields: Vec<FieldDecl>,
    #[serde(default)]
    pub registers: Vec<Register>,
    pub tables: Vec<Table>,
    #[serde(default)]
    pub logic: Vec<LogicOp>,
    pub output: ProgramOutput,
}

impl PipelineProgram {
    pub fn new(name: impl Into<String>, family: impl Into<String>, variant: impl Into<String>) -> Self {
        PipelineProgram {
            schema_version: IR_SCHEMA_VERSION,
            name: name.into(),
            family: family.into(),
            variant: variant.into(),
            fields: Vec::new(),
            registers: Vec::new(),
            tables: Vec::new(),
            logic: Vec::new(),
            output: ProgramOutput::Vector {
                fields: Vec::new(),
                dequant: None,
            },
        }
    }

    pub fn declare(&mut self, name: impl Into<String>, width: u32) -> String {
        let name = name.into();
        self.fields.push(FieldDecl {
            name: name.clone(),
            width,
            input: false,
            feature: None,
        });
        name
    }

    pub fn declare_input(&mut self, name: impl Into<String>, width: u32) -> String {
        let name = name.into();
        self.fields.push(FieldDecl {
            name: name.clone(),
            width,
            input: true,
            feature: None,
        });
        name
    }

    pub fn field(&self, name: &str) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn field_width(&self, name: &str) -> Option<u32> {
        self.field(name).map(|f| f.width)
    }

    pub fn inputs(&self) -> impl Iterator<Item = &FieldDecl> {
        self.fields.iter().filter(|f| f.input)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn total_entries(&self) -> usize {
        self.tables.iter().map(|t| t.entries.len()).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serializes")
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let p: PipelineProgram = serde_path_to_error::deserialize(de).map_err(|e| crate::Error::Json {
            path: e.path().to_string(),
            message: e.into_inner().to_string(),
        })?;
        if p.schema_version != IR_SCHEMA_VERSION {
            return Err(crate::Error::SchemaVersion {
                found: p.schema_version as u64,
                expected: IR_SCHEMA_VERSION,
            });
        }
        Ok(p)
    }
}

/// Bits needed to hold values `0..=max` (at least 1).
pub fn bits_for(max: u64) -> u32 {
    (64 - max.leading_zeros()).max(1)
}

pub(crate) fn width_mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}
