//! P4-16 source for the v1model architecture.
//!
//! Features arrive in a `features_t` header behind Ethernet (EtherType
//! 0x88b5); the result is written to a `result_t` header and the packet is
//! reflected to its ingress port. Intermediate fields live in metadata.
//! Table contents and register values are installed by the control plane
//! from the entries file.

use std::collections::HashSet;
use std::fmt::Write;

use crate::error::{Error, Result};
use crate::ir::{check_program, stage_schedule, Node, Operand, PipelineProgram, ProgramOutput, Table};
use crate::ir::{Cmp, LogicOp};

pub const FEATURE_ETHERTYPE: u16 = 0x88b5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Arch {
    #[default]
    V1Model,
}

struct Emitter<'a> {
    p: &'a PipelineProgram,
    out: String,
}

fn byte_pad(bits: u32) -> u32 {
    (8 - bits % 8) % 8
}

impl Emitter<'_> {
    fn line(&mut self, indent: usize, text: impl AsRef<str>) {
        for _ in 0..indent {
            self.out.push_str("    ");
        }
        self.out.push_str(text.as_ref());
        self.out.push('\n');
    }

    fn width(&self, field: &str) -> u32 {
        self.p.field_width(field).expect("checked program declares every field")
    }

    /// Lvalue or rvalue expression for a field.
    fn r(&self, field: &str) -> String {
        match self.p.field(field) {
            Some(f) if f.input => format!("hdr.features.{field}"),
            _ => format!("meta.{field}"),
        }
    }

    fn operand(&self, o: &Operand, width: u32) -> String {
        match o {
            Operand::Field(f) if self.width(f) == width => self.r(f),
            Operand::Field(f) => format!("(bit<{width}>){}", self.r(f)),
            Operand::Const(c) => format!("{width}w{c}"),
        }
    }

    fn operand_width(&self, o: &Operand) -> u32 {
        match o {
            Operand::Field(f) => self.width(f),
            Operand::Const(c) => crate::ir::bits_for(*c),
        }
    }

    fn headers(&mut self) {
        let p = self.p;
        self.line(0, "header ethernet_t {");
        self.line(1, "bit<48> dst_addr;");
        self.line(1, "bit<48> src_addr;");
        self.line(1, "bit<16> ether_type;");
        self.line(0, "}");
        self.line(0, "");
        let inputs: Vec<_> = p.inputs().collect();
        if !inputs.is_empty() {
            self.line(0, "header features_t {");
            for f in &inputs {
                self.line(1, format!("bit<{}> {};", f.width, f.name));
            }
            let pad = byte_pad(inputs.iter().map(|f| f.width).sum());
            if pad > 0 {
                self.line(1, format!("bit<{pad}> pad;"));
            }
            self.line(0, "}");
            self.line(0, "");
        }
        let results = self.result_fields();
        if !results.is_empty() {
            self.line(0, "header result_t {");
            for (name, w) in &results {
                self.line(1, format!("bit<{w}> {name};"));
            }
            self.line(0, "}");
            self.line(0, "");
        }
        self.line(0, "struct headers_t {");
        self.line(1, "ethernet_t ethernet;");
        if !inputs.is_empty() {
            self.line(1, "features_t features;");
        }
        if !results.is_empty() {
            self.line(1, "result_t result;");
        }
        self.line(0, "}");
        self.line(0, "");
        self.line(0, "struct metadata_t {");
        for f in p.fields.iter().filter(|f| !f.input) {
            self.line(1, format!("bit<{}> {};", f.width, f.name));
        }
        self.line(0, "}");
        self.line(0, "");
    }

    /// Result header fields, each widened to whole bytes.
    fn result_fields(&self) -> Vec<(String, u32)> {
        let round = |w: u32| w + byte_pad(w);
        match &self.p.output {
            ProgramOutput::Label { field } => vec![("label".into(), round(self.width(field)).max(8))],
            ProgramOutput::Vector { fields, .. } => fields
                .iter()
                .enumerate()
                .map(|(i, f)| (format!("out_{i}"), round(self.width(f))))
                .collect(),
        }
    }

    fn parser(&mut self) {
        let has_features = self.p.inputs().next().is_some();
        self.line(0, "parser TwParser(packet_in pkt, out headers_t hdr, inout metadata_t meta, inout standard_metadata_t std_meta) {");
        self.line(1, "state start {");
        self.line(2, "pkt.extract(hdr.ethernet);");
        if has_features {
            self.line(2, "transition select(hdr.ethernet.ether_type) {");
            self.line(3, format!("0x{FEATURE_ETHERTYPE:04x}: parse_features;"));
            self.line(3, "default: accept;");
            self.line(2, "}");
            self.line(1, "}");
            self.line(0, "");
            self.line(1, "state parse_features {");
            self.line(2, "pkt.extract(hdr.features);");
            self.line(2, "transition accept;");
        } else {
            self.line(2, "transition accept;");
        }
        self.line(1, "}");
        self.line(0, "}");
        self.line(0, "");
        self.line(0, "control TwVerifyChecksum(inout headers_t hdr, inout metadata_t meta) {");
        self.line(1, "apply { }");
        self.line(0, "}");
        self.line(0, "");
    }

    fn registers(&mut self) {
        for r in &self.p.registers {
            self.line(1, format!("register<bit<{}>>({}) {};", r.width, r.values.len().max(1), r.name));
        }
        if !self.p.registers.is_empty() {
            self.line(0, "");
        }
    }

    fn actions(&mut self) {
        let mut seen = HashSet::new();
        for t in &self.p.tables {
            for a in &t.actions {
                if !seen.insert(a.name.clone()) {
                    continue;
                }
                let params: Vec<String> =
                    a.params.iter().map(|f| format!("bit<{}> {f}", self.width(f))).collect();
                self.line(1, format!("action {}({}) {{", a.name, params.join(", ")));
                for f in &a.params {
                    self.line(2, format!("{} = {f};", self.r(f)));
                }
                self.line(1, "}");
                self.line(0, "");
            }
        }
    }

    fn table(&mut self, t: &Table) {
        self.line(1, format!("table {} {{", t.name));
        if !t.keys.is_empty() {
            self.line(2, "key = {");
            for k in &t.keys {
                self.line(3, format!("{}: {};", self.r(&k.field), k.kind.as_str()));
            }
            self.line(2, "}");
        }
        self.line(2, "actions = {");
        for a in &t.actions {
            self.line(3, format!("{};", a.name));
        }
        self.line(3, "NoAction;");
        self.line(2, "}");
        self.line(2, format!("size = {};", t.entries.len().max(1)));
        match &t.default_action {
            Some(call) => {
                let a = &t.actions[call.action_id];
                let args: Vec<String> = a
                    .params
                    .iter()
                    .zip(&call.action_data)
                    .map(|(f, v)| format!("{}w{v}", self.width(f)))
                    .collect();
                self.line(2, format!("default_action = {}({});", a.name, args.join(", ")));
            }
            None => self.line(2, "default_action = NoAction();"),
        }
        self.line(1, "}");
        self.line(0, "");
    }

    fn if_else(&mut self, indent: usize, cond: String, dst: &str, then: String, otherwise: String) {
        self.line(indent, format!("if ({cond}) {{"));
        self.line(indent + 1, format!("{dst} = {then};"));
        self.line(indent, "} else {");
        self.line(indent + 1, format!("{dst} = {otherwise};"));
        self.line(indent, "}");
    }

    /// Running best over `srcs`, strict comparison so ties keep the lower index.
    fn arg_select(&mut self, indent: usize, dst: &str, srcs: &[String], better: Cmp) {
        let d = self.r(dst);
        let dw = self.width(dst);
        let w = srcs.iter().map(|s| self.width(s)).max().unwrap_or(1);
        let best = format!("best_{dst}");
        self.line(indent, "{");
        self.line(indent + 1, format!("bit<{w}> {best} = {};", self.operand(&Operand::field(&srcs[0]), w)));
        self.line(indent + 1, format!("{d} = {dw}w0;"));
        for (i, s) in srcs.iter().enumerate().skip(1) {
            let v = self.operand(&Operand::field(s), w);
            self.line(indent + 1, format!("if ({v} {} {best}) {{", better.symbol()));
            self.line(indent + 2, format!("{best} = {v};"));
            self.line(indent + 2, format!("{d} = {dw}w{i};"));
            self.line(indent + 1, "}");
        }
        self.line(indent, "}");
    }

    fn logic(&mut self, indent: usize, op: &LogicOp) {
        let dst = op.dst().to_string();
        let d = self.r(&dst);
        let dw = self.width(&dst);
        match op {
            LogicOp::Sum { srcs, .. } => {
                let terms: Vec<String> = srcs.iter().map(|s| self.operand(s, dw)).collect();
                let rhs = if terms.is_empty() { format!("{dw}w0") } else { terms.join(" + ") };
                self.line(indent, format!("{d} = {rhs};"));
            }
            LogicOp::Compare { lhs, cmp, rhs, .. } => {
                let w = self.operand_width(lhs).max(self.operand_width(rhs));
                let cond = format!("{} {} {}", self.operand(lhs, w), cmp.symbol(), self.operand(rhs, w));
                self.if_else(indent, cond, &d, format!("{dw}w1"), format!("{dw}w0"));
            }
            LogicOp::Select { cond, then, otherwise, .. } => {
                let c = format!("{} != 0", self.r(cond));
                let (a, b) = (self.operand(then, dw), self.operand(otherwise, dw));
                self.if_else(indent, c, &d, a, b);
            }
            LogicOp::Mux { index, inputs, .. } => {
                let idx = self.r(index);
                let iw = self.width(index);
                for (i, input) in inputs.iter().enumerate() {
                    let kw = if i == 0 { "if" } else { "} else if" };
                    self.line(indent, format!("{kw} ({idx} == {iw}w{i}) {{"));
                    self.line(indent + 1, format!("{d} = {};", self.operand(input, dw)));
                }
                if inputs.is_empty() {
                    self.line(indent, format!("{d} = {dw}w0;"));
                } else {
                    self.line(indent, "} else {");
                    self.line(indent + 1, format!("{d} = {dw}w0;"));
                    self.line(indent, "}");
                }
            }
            LogicOp::Xnor { a, b, .. } => {
                let (a, b) = (self.operand(&Operand::field(a), dw), self.operand(&Operand::field(b), dw));
                self.line(indent, format!("{d} = ~({a} ^ {b});"));
            }
            LogicOp::Popcount { src, .. } => {
                let s = self.r(src);
                let bits: Vec<String> = (0..self.width(src)).map(|i| format!("(bit<{dw}>){s}[{i}:{i}]")).collect();
                self.line(indent, format!("{d} = {};", bits.join(" + ")));
            }
            LogicOp::Sign { src, threshold, .. } => {
                let w = self.width(src).max(crate::ir::bits_for(*threshold));
                let cond = format!("{} >= {w}w{threshold}", self.operand(&Operand::field(src), w));
                self.if_else(indent, cond, &d, format!("{dw}w1"), format!("{dw}w0"));
            }
            LogicOp::Concat { srcs, .. } => {
                let parts: Vec<String> = srcs.iter().map(|s| self.r(s)).collect();
                let total: u32 = srcs.iter().map(|s| self.width(s)).sum();
                let rhs = parts.join(" ++ ");
                if total == dw {
                    self.line(indent, format!("{d} = {rhs};"));
                } else {
                    self.line(indent, format!("{d} = (bit<{dw}>)({rhs});"));
                }
            }
            LogicOp::RegRead { register, index, .. } => {
                self.line(indent, format!("{register}.read({d}, 32w{index});"));
            }
            LogicOp::ArgMax { srcs, .. } => self.arg_select(indent, &dst, srcs, Cmp::Gt),
            LogicOp::ArgMin { srcs, .. } => self.arg_select(indent, &dst, srcs, Cmp::Lt),
            LogicOp::VoteCount { srcs, n_classes, .. } => {
                let cw = crate::ir::bits_for(srcs.len() as u64);
                self.line(indent, "{");
                let counts: Vec<String> = (0..*n_classes).map(|c| format!("votes_{dst}_{c}")).collect();
                for (c, name) in counts.iter().enumerate() {
                    self.line(indent + 1, format!("bit<{cw}> {name} = {cw}w0;"));
                    for s in srcs {
                        let sw = self.width(s);
                        self.line(indent + 1, format!("if ({} == {sw}w{c}) {{ {name} = {name} + {cw}w1; }}", self.r(s)));
                    }
                }
                let best = format!("best_{dst}");
                self.line(indent + 1, format!("bit<{cw}> {best} = {};", counts[0]));
                self.line(indent + 1, format!("{d} = {dw}w0;"));
                for (c, name) in counts.iter().enumerate().skip(1) {
                    self.line(indent + 1, format!("if ({name} > {best}) {{"));
                    self.line(indent + 2, format!("{best} = {name};"));
                    self.line(indent + 2, format!("{d} = {dw}w{c};"));
                    self.line(indent + 1, "}");
                }
                self.line(indent, "}");
            }
        }
    }

    fn ingress(&mut self) -> Result<()> {
        self.line(0, "control TwIngress(inout headers_t hdr, inout metadata_t meta, inout standard_metadata_t std_meta) {");
        self.registers();
        self.actions();
        for t in &self.p.tables {
            self.table(t);
        }
        self.line(1, "apply {");
        let has_features = self.p.inputs().next().is_some();
        let body = if has_features {
            self.line(2, "if (hdr.features.isValid()) {");
            3
        } else {
            2
        };
        let schedule = stage_schedule(self.p)?;
        for (s, nodes) in schedule.stages().iter().enumerate() {
            self.line(body, format!("// stage {s}"));
            for node in nodes {
                match *node {
                    Node::Table(i) => self.line(body, format!("{}.apply();", self.p.tables[i].name)),
                    Node::Logic(i) => self.logic(body, &self.p.logic[i]),
                }
            }
        }
        let results = self.result_fields();
        if !results.is_empty() {
            self.line(body, "hdr.result.setValid();");
            let sources: Vec<String> = match &self.p.output {
                ProgramOutput::Label { field } => vec![field.clone()],
                ProgramOutput::Vector { fields, .. } => fields.clone(),
            };
            for ((name, w), src) in results.iter().zip(&sources) {
                let v = self.operand(&Operand::field(src), *w);
                self.line(body, format!("hdr.result.{name} = {v};"));
            }
        }
        self.line(body, "std_meta.egress_spec = std_meta.ingress_port;");
        if has_features {
            self.line(2, "}");
        }
        self.line(1, "}");
        self.line(0, "}");
        self.line(0, "");
        Ok(())
    }

    fn tail(&mut self) {
        let has_features = self.p.inputs().next().is_some();
        let has_result = !self.result_fields().is_empty();
        self.line(0, "control TwEgress(inout headers_t hdr, inout metadata_t meta, inout standard_metadata_t std_meta) {");
        self.line(1, "apply { }");
        self.line(0, "}");
        self.line(0, "");
        self.line(0, "control TwComputeChecksum(inout headers_t hdr, inout metadata_t meta) {");
        self.line(1, "apply { }");
        self.line(0, "}");
        self.line(0, "");
        self.line(0, "control TwDeparser(packet_out pkt, in headers_t hdr) {");
        self.line(1, "apply {");
        self.line(2, "pkt.emit(hdr.ethernet);");
        if has_features {
            self.line(2, "pkt.emit(hdr.features);");
        }
        if has_result {
            self.line(2, "pkt.emit(hdr.result);");
        }
        self.line(1, "}");
        self.line(0, "}");
        self.line(0, "");
        self.line(
            0,
            "V1Switch(TwParser(), TwVerifyChecksum(), TwIngress(), TwEgress(), TwComputeChecksum(), TwDeparser()) main;",
        );
    }
}

/// Emits P4-16 source for `p`. Output is a pure function of the program.
pub fn emit_p4(p: &PipelineProgram, arch: Arch) -> Result<String> {
    let Arch::V1Model = arch;
    let diags = check_program(p);
    if !diags.is_empty() {
        let msgs: Vec<String> = diags.iter().map(ToString::to_string).collect();
        return Err(Error::Program(msgs.join("; ")));
    }
    let mut e = Emitter { p, out: String::new() };
    let _ = writeln!(e.out, "// {}: family {}, variant {}", p.name, p.family, p.variant);
    e.line(0, "#include <core.p4>");
    e.line(0, "#include <v1model.p4>");
    e.line(0, "");
    e.headers();
    e.parser();
    e.ingress()?;
    e.tail();
    Ok(e.out)
}
