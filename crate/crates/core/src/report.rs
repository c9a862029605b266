//! Resource accounting for converted programs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ir::{stage_schedule, PipelineProgram, Table};

/// Per-target limits. Overruns become report warnings, never errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardwareLimits {
    pub max_stages: usize,
    pub max_tables_per_stage: usize,
    pub max_entries_per_table: usize,
    pub max_action_bits: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// No limits.
    #[default]
    Software,
    /// Limits of a typical switch ASIC pipeline.
    Hardware,
}

impl Profile {
    pub fn limits(self) -> Option<HardwareLimits> {
        match self {
            Profile::Software => None,
            Profile::Hardware => Some(HardwareLimits {
                max_stages: 12,
                max_tables_per_stage: 16,
                max_entries_per_table: 65_536,
                max_action_bits: 1024,
            }),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Software => "software",
            Profile::Hardware => "hardware",
        })
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "software" => Ok(Profile::Software),
            "hardware" => Ok(Profile::Hardware),
            _ => Err(Error::invalid("profile", format!("unknown profile {s:?} (expected software or hardware)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub name: String,
    /// `exact`, `ternary`, `lpm`, `mixed`, or `keyless`.
    pub match_kind: String,
    pub entries: usize,
    pub has_default: bool,
    pub key_bits: u32,
    /// Widest action's data bits.
    pub action_bits: u32,
    pub stage: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub program: String,
    pub family: String,
    pub variant: String,
    pub tables: Vec<TableReport>,
    /// Installed entries, not counting default actions.
    pub total_entries: usize,
    pub default_actions: usize,
    pub stages: usize,
    pub max_key_bits: u32,
    pub max_action_bits: u32,
    pub register_bits: u64,
    pub logic_ops: usize,
    pub profile: Profile,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

fn match_kind(t: &Table) -> String {
    let mut kinds = t.keys.iter().map(|k| k.kind);
    match kinds.next() {
        None => "keyless".into(),
        Some(first) if kinds.all(|k| k == first) => first.as_str().into(),
        Some(_) => "mixed".into(),
    }
}

pub fn resource_report(p: &PipelineProgram) -> Result<ResourceReport> {
    let schedule = stage_schedule(p)?;
    let width = |f: &str| p.field_width(f).unwrap_or(0);
    let tables: Vec<TableReport> = p
        .tables
        .iter()
        .enumerate()
        .map(|(i, t)| TableReport {
            name: t.name.clone(),
            match_kind: match_kind(t),
            entries: t.entries.len(),
            has_default: t.default_action.is_some(),
            key_bits: t.keys.iter().map(|k| width(&k.field)).sum(),
            action_bits: t
                .actions
                .iter()
                .map(|a| a.params.iter().map(|f| width(f)).sum::<u32>())
                .max()
                .unwrap_or(0),
            stage: schedule.table_stage[i],
        })
        .collect();
    Ok(ResourceReport {
        program: p.name.clone(),
        family: p.family.clone(),
        variant: p.variant.clone(),
        total_entries: tables.iter().map(|t| t.entries).sum(),
        default_actions: tables.iter().filter(|t| t.has_default).count(),
        stages: schedule.n_stages,
        max_key_bits: tables.iter().map(|t| t.key_bits).max().unwrap_or(0),
        max_action_bits: tables.iter().map(|t| t.action_bits).max().unwrap_or(0),
        register_bits: p.registers.iter().map(|r| r.width as u64 * r.values.len() as u64).sum(),
        logic_ops: p.logic.len(),
        tables,
        profile: Profile::Software,
        warnings: Vec::new(),
        config: None,
    })
}

impl ResourceReport {
    /// Re-evaluates warnings against `profile`.
    pub fn with_profile(mut self, profile: Profile) -> Self {
        self.profile = profile;
        self.warnings.clear();
        let Some(lim) = profile.limits() else { return self };
        if self.stages > lim.max_stages {
            self.warnings.push(format!("{} logical stages exceed the {}-stage pipeline", self.stages, lim.max_stages));
        }
        let mut per_stage = vec![0usize; self.stages];
        for t in &self.tables {
            per_stage[t.stage] += 1;
            if t.entries > lim.max_entries_per_table {
                self.warnings.push(format!(
                    "table `{}` has {} entries, over the {} per-table limit",
                    t.name, t.entries, lim.max_entries_per_table
                ));
            }
            if t.action_bits > lim.max_action_bits {
                self.warnings.push(format!(
                    "table `{}` writes {} action bits, over the {} limit",
                    t.name, t.action_bits, lim.max_action_bits
                ));
            }
        }
        for (s, &n) in per_stage.iter().enumerate() {
            if n > lim.max_tables_per_stage {
                self.warnings.push(format!("stage {s} holds {n} tables, over the {} limit", lim.max_tables_per_stage));
            }
        }
        self
    }

    pub fn with_config(mut self, config: &impl Serialize) -> Self {
        self.config = serde_json::to_value(config).ok();
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub const CSV_HEADER: &'static str =
        "program,family,variant,tables,total_entries,default_actions,stages,max_key_bits,max_action_bits,register_bits,warnings";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.program,
            self.family,
            self.variant,
            self.tables.len(),
            self.total_entries,
            self.default_actions,
            self.stages,
            self.max_key_bits,
            self.max_action_bits,
            self.register_bits,
            self.warnings.len()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{Action, ActionCall, LogicOp, MatchKind, ProgramOutput, TableEntry, TableKey};
    use crate::table::MatchKey;

    fn chain(n: usize) -> PipelineProgram {
        let mut p = PipelineProgram::new("chain", "dt", "dm");
        let mut prev = p.declare_input("f0", 4);
        for i in 0..n {
            let next = p.declare(format!("x{i}"), 4);
            p.logic.push(LogicOp::Popcount { dst: next.clone(), src: prev });
            prev = next;
        }
        let mut t = Table::new(
            "t",
            vec![TableKey { field: prev.clone(), kind: MatchKind::Exact }],
            vec![Action { name: "set".into(), params: vec!["label".into()] }],
        );
        p.declare("label", 2);
        t.entries.push(TableEntry::new(vec![MatchKey::exact(1)], ActionCall { action_id: 0, action_data: vec![1] }));
        t.default_action = Some(ActionCall { action_id: 0, action_data: vec![0] });
        p.tables.push(t);
        p.output = ProgramOutput::Label { field: "label".into() };
        p
    }

    #[test]
    fn totals_and_widths() {
        let r = resource_report(&chain(2)).unwrap();
        assert_eq!((r.total_entries, r.default_actions, r.stages), (1, 1, 3));
        assert_eq!((r.max_key_bits, r.max_action_bits), (4, 2));
        assert_eq!(r.tables[0].stage, 2);
        assert_eq!(r.tables[0].match_kind, "exact");
        assert!(r.csv_row().starts_with("chain,dt,dm,1,1,1,3,"));
    }

    #[test]
    fn hardware_profile_warns_on_stage_overrun() {
        let r = resource_report(&chain(20)).unwrap().with_profile(Profile::Hardware);
        assert_eq!(r.warnings.len(), 1, "{:?}", r.warnings);
        assert!(r.warnings[0].contains("21 logical stages"));
        assert!(resource_report(&chain(20)).unwrap().with_profile(Profile::Software).warnings.is_empty());
    }
}
