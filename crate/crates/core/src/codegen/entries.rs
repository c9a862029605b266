//! Control-plane entry files: table entries, default actions and register
//! initializers, addressed by name.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ir::{ActionCall, PipelineProgram, TableEntry};
use crate::table::MatchKey;

pub const ENTRIES_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntriesDoc {
    pub schema_version: u32,
    pub program: String,
    pub tables: Vec<TableEntries>,
    #[serde(default)]
    pub registers: Vec<RegisterValues>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntries {
    pub name: String,
    pub default_action: Option<ActionRef>,
    pub entries: Vec<EntryDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionRef {
    pub action: String,
    pub action_data: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyDoc {
    pub field: String,
    #[serde(flatten)]
    pub key: MatchKey,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryDoc {
    pub keys: Vec<KeyDoc>,
    pub priority: u32,
    pub action: String,
    pub action_data: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterValues {
    pub name: String,
    pub width: u32,
    pub values: Vec<u64>,
}

pub fn entries_doc(p: &PipelineProgram) -> EntriesDoc {
    let action_ref = |t: &crate::ir::Table, call: &ActionCall| ActionRef {
        action: t.actions[call.action_id].name.clone(),
        action_data: call.action_data.clone(),
    };
    EntriesDoc {
        schema_version: ENTRIES_SCHEMA_VERSION,
        program: p.name.clone(),
        tables: p
            .tables
            .iter()
            .map(|t| TableEntries {
                name: t.name.clone(),
                default_action: t.default_action.as_ref().map(|c| action_ref(t, c)),
                entries: t
                    .entries
                    .iter()
                    .map(|e| EntryDoc {
                        keys: t
                            .keys
                            .iter()
                            .zip(&e.keys)
                            .map(|(k, m)| KeyDoc { field: k.field.clone(), key: *m })
                            .collect(),
                        priority: e.priority,
                        action: t.actions[e.action_id].name.clone(),
                        action_data: e.action_data.clone(),
                    })
                    .collect(),
            })
            .collect(),
        registers: p
            .registers
            .iter()
            .map(|r| RegisterValues { name: r.name.clone(), width: r.width, values: r.values.clone() })
            .collect(),
    }
}

/// Pretty JSON of [`entries_doc`].
pub fn emit_entries(p: &PipelineProgram) -> String {
    serde_json::to_string_pretty(&entries_doc(p)).expect("entries serialize")
}

pub fn parse_entries(text: &str) -> Result<EntriesDoc> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: EntriesDoc = serde_path_to_error::deserialize(de).map_err(|e| Error::Json {
        path: e.path().to_string(),
        message: e.into_inner().to_string(),
    })?;
    if doc.schema_version != ENTRIES_SCHEMA_VERSION {
        return Err(Error::SchemaVersion { found: doc.schema_version as u64, expected: ENTRIES_SCHEMA_VERSION });
    }
    Ok(doc)
}

/// Replaces every entry, default action and register value of `p` with the
/// contents of `doc`. Tables and registers absent from `doc` end up empty.
pub fn install_entries(p: &mut PipelineProgram, doc: &EntriesDoc) -> Result<()> {
    for t in &mut p.tables {
        t.entries.clear();
        t.default_action = None;
    }
    for r in &mut p.registers {
        r.values.clear();
    }
    for (ti, td) in doc.tables.iter().enumerate() {
        let path = |what: String| format!("tables[{ti}]{what}");
        let table = p
            .tables
            .iter_mut()
            .find(|t| t.name == td.name)
            .ok_or_else(|| Error::invalid(path(".name".into()), format!("no table `{}` in program", td.name)))?;
        let action_id = |name: &str, at: String| {
            table
                .actions
                .iter()
                .position(|a| a.name == name)
                .ok_or_else(|| Error::invalid(path(at), format!("table `{}` has no action `{name}`", td.name)))
        };
        let default = match &td.default_action {
            Some(a) => Some(ActionCall {
                action_id: action_id(&a.action, ".default_action".into())?,
                action_data: a.action_data.clone(),
            }),
            None => None,
        };
        let mut entries = Vec::with_capacity(td.entries.len());
        for (ei, e) in td.entries.iter().enumerate() {
            let id = action_id(&e.action, format!(".entries[{ei}].action"))?;
            if e.keys.len() != table.keys.len() || e.keys.iter().zip(&table.keys).any(|(k, tk)| k.field != tk.field) {
                return Err(Error::invalid(
                    path(format!(".entries[{ei}].keys")),
                    format!("keys do not match the fields of table `{}`", td.name),
                ));
            }
            let mut entry = TableEntry::new(
                e.keys.iter().map(|k| k.key).collect(),
                ActionCall { action_id: id, action_data: e.action_data.clone() },
            );
            entry.priority = e.priority;
            entries.push(entry);
        }
        table.entries = entries;
        table.default_action = default;
    }
    for (ri, rd) in doc.registers.iter().enumerate() {
        let reg = p.registers.iter_mut().find(|r| r.name == rd.name).ok_or_else(|| {
            Error::invalid(format!("registers[{ri}].name"), format!("no register `{}` in program", rd.name))
        })?;
        if reg.width != rd.width {
            return Err(Error::invalid(
                format!("registers[{ri}].width"),
                format!("register `{}` is {} bits wide, not {}", rd.name, reg.width, rd.width),
            ));
        }
        reg.values = rd.values.clone();
    }
    Ok(())
}

/// Parses `text` and installs it into a copy of `p`.
pub fn load_entries(p: &PipelineProgram, text: &str) -> Result<PipelineProgram> {
    let doc = parse_entries(text)?;
    let mut out = p.clone();
    install_entries(&mut out, &doc)?;
    Ok(out)
}
