//! Artifacts derived from a program: P4 source and entry files.

mod entries;
mod p4;

pub use entries::{
    emit_entries, entries_doc, install_entries, load_entries, parse_entries, ActionRef, EntriesDoc, EntryDoc, KeyDoc,
    RegisterValues, TableEntries, ENTRIES_SCHEMA_VERSION,
};
pub use p4::{emit_p4, Arch, FEATURE_ETHERTYPE};
