//! Exact-to-ternary and exact-to-LPM table transformers.
//!
//! Both work by run compression: consecutive key values that map to the same
//! action call are merged, and each run is expanded into aligned prefixes.
//! Keys absent from the exact table stay unmatched.

use std::collections::BTreeMap;

use super::{range_to_prefixes, MatchKey};
use crate::error::{Error, Result};
use crate::ir::{ActionCall, MatchKind, TableEntry};

fn runs(entries: &[TableEntry], width: u32) -> Result<Vec<(u64, u64, ActionCall)>> {
    let mut by_key: BTreeMap<u64, ActionCall> = BTreeMap::new();
    for (i, e) in entries.iter().enumerate() {
        let value = match e.keys.as_slice() {
            [MatchKey::Exact { value }] => *value,
            _ => {
                return Err(Error::invalid(
                    format!("entries[{i}]"),
                    "expected a single exact key",
                ))
            }
        };
        if width < 64 && value >> width != 0 {
            return Err(Error::invalid(
                format!("entries[{i}]"),
                format!("key {value} does not fit in {width} bits"),
            ));
        }
        let call = e.call();
        if let Some(prev) = by_key.insert(value, call.clone()) {
            if prev != call {
                return Err(Error::invalid(
                    format!("entries[{i}]"),
                    format!("conflicting actions for duplicate key {value}"),
                ));
            }
        }
    }
    let mut out: Vec<(u64, u64, ActionCall)> = Vec::new();
    for (value, call) in by_key {
        match out.last_mut() {
            Some((_, hi, c)) if *hi + 1 == value && *c == call => *hi = value,
            _ => out.push((value, value, call)),
        }
    }
    Ok(out)
}

fn transform(entries: &[TableEntry], width: u32, kind: MatchKind) -> Result<Vec<TableEntry>> {
    let mut out = Vec::new();
    for (lo, hi, call) in runs(entries, width)? {
        for p in range_to_prefixes(lo, hi, width)? {
            out.push(TableEntry::new(vec![MatchKey::from_prefix(kind, p, width)], call.clone()));
        }
    }
    Ok(out)
}

/// Rewrites a single-key exact table as ternary entries. Longer masks get
/// higher priority, ties in ascending key order.
pub fn exact_to_ternary(entries: &[TableEntry], width: u32) -> Result<Vec<TableEntry>> {
    let mut out = transform(entries, width, MatchKind::Ternary)?;
    out.sort_by_key(|e| std::cmp::Reverse(e.keys[0].specificity(width)));
    let n = out.len() as u32;
    for (i, e) in out.iter_mut().enumerate() {
        e.priority = n - i as u32;
    }
    Ok(out)
}

/// Rewrites a single-key exact table as LPM entries.
pub fn exact_to_lpm(entries: &[TableEntry], width: u32) -> Result<Vec<TableEntry>> {
    transform(entries, width, MatchKind::Lpm)
}
