//! Shared table-encoding machinery: match keys, range-to-prefix expansion,
//! exact-to-ternary/LPM compression and the fixed-point quantizer used for
//! lookup-based action data.

mod compress;
mod prefix;
mod quantize;

use serde::{Deserialize, Serialize};

pub use compress::{exact_to_lpm, exact_to_ternary};
pub use prefix::{range_to_prefixes, Prefix};
pub use quantize::{quantize_map, QuantizerConfig};

use crate::ir::{width_mask, MatchKind};

/// One key of a table entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MatchKey {
    Exact { value: u64 },
    /// `value` is normalised so that `value & !mask == 0`.
    Ternary { value: u64, mask: u64 },
    Lpm { value: u64, prefix_len: u32 },
}

impl MatchKey {
    pub fn exact(value: u64) -> Self {
        MatchKey::Exact { value }
    }

    pub fn ternary(value: u64, mask: u64) -> Self {
        MatchKey::Ternary {
            value: value & mask,
            mask,
        }
    }

    /// A don't-care ternary key.
    pub fn any() -> Self {
        MatchKey::Ternary { value: 0, mask: 0 }
    }

    pub fn kind(&self) -> MatchKind {
        match self {
            MatchKey::Exact { .. } => MatchKind::Exact,
            MatchKey::Ternary { .. } => MatchKind::Ternary,
            MatchKey::Lpm { .. } => MatchKind::Lpm,
        }
    }

    pub fn from_prefix(kind: MatchKind, prefix: Prefix, width: u32) -> Self {
        match kind {
            MatchKind::Exact => {
                assert_eq!(prefix.len, width, "exact keys need full-length prefixes");
                MatchKey::exact(prefix.value)
            }
            MatchKind::Ternary => MatchKey::ternary(prefix.value, prefix.mask(width)),
            MatchKind::Lpm => MatchKey::Lpm {
                value: prefix.value,
                prefix_len: prefix.len,
            },
        }
    }

    /// Value and mask over a `width`-bit field.
    pub fn value_mask(&self, width: u32) -> (u64, u64) {
        match *self {
            MatchKey::Exact { value } => (value, width_mask(width)),
            MatchKey::Ternary { value, mask } => (value, mask),
            MatchKey::Lpm { value, prefix_len } => {
                let mask = Prefix { value, len: prefix_len }.mask(width);
                (value & mask, mask)
            }
        }
    }

    pub fn matches(&self, field_value: u64, width: u32) -> bool {
        let (value, mask) = self.value_mask(width);
        field_value & mask == value
    }

    /// Number of significant bits; used for longest-prefix resolution.
    pub fn specificity(&self, width: u32) -> u32 {
        match *self {
            MatchKey::Exact { .. } => width,
            MatchKey::Ternary { mask, .. } => (mask & width_mask(width)).count_ones(),
            MatchKey::Lpm { prefix_len, .. } => prefix_len,
        }
    }
}
