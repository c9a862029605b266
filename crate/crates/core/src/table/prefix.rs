use crate::error::{Error, Result};
use crate::ir::width_mask;

/// A bit prefix over a fixed-width field: the top `len` bits of `value`
/// (the remaining low bits are zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Prefix {
    pub value: u64,
    pub len: u32,
}

impl Prefix {
    pub fn mask(&self, width: u32) -> u64 {
        if self.len == 0 {
            0
        } else {
            width_mask(width) & !width_mask(width - self.len)
        }
    }

    /// Inclusive value range covered within a `width`-bit field.
    pub fn range(&self, width: u32) -> (u64, u64) {
        (self.value, self.value | width_mask(width - self.len))
    }
}

/// Splits `[lo, hi]` into the minimal set of disjoint aligned prefixes,
/// in ascending order. At most `2·width − 2` prefixes are produced.
pub fn range_to_prefixes(lo: u64, hi: u64, width: u32) -> Result<Vec<Prefix>> {
    if width == 0 || width > 64 {
        return Err(Error::invalid("width", format!("width {width} outside 1..=64")));
    }
    if lo > hi {
        return Err(Error::invalid("range", format!("lo {lo} > hi {hi}")));
    }
    if hi > width_mask(width) {
        return Err(Error::invalid(
            "range",
            format!("hi {hi} does not fit in {width} bits"),
        ));
    }
    let mut out = Vec::new();
    let mut cur = lo as u128;
    let end = hi as u128;
    while cur <= end {
        // largest aligned block starting at `cur` that stays inside the range
        let mut size_bits = if cur == 0 { width } else { (cur.trailing_zeros()).min(width) };
        while cur + (1u128 << size_bits) - 1 > end {
            size_bits -= 1;
        }
        out.push(Prefix {
            value: cur as u64,
            len: width - size_bits,
        });
        cur += 1u128 << size_bits;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(
            range_to_prefixes(0, 5, 3).unwrap(),
            vec![Prefix { value: 0b000, len: 1 }, Prefix { value: 0b100, len: 2 }]
        );
        assert_eq!(range_to_prefixes(0, 7, 3).unwrap(), vec![Prefix { value: 0, len: 0 }]);
        assert_eq!(range_to_prefixes(3, 3, 3).unwrap(), vec![Prefix { value: 3, len: 3 }]);
        assert_eq!(range_to_prefixes(0, u64::MAX, 64).unwrap(), vec![Prefix { value: 0, len: 0 }]);
        assert!(range_to_prefixes(4, 3, 3).is_err());
        assert!(range_to_prefixes(0, 8, 3).is_err());
    }

    #[test]
    fn worst_case_count() {
        for w in 2..=12u32 {
            let n = range_to_prefixes(1, (1 << w) - 2, w).unwrap().len();
            assert_eq!(n as u32, 2 * w - 2, "width {w}");
        }
    }

    /// Exhaustive partition check over every range of small widths.
    #[test]
    fn partition_exhaustive_small_widths() {
        for w in 1..=6u32 {
            let max = (1u64 << w) - 1;
            for lo in 0..=max {
                for hi in lo..=max {
                    let ps = range_to_prefixes(lo, hi, w).unwrap();
                    assert!(ps.len() as u32 <= (2 * w).saturating_sub(2).max(1));
                    for v in 0..=max {
                        let hits = ps
                            .iter()
                            .filter(|p| v & p.mask(w) == p.value)
                            .count();
                        assert_eq!(hits, usize::from(lo <= v && v <= hi), "w={w} [{lo},{hi}] v={v}");
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn partition_property(w in 1u32..=12, a in any::<u64>(), b in any::<u64>()) {
            let max = (1u64 << w) - 1;
            let (lo, hi) = { let (a, b) = (a & max, b & max); (a.min(b), a.max(b)) };
            let ps = range_to_prefixes(lo, hi, w).unwrap();
            prop_assert!(ps.len() as u32 <= (2 * w).saturating_sub(2).max(1));
            let mut covered = 0u64;
            for p in &ps {
                let (plo, phi) = p.range(w);
                prop_assert!(lo <= plo && phi <= hi);
                covered += phi - plo + 1;
            }
            // disjoint ascending blocks that fit inside the range and sum to its size
            prop_assert_eq!(covered, hi - lo + 1);
            for pair in ps.windows(2) {
                prop_assert!(pair[0].range(w).1 < pair[1].range(w).0);
            }
        }
    }
}
