//! Fixed-point quantizer for lookup-table action data.
//!
//! Each real value becomes an offset-binary word `offset + round(v · scale)`,
//! saturated into `[0, ceil(2^n_bits / n_terms) - 1]`. Summing `n_terms` such
//! words therefore always fits in `n_bits`, and a sum of words decodes as
//! `(Σ words − n_terms · offset) / scale`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerConfig {
    /// Action-data word width.
    pub n_bits: u32,
    /// How many words get summed together downstream.
    pub n_terms: u32,
    /// Whether the quantized range includes negative values.
    pub signed: bool,
    pub scale: f64,
    /// Word that represents real zero (may lie outside the word range).
    pub offset: i64,
}

impl QuantizerConfig {
    /// Largest word value, `ceil(2^n_bits / n_terms) - 1`.
    pub fn max_word(n_bits: u32, n_terms: u32) -> u64 {
        let span = 1u128 << n_bits;
        let n = n_terms.max(1) as u128;
        (span.div_ceil(n) - 1) as u64
    }

    pub fn word_limit(&self) -> u64 {
        Self::max_word(self.n_bits, self.n_terms)
    }

    /// Affine fit mapping `[min, max]` onto the full word range. When
    /// `min >= 0` the range is anchored at zero instead.
    pub fn fit(min: f64, max: f64, n_bits: u32, n_terms: u32) -> Self {
        assert!(n_bits >= 2 && n_terms >= 1 && n_bits <= 64);
        let top = Self::max_word(n_bits, n_terms) as f64;
        let signed = min < 0.0;
        let lo = if signed { min } else { 0.0 };
        let hi = max.max(lo);
        let scale = if hi > lo { top / (hi - lo) } else { 1.0 };
        let offset = if signed { (-lo * scale).round() as i64 } else { 0 };
        QuantizerConfig {
            n_bits,
            n_terms,
            signed,
            scale,
            offset,
        }
    }

    /// Like [`fit`](Self::fit) but with the scale rounded down to a power of
    /// two, so integer (and dyadic) inputs quantize without rounding error.
    pub fn fit_lossless(min: f64, max: f64, n_bits: u32, n_terms: u32) -> Self {
        let mut cfg = Self::fit(min, max, n_bits, n_terms);
        cfg.scale = 2f64.powi(cfg.scale.log2().floor() as i32);
        let lo = if cfg.signed { min } else { 0.0 };
        cfg.offset = (-lo * cfg.scale).round() as i64;
        cfg
    }

    pub fn quantize(&self, v: f64) -> u64 {
        quantize_map(v, self)
    }

    /// Decodes a sum of `terms` words.
    pub fn decode_sum(&self, sum: u64, terms: u32) -> f64 {
        (sum as i128 - self.offset as i128 * terms as i128) as f64 / self.scale
    }
}

/// Monotone, saturating fixed-point map of `v` into the configured domain.
pub fn quantize_map(v: f64, cfg: &QuantizerConfig) -> u64 {
    let top = cfg.word_limit() as f64;
    let word = (v * cfg.scale).round() + cfg.offset as f64;
    if word.is_nan() || word <= 0.0 {
        0
    } else if word >= top {
        top as u64
    } else {
        word as u64
    }
}
