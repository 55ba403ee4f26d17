//! Symmetric weight quantization.
//!
//! Per-tensor codes use the grid `α · 2^(1-q) · k` with
//! `k ∈ [-2^(q-1), 2^(q-1) - 1]`. Grouped codes use the AbsMax grid
//! `scale / (2^(q-1) - 1) · k` with `|k| ≤ 2^(q-1) - 1`, one scale per
//! contiguous row-major run of `group_size` elements.

mod activation;
mod fp8;
mod search;
mod symmetric;

pub use activation::{activation_aware_scale, ChannelScaling};
pub use fp8::{fp8_fake_quantize, Fp8Format};
pub use search::{dense_grid_search, estimate_error, slimquant_search, ScaleSearch, SearchParams};
pub use symmetric::{absmax_alpha, dequantize, group_absmax_quantize, quantize_symmetric};

use crate::error::{Result, SlimError};

pub const DEFAULT_GROUP_SIZE: usize = 128;

/// Integer codes and their scale(s).
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    rows: usize,
    cols: usize,
    codes: Vec<i8>,
    scales: Vec<f32>,
    group_size: Option<usize>,
    bits: u32,
}

pub(crate) fn check_bits(q: u32) -> Result<()> {
    if (2..=8).contains(&q) {
        Ok(())
    } else {
        Err(SlimError::UnsupportedBitwidth(q))
    }
}

impl QuantizedTensor {
    /// Rebuilds a tensor from stored parts, checking every invariant.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        codes: Vec<i8>,
        scales: Vec<f32>,
        group_size: Option<usize>,
        bits: u32,
    ) -> Result<Self> {
        check_bits(bits)?;
        let bad = |msg: String| Err(SlimError::SchemaViolation(msg));
        if codes.len() != rows * cols {
            return bad(format!("{} codes for a {rows}x{cols} tensor", codes.len()));
        }
        let expected_scales = match group_size {
            None => 1,
            Some(0) => return bad("group size must be positive".into()),
            Some(g) => codes.len().div_ceil(g),
        };
        if scales.len() != expected_scales {
            return bad(format!(
                "expected {expected_scales} scales, found {}",
                scales.len()
            ));
        }
        if scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return bad("scales must be positive and finite".into());
        }
        let (lo, hi) = code_range(bits, group_size.is_some());
        if codes.iter().any(|&c| (c as i32) < lo || (c as i32) > hi) {
            return bad(format!("code outside [{lo}, {hi}]"));
        }
        Ok(Self {
            rows,
            cols,
            codes,
            scales,
            group_size,
            bits,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn codes(&self) -> &[i8] {
        &self.codes
    }

    pub fn scales(&self) -> &[f32] {
        &self.scales
    }

    /// `None` for a single per-tensor scale.
    pub fn group_size(&self) -> Option<usize> {
        self.group_size
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }
}

/// Inclusive code range.
pub(crate) fn code_range(bits: u32, grouped: bool) -> (i32, i32) {
    let half = 1i32 << (bits - 1);
    if grouped {
        (-(half - 1), half - 1)
    } else {
        (-half, half - 1)
    }
}
