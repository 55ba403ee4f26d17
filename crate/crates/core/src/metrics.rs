//! Whole-model memory and FLOP budgets for a transformer stack.
//!
//! Per block, the attention projections contribute `4d²` weights and the
//! feed-forward up/down projections `2ad²`. Embeddings (`dV`) stay dense.
//! Adapters of rank `r·d` add `8d²r` (two factors per attention matrix)
//! plus `2d²r(1 + a)` for the feed-forward pair.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SlimError};

/// Bits per dense weight.
pub const DENSE_BITS: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchConfig {
    /// Hidden dimension.
    pub d: u64,
    /// Transformer blocks.
    pub n: u64,
    pub vocab: u64,
    /// Feed-forward expansion ratio.
    pub ffn_ratio: f64,
}

const PRESETS: &[(&str, &str)] = &[
    ("opt-125m", include_str!("../presets/opt-125m.json")),
    ("opt-350m", include_str!("../presets/opt-350m.json")),
    ("opt-1.3b", include_str!("../presets/opt-1.3b.json")),
    ("opt-2.7b", include_str!("../presets/opt-2.7b.json")),
    ("opt-6.7b", include_str!("../presets/opt-6.7b.json")),
    ("opt-13b", include_str!("../presets/opt-13b.json")),
    ("llama-2-7b", include_str!("../presets/llama-2-7b.json")),
    ("llama-2-13b", include_str!("../presets/llama-2-13b.json")),
];

impl ArchConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let arch: Self = serde_json::from_str(text)
            .map_err(|e| SlimError::ConfigInvalid(format!("architecture JSON: {e}")))?;
        arch.validate()?;
        Ok(arch)
    }

    pub fn preset(name: &str) -> Option<Self> {
        PRESETS
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, text)| Self::from_json(text).expect("bundled preset is valid"))
    }

    pub fn preset_names() -> impl Iterator<Item = &'static str> {
        PRESETS.iter().map(|(k, _)| *k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0
            || self.n == 0
            || self.vocab == 0
            || !(self.ffn_ratio.is_finite() && self.ffn_ratio >= 1.0)
        {
            return Err(SlimError::ConfigInvalid(format!(
                "architecture must be positive with ffn_ratio >= 1: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    /// Kept fraction of block weights.
    pub density: f64,
    pub weight_bits: u32,
    pub dense_bits: u32,
    /// Adapter rank as a fraction of `d`.
    pub rank_ratio: f64,
    pub adapter_bits: u32,
    /// Index metadata per weight (0 by default).
    pub sparsity_metadata_bits: f64,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            density: 0.5,
            weight_bits: 4,
            dense_bits: 16,
            rank_ratio: 0.0,
            adapter_bits: 16,
            sparsity_metadata_bits: 0.0,
        }
    }
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.density > 0.0
            && self.density <= 1.0
            && self.weight_bits >= 1
            && self.weight_bits <= self.dense_bits
            && (0.0..1.0).contains(&self.rank_ratio)
            && self.adapter_bits >= 1
            && self.sparsity_metadata_bits >= 0.0
            && self.sparsity_metadata_bits.is_finite();
        if ok {
            Ok(())
        } else {
            Err(SlimError::ConfigInvalid(format!(
                "invalid compression scheme: {self:?}"
            )))
        }
    }
}

struct Terms {
    block: f64,
    adapter: f64,
    embed: f64,
    n: f64,
}

fn terms(arch: &ArchConfig, scheme: &SchemeConfig) -> Result<Terms> {
    arch.validate()?;
    scheme.validate()?;
    let d = arch.d as f64;
    let a = arch.ffn_ratio;
    let d2 = d * d;
    let r = scheme.rank_ratio;
    Ok(Terms {
        block: d2 * (4.0 + 2.0 * a),
        adapter: 8.0 * d2 * r + 2.0 * d2 * r * (1.0 + a),
        embed: d * arch.vocab as f64,
        n: arch.n as f64,
    })
}

/// Compressed size over dense size (lower is better).
pub fn memory_reduction(arch: &ArchConfig, scheme: &SchemeConfig) -> Result<f64> {
    let t = terms(arch, scheme)?;
    let dense_bits = scheme.dense_bits as f64;
    let weight_scale =
        (scheme.weight_bits as f64 * scheme.density + scheme.sparsity_metadata_bits) / dense_bits;
    let adapter_scale = scheme.adapter_bits as f64 / dense_bits;
    let dense = t.n * t.block + t.embed;
    let compressed = t.n * (t.block * weight_scale + t.adapter * adapter_scale) + t.embed;
    Ok(compressed / dense)
}

/// Dense FLOPs over compressed FLOPs (higher is better). Bit-widths do not
/// enter: arithmetic stays in floating point.
pub fn flop_reduction(arch: &ArchConfig, scheme: &SchemeConfig) -> Result<f64> {
    let t = terms(arch, scheme)?;
    let dense = t.n * t.block + t.embed;
    let compressed = t.n * (t.block * scheme.density + t.adapter) + t.embed;
    Ok(dense / compressed)
}
