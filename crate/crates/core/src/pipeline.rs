//! Per-layer compression: (optional channel scaling) → quantization →
//! pruning of the quantized weight → low-rank adapter on the total error →
//! (optional) adapter quantization.
//!
//! All error terms are measured in the caller's coordinates: when channel
//! scaling is active the stored weight is `diag(s)·W_c`, and the activation
//! side divides the scaled channels by `s` before the main product. The
//! adapter sees the uncompensated activations, so `W ≈ W_c + L·R` holds for
//! the original weight.

use serde::{Deserialize, Serialize};

use crate::adapter::{
    default_rank, naive_lora, quantize_adapter, saliency_vector, slim_lora, LowRankAdapter,
    SaliencyVector,
};
use crate::error::{Result, SlimError};
use crate::io::CalibrationStats;
use crate::metrics::DENSE_BITS;
use crate::pruner::{
    apply_mask, build_mask, magnitude_scores, wanda_scores, SparsityMask, SparsityPattern,
};
use crate::quantizer::{
    absmax_alpha, activation_aware_scale, dequantize, fp8_fake_quantize, group_absmax_quantize,
    quantize_symmetric, slimquant_search, ChannelScaling, QuantizedTensor, SearchParams,
    DEFAULT_GROUP_SIZE,
};
use crate::tensor::{AbsHistogram, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantMethod {
    Absmax,
    GroupAbsmax,
    SlimQuant,
    /// `SlimQuant` on a channel-scaled weight.
    SlimQuantO,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMethod {
    Wanda,
    Magnitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterMethod {
    Naive,
    Slim,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelScalingParams {
    pub fraction: f32,
    pub factor: f32,
}

impl Default for ChannelScalingParams {
    fn default() -> Self {
        Self {
            fraction: 0.01,
            factor: 2.0,
        }
    }
}

pub const DEFAULT_RANK_RATIO: f32 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCompressionConfig {
    pub quant_method: QuantMethod,
    pub weight_bits: u32,
    /// Group length for `GroupAbsmax`.
    pub group_size: usize,
    pub sparsity: Option<SparsityPattern>,
    pub prune_scores: ScoreMethod,
    pub adapter_method: AdapterMethod,
    /// Adapter rank as a fraction of `min(d_in, d_out)`; `None` uses 0.1
    /// when an adapter is requested.
    pub rank_ratio: Option<f32>,
    pub quantize_adapters: bool,
    pub adapter_bits: u32,
    pub adapter_group_size: usize,
    /// Snap inputs to FP8 in [`layer_output`].
    pub input_fp8: bool,
    /// Always applied for `SlimQuantO` (defaults when unset); optional for
    /// every other method.
    pub channel_scaling: Option<ChannelScalingParams>,
}

impl Default for LayerCompressionConfig {
    fn default() -> Self {
        Self {
            quant_method: QuantMethod::SlimQuant,
            weight_bits: 4,
            group_size: DEFAULT_GROUP_SIZE,
            sparsity: Some(SparsityPattern::SemiStructured { n: 2, m: 4 }),
            prune_scores: ScoreMethod::Wanda,
            adapter_method: AdapterMethod::Slim,
            rank_ratio: None,
            quantize_adapters: false,
            adapter_bits: 4,
            adapter_group_size: DEFAULT_GROUP_SIZE,
            input_fp8: false,
            channel_scaling: None,
        }
    }
}

impl LayerCompressionConfig {
    /// No quantization, pruning or adapter.
    pub fn identity() -> Self {
        Self {
            quant_method: QuantMethod::None,
            sparsity: None,
            adapter_method: AdapterMethod::None,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(SlimError::ConfigInvalid(msg));
        if !(2..=8).contains(&self.weight_bits) {
            return invalid(format!("weight_bits {} outside 2..=8", self.weight_bits));
        }
        if self.group_size == 0 || self.adapter_group_size == 0 {
            return invalid("group sizes must be positive".into());
        }
        if let Some(p) = &self.sparsity {
            p.validate()?;
        }
        match (self.adapter_method, self.rank_ratio) {
            (AdapterMethod::None, Some(_)) => {
                return invalid("rank_ratio given without an adapter".into())
            }
            (AdapterMethod::None, None) if self.quantize_adapters => {
                return invalid("quantize_adapters requires an adapter".into())
            }
            (_, Some(r)) if !(r > 0.0 && r <= 1.0) => {
                return invalid(format!("rank_ratio {r} outside (0, 1]"))
            }
            _ => {}
        }
        if self.quantize_adapters && !(2..=8).contains(&self.adapter_bits) {
            return invalid(format!("adapter_bits {} outside 2..=8", self.adapter_bits));
        }
        if let Some(cs) = &self.channel_scaling {
            if !(cs.fraction > 0.0 && cs.fraction <= 1.0)
                || !(cs.factor.is_finite() && cs.factor > 1.0)
            {
                return invalid(format!(
                    "channel scaling needs fraction in (0, 1] and factor > 1, got {cs:?}"
                ));
            }
        }
        Ok(())
    }

    fn effective_channel_scaling(&self) -> Option<ChannelScalingParams> {
        match (self.quant_method, self.channel_scaling) {
            (_, Some(p)) => Some(p),
            (QuantMethod::SlimQuantO, None) => Some(ChannelScalingParams::default()),
            _ => None,
        }
    }

    pub fn effective_rank_ratio(&self) -> Option<f32> {
        match self.adapter_method {
            AdapterMethod::None => None,
            _ => Some(self.rank_ratio.unwrap_or(DEFAULT_RANK_RATIO)),
        }
    }

    /// Whether compression reads the calibration statistics.
    pub fn needs_calibration(&self) -> bool {
        self.adapter_method == AdapterMethod::Slim
            || self.effective_channel_scaling().is_some()
            || (self.sparsity.is_some() && self.prune_scores == ScoreMethod::Wanda)
    }
}

/// Stored main weight: integer codes or raw values (quantization disabled).
#[derive(Debug, Clone, PartialEq)]
pub enum StoredWeights {
    Quantized(QuantizedTensor),
    Dense(Matrix),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub name: Option<String>,
    pub rows: usize,
    pub cols: usize,
    /// Per-tensor scale chosen by `Absmax`/`SlimQuant*`.
    pub alpha: Option<f32>,
    /// Histogram objective at `alpha` for the searched methods.
    pub search_error: Option<f64>,
    pub rank: Option<usize>,
    pub tool_version: String,
    pub created_unix: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressedLayer {
    pub weights: StoredWeights,
    pub mask: Option<SparsityMask>,
    pub adapter: Option<LowRankAdapter>,
    pub channel_scaling: Option<ChannelScaling>,
    pub config: LayerCompressionConfig,
    pub provenance: Provenance,
}

impl CompressedLayer {
    pub fn d_in(&self) -> usize {
        self.provenance.rows
    }

    pub fn d_out(&self) -> usize {
        self.provenance.cols
    }

    /// The stored weight as real values (channel-scaled if scaling is active).
    pub fn stored_weight(&self) -> Matrix {
        match &self.weights {
            StoredWeights::Quantized(q) => dequantize(q),
            StoredWeights::Dense(m) => m.clone(),
        }
    }

    /// `W_c` in the caller's coordinates.
    pub fn compressed_weight(&self) -> Matrix {
        let w = self.stored_weight();
        match &self.channel_scaling {
            Some(cs) => cs.unscale_weight(&w).expect("scaling matches weight rows"),
            None => w,
        }
    }

    /// `W_c + L·R`.
    pub fn effective_weight(&self) -> Matrix {
        let w_c = self.compressed_weight();
        match &self.adapter {
            Some(a) => w_c.add(&a.product()).expect("adapter matches weight"),
            None => w_c,
        }
    }

    /// Analytic storage cost per weight element, in bits.
    pub fn effective_bits_per_weight(&self) -> f64 {
        let elements = (self.d_in() * self.d_out()) as f64;
        if elements == 0.0 {
            return 0.0;
        }
        let weight_bits = match &self.weights {
            StoredWeights::Quantized(q) => q.bits() as f64,
            StoredWeights::Dense(_) => DENSE_BITS,
        };
        let density = self.mask.as_ref().map_or(1.0, SparsityMask::density);
        let adapter_bits = match &self.adapter {
            Some(a) => {
                let per = match &a.quantized {
                    Some((q, _)) => q.bits() as f64,
                    None => DENSE_BITS,
                };
                (a.left.len() + a.right.len()) as f64 * per
            }
            None => 0.0,
        };
        weight_bits * density + adapter_bits / elements
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.provenance.name = Some(name.into());
        self
    }
}

pub fn compress_layer(
    w: &Matrix,
    stats: &CalibrationStats,
    cfg: &LayerCompressionConfig,
) -> Result<CompressedLayer> {
    cfg.validate()?;
    if w.is_empty() {
        return Err(SlimError::EmptyTensor);
    }
    if stats.d_in != w.rows() {
        return Err(SlimError::ShapeMismatch(format!(
            "calibration covers {} channels, weight has {} input rows",
            stats.d_in,
            w.rows()
        )));
    }
    stats.validate()?;

    let (work, channel_scaling) = match cfg.effective_channel_scaling() {
        Some(p) => {
            let (scaled, scaling) = activation_aware_scale(w, stats, p.fraction, p.factor)?;
            (scaled, Some(scaling))
        }
        None => (w.clone(), None),
    };

    let mut alpha = None;
    let mut search_error = None;
    let quantized = match cfg.quant_method {
        QuantMethod::None => None,
        QuantMethod::Absmax => {
            let a = absmax_alpha(&work)?;
            alpha = Some(a);
            Some(quantize_symmetric(&work, a, cfg.weight_bits)?)
        }
        QuantMethod::GroupAbsmax => Some(group_absmax_quantize(
            &work,
            cfg.group_size,
            cfg.weight_bits,
        )?),
        QuantMethod::SlimQuant | QuantMethod::SlimQuantO => {
            let hist = AbsHistogram::build(&work, None)?;
            let found = slimquant_search(&hist, cfg.weight_bits, SearchParams::default())?;
            log::debug!(
                "scale search: alpha = {}, objective = {:.3e}",
                found.alpha,
                found.error
            );
            alpha = Some(found.alpha);
            search_error = Some(found.error);
            Some(quantize_symmetric(&work, found.alpha, cfg.weight_bits)?)
        }
    };
    let work_q = quantized.as_ref().map_or_else(|| work.clone(), dequantize);
    let unscale = |m: &Matrix| match &channel_scaling {
        Some(cs) => cs.unscale_weight(m),
        None => Ok(m.clone()),
    };
    let w_q = unscale(&work_q)?;

    let mask = match cfg.sparsity {
        Some(pattern) => {
            let scores = match cfg.prune_scores {
                ScoreMethod::Wanda => wanda_scores(&w_q, stats)?,
                ScoreMethod::Magnitude => magnitude_scores(&w_q),
            };
            Some(build_mask(&scores, pattern)?)
        }
        None => None,
    };

    let weights = match (quantized, &mask) {
        (Some(q), Some(mask)) => StoredWeights::Quantized(mask_codes(q, mask)?),
        (Some(q), None) => StoredWeights::Quantized(q),
        (None, Some(mask)) => StoredWeights::Dense(apply_mask(&work, mask)?),
        (None, None) => StoredWeights::Dense(work),
    };
    let w_c = match &mask {
        Some(mask) => apply_mask(&w_q, mask)?,
        None => w_q,
    };

    let rank = cfg
        .effective_rank_ratio()
        .map(|ratio| default_rank(ratio, w.rows(), w.cols()));
    let adapter = match (cfg.adapter_method, rank) {
        (AdapterMethod::Naive, Some(r)) => Some(naive_lora(w, &w_c, r)?),
        (AdapterMethod::Slim, Some(r)) => Some(slim_lora(w, &w_c, &saliency_vector(stats)?, r)?),
        _ => None,
    };
    let adapter = match adapter {
        Some(a) if cfg.quantize_adapters => Some(quantize_adapter(
            &a,
            cfg.adapter_group_size,
            cfg.adapter_bits,
        )?),
        other => other,
    };

    Ok(CompressedLayer {
        weights,
        mask,
        adapter,
        channel_scaling,
        config: cfg.clone(),
        provenance: Provenance {
            name: None,
            rows: w.rows(),
            cols: w.cols(),
            alpha,
            search_error,
            rank,
            tool_version: crate::VERSION.to_string(),
            created_unix: None,
        },
    })
}

fn mask_codes(q: QuantizedTensor, mask: &SparsityMask) -> Result<QuantizedTensor> {
    let codes = q
        .codes()
        .iter()
        .zip(mask.keep_flags())
        .map(|(&c, &keep)| if keep { c } else { 0 })
        .collect();
    QuantizedTensor::from_parts(
        q.rows(),
        q.cols(),
        codes,
        q.scales().to_vec(),
        q.group_size(),
        q.bits(),
    )
}

/// `y = x̂·W_stored + (x'·L)·R` where `x'` is the (optionally FP8-snapped)
/// input and `x̂` is `x'` with scaled channels divided by their factor.
pub fn layer_output(x: &Matrix, layer: &CompressedLayer) -> Result<Matrix> {
    if x.cols() != layer.d_in() {
        return Err(SlimError::ShapeMismatch(format!(
            "input has {} columns, layer expects {}",
            x.cols(),
            layer.d_in()
        )));
    }
    let x = if layer.config.input_fp8 {
        fp8_fake_quantize(x).0
    } else {
        x.clone()
    };
    let main_in = match &layer.channel_scaling {
        Some(cs) => cs.compensate_activations(&x)?,
        None => x.clone(),
    };
    let y = main_in.matmul(&layer.stored_weight())?;
    match &layer.adapter {
        Some(a) => y.add(&a.apply(&x)?),
        None => Ok(y),
    }
}

/// Error summary of a compressed layer. Squared norms are divided by the
/// element count of the matrix they measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub weight_mse: f64,
    pub weighted_weight_mse: f64,
    pub output_mse: f64,
    pub output_mse_no_adapter: f64,
    pub density: f64,
    pub effective_bits_per_weight: f64,
}

pub fn error_report(
    w: &Matrix,
    layer: &CompressedLayer,
    x_eval: &Matrix,
    x_saliency: &SaliencyVector,
) -> Result<ErrorReport> {
    if w.shape() != (layer.d_in(), layer.d_out()) {
        return Err(SlimError::ShapeMismatch(format!(
            "original {}x{} vs layer {}x{}",
            w.rows(),
            w.cols(),
            layer.d_in(),
            layer.d_out()
        )));
    }
    if x_saliency.len() != w.rows() {
        return Err(SlimError::ShapeMismatch(format!(
            "saliency has {} entries for {} input channels",
            x_saliency.len(),
            w.rows()
        )));
    }
    let size = w.len().max(1) as f64;
    let delta = layer.effective_weight().sub(w)?;
    let delta_no_adapter = layer.compressed_weight().sub(w)?;
    let out_size = (x_eval.rows() * w.cols()).max(1) as f64;
    Ok(ErrorReport {
        weight_mse: delta.squared_norm() / size,
        weighted_weight_mse: x_saliency.apply(&delta)?.squared_norm() / size,
        output_mse: x_eval.matmul(&delta)?.squared_norm() / out_size,
        output_mse_no_adapter: x_eval.matmul(&delta_no_adapter)?.squared_norm() / out_size,
        density: layer.mask.as_ref().map_or(1.0, SparsityMask::density),
        effective_bits_per_weight: layer.effective_bits_per_weight(),
    })
}
