use serde::{Deserialize, Serialize};

use crate::error::{Result, SlimError};
use crate::io::CalibrationStats;
use crate::tensor::Matrix;

/// Input channels whose weight rows were multiplied by `factor`. The
/// matching activation columns must be divided by `factor` at inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelScaling {
    /// Sorted ascending.
    pub channel_indices: Vec<usize>,
    pub factor: f32,
}

impl ChannelScaling {
    /// Per-channel weight multipliers (1 for untouched channels).
    pub fn weight_factors(&self, d_in: usize) -> Vec<f32> {
        let mut f = vec![1.0; d_in];
        for &i in &self.channel_indices {
            f[i] = self.factor;
        }
        f
    }

    pub fn activation_factors(&self, d_in: usize) -> Vec<f32> {
        let mut f = vec![1.0; d_in];
        for &i in &self.channel_indices {
            f[i] = 1.0 / self.factor;
        }
        f
    }

    /// Divides the scaled activation columns of `x` (`tokens x d_in`) by the factor.
    pub fn compensate_activations(&self, x: &Matrix) -> Result<Matrix> {
        let mut data = x.as_slice().to_vec();
        let cols = x.cols();
        if let Some(&bad) = self.channel_indices.iter().find(|&&i| i >= cols) {
            return Err(SlimError::ShapeMismatch(format!(
                "scaled channel {bad} outside {cols} input columns"
            )));
        }
        for row in data.chunks_mut(cols.max(1)) {
            for &i in &self.channel_indices {
                row[i] /= self.factor;
            }
        }
        Matrix::new(x.rows(), cols, data)
    }

    /// Undoes the weight scaling: divides the scaled rows of `w` by the factor.
    pub fn unscale_weight(&self, w: &Matrix) -> Result<Matrix> {
        w.scale_rows(&self.activation_factors(w.rows()))
    }

    pub fn validate(&self, d_in: usize) -> Result<()> {
        if !(self.factor.is_finite() && self.factor > 1.0) {
            return Err(SlimError::SchemaViolation(format!(
                "channel scale factor {} must exceed 1",
                self.factor
            )));
        }
        let sorted_unique = self.channel_indices.windows(2).all(|p| p[0] < p[1]);
        if !sorted_unique || self.channel_indices.iter().any(|&i| i >= d_in) {
            return Err(SlimError::SchemaViolation(
                "channel indices must be unique, sorted and < d_in".into(),
            ));
        }
        Ok(())
    }
}

/// Number of channels selected for a fraction of `d_in`: `⌈fraction · d_in⌉`,
/// at least one. A `1e-6` slack absorbs `f32` representation error.
pub(crate) fn selected_count(fraction: f32, d_in: usize) -> usize {
    let exact = fraction as f64 * d_in as f64;
    ((exact - 1e-6).ceil() as usize).clamp(1, d_in)
}

/// Scales up the weight rows of the most salient input channels.
///
/// Channel saliency is `(mean_abs_j / max mean_abs) · (mean_i |w_ji| / max_k mean_i |w_ki|)`.
/// The top `⌈fraction · d_in⌉` channels (ties to the lower index) have their
/// rows multiplied by `s`.
pub fn activation_aware_scale(
    w: &Matrix,
    stats: &CalibrationStats,
    fraction: f32,
    s: f32,
) -> Result<(Matrix, ChannelScaling)> {
    let d_in = w.rows();
    if stats.d_in != d_in || stats.mean_abs.len() != d_in {
        return Err(SlimError::ShapeMismatch(format!(
            "calibration covers {} channels, weight has {d_in} input rows",
            stats.d_in
        )));
    }
    if d_in == 0 {
        return Err(SlimError::EmptyTensor);
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(SlimError::ConfigInvalid(format!(
            "channel fraction {fraction} outside (0, 1]"
        )));
    }
    if !(s.is_finite() && s > 1.0) {
        return Err(SlimError::ConfigInvalid(format!(
            "channel scale factor {s} must exceed 1"
        )));
    }

    let saliency = channel_saliency(w, &stats.mean_abs);
    let k = selected_count(fraction, d_in);
    let mut order: Vec<usize> = (0..d_in).collect();
    order.sort_by(|&a, &b| saliency[b].total_cmp(&saliency[a]).then(a.cmp(&b)));
    let mut channel_indices: Vec<usize> = order.into_iter().take(k).collect();
    channel_indices.sort_unstable();

    let scaling = ChannelScaling {
        channel_indices,
        factor: s,
    };
    let w_scaled = w.scale_rows(&scaling.weight_factors(d_in))?;
    Ok((w_scaled, scaling))
}

pub(crate) fn channel_saliency(w: &Matrix, mean_abs: &[f32]) -> Vec<f64> {
    let normalize = |v: Vec<f64>| {
        let max = v.iter().cloned().fold(0.0f64, f64::max);
        if max > 0.0 {
            v.into_iter().map(|x| x / max).collect()
        } else {
            v
        }
    };
    let weight_mag = normalize(
        (0..w.rows())
            .map(|j| w.row(j).iter().map(|v| v.abs() as f64).sum::<f64>() / w.cols().max(1) as f64)
            .collect(),
    );
    let act_mag = normalize(mean_abs.iter().map(|&v| v as f64).collect());
    act_mag
        .iter()
        .zip(&weight_mag)
        .map(|(a, b)| a * b)
        .collect()
}
