//! Low-rank error compensation: find `(L, R)` with `W ≈ W_c + L·R`.
//!
//! [`naive_lora`] minimizes `‖W - W_c - L·R‖_F`. [`slim_lora`] minimizes the
//! saliency-weighted residual `‖diag(x)(W - W_c - L·R)‖_F`, where `x` holds
//! per-input-channel mean absolute activations. Because `diag(x)` is linear
//! and invertible, the weighted problem is solved exactly by a truncated SVD
//! of `diag(x)·E` followed by `L = diag(1/x)·L̃`.

use crate::error::{Result, SlimError};
use crate::io::CalibrationStats;
use crate::quantizer::{dequantize, group_absmax_quantize, QuantizedTensor};
use crate::tensor::{svd_truncated, Matrix};

/// Strictly positive per-input-channel weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyVector {
    values: Vec<f32>,
}

impl SaliencyVector {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(SlimError::EmptyStats);
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SlimError::NonPositiveSaliency(i));
        }
        Ok(Self { values })
    }

    /// Constant saliency; `slim_lora` then reduces to `naive_lora`.
    pub fn constant(len: usize, value: f32) -> Result<Self> {
        Self::new(vec![value; len])
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `diag(x)·m`
    pub fn apply(&self, m: &Matrix) -> Result<Matrix> {
        m.scale_rows(&self.values)
    }

    /// `diag(1/x)·m`
    pub fn invert(&self, m: &Matrix) -> Result<Matrix> {
        let inv: Vec<f32> = self.values.iter().map(|v| 1.0 / v).collect();
        m.scale_rows(&inv)
    }
}

/// Shifts the mean absolute activations by their minimum plus
/// `1e-8·(max + 1)` so every entry is positive.
pub fn saliency_vector(stats: &CalibrationStats) -> Result<SaliencyVector> {
    let base = &stats.mean_abs;
    if base.is_empty() {
        return Err(SlimError::EmptyStats);
    }
    let min = base.iter().cloned().fold(f32::INFINITY, f32::min).abs();
    let max = base.iter().cloned().fold(0.0f32, f32::max);
    let eps = 1e-8 * (max as f64 + 1.0);
    let shift = min as f64 + eps;
    SaliencyVector::new(base.iter().map(|&v| (v as f64 + shift) as f32).collect())
}

/// Factor pair `left: d_in x r`, `right: r x d_out`. When `quantized` is
/// set, `left`/`right` hold the dequantized factors.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankAdapter {
    pub left: Matrix,
    pub right: Matrix,
    pub quantized: Option<(QuantizedTensor, QuantizedTensor)>,
}

impl LowRankAdapter {
    pub fn new(left: Matrix, right: Matrix) -> Result<Self> {
        if left.cols() != right.rows() {
            return Err(SlimError::ShapeMismatch(format!(
                "adapter factors {}x{} and {}x{}",
                left.rows(),
                left.cols(),
                right.rows(),
                right.cols()
            )));
        }
        Ok(Self {
            left,
            right,
            quantized: None,
        })
    }

    pub fn rank(&self) -> usize {
        self.left.cols()
    }

    pub fn d_in(&self) -> usize {
        self.left.rows()
    }

    pub fn d_out(&self) -> usize {
        self.right.cols()
    }

    /// Dense `L·R`.
    pub fn product(&self) -> Matrix {
        self.left.matmul(&self.right).expect("factor shapes agree")
    }

    /// `(x·L)·R` without forming `L·R`.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        x.matmul(&self.left)?.matmul(&self.right)
    }
}

fn check_pair(w: &Matrix, w_c: &Matrix) -> Result<()> {
    if w.shape() != w_c.shape() {
        return Err(SlimError::ShapeMismatch(format!(
            "original {}x{} vs compressed {}x{}",
            w.rows(),
            w.cols(),
            w_c.rows(),
            w_c.cols()
        )));
    }
    Ok(())
}

/// Adapter rank for a layer: `⌈ratio · min(d_in, d_out)⌉`, clamped to
/// `[1, min(d_in, d_out)]`.
pub fn default_rank(ratio: f32, d_in: usize, d_out: usize) -> usize {
    let dim = d_in.min(d_out);
    ((ratio as f64 * dim as f64 - 1e-6).ceil() as usize).clamp(1, dim.max(1))
}

pub fn naive_lora(w: &Matrix, w_c: &Matrix, r: usize) -> Result<LowRankAdapter> {
    check_pair(w, w_c)?;
    let (left, right) = svd_truncated(&w.sub(w_c)?, r)?;
    LowRankAdapter::new(left, right)
}

pub fn slim_lora(w: &Matrix, w_c: &Matrix, x: &SaliencyVector, r: usize) -> Result<LowRankAdapter> {
    check_pair(w, w_c)?;
    if x.len() != w.rows() {
        return Err(SlimError::ShapeMismatch(format!(
            "saliency has {} entries for {} input channels",
            x.len(),
            w.rows()
        )));
    }
    let error = w_c.sub(w)?;
    let (left_s, right) = svd_truncated(&x.apply(&error)?, r)?;
    // the factors approximate W_c - W; the correction needs W - W_c
    let left = x.invert(&left_s)?.map(|v| -v);
    LowRankAdapter::new(left, right)
}

/// Group-AbsMax quantizes both factors (defaults: groups of 128, 4 bits).
pub fn quantize_adapter(a: &LowRankAdapter, group_size: usize, q: u32) -> Result<LowRankAdapter> {
    let ql = group_absmax_quantize(&a.left, group_size, q)?;
    let qr = group_absmax_quantize(&a.right, group_size, q)?;
    Ok(LowRankAdapter {
        left: dequantize(&ql),
        right: dequantize(&qr),
        quantized: Some((ql, qr)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::tensor::oracle::singular_values;
    use crate::tensor::rng;

    fn weighted_residual(w: &Matrix, w_c: &Matrix, a: &LowRankAdapter, x: &SaliencyVector) -> f64 {
        let corrected = w_c.add(&a.product()).unwrap();
        x.apply(&w.sub(&corrected).unwrap())
            .unwrap()
            .frobenius_norm()
    }

    fn stats_with_mean_abs(v: Vec<f32>) -> CalibrationStats {
        CalibrationStats {
            d_in: v.len(),
            l2_norm: v.clone(),
            mean_abs: v,
            token_count: 1,
        }
    }

    #[test]
    fn saliency_shift_examples() {
        let x = saliency_vector(&stats_with_mean_abs(vec![1.0, 2.0, 3.0])).unwrap();
        for (got, want) in x.values().iter().zip([2.0, 3.0, 4.0]) {
            assert!((got - want).abs() < 1e-6);
        }
        let x = saliency_vector(&stats_with_mean_abs(vec![0.0, 0.0])).unwrap();
        assert!(x.values().iter().all(|&v| v > 0.0));
        assert_eq!(x.values()[0], 1e-8);
    }

    #[test]
    fn saliency_always_positive() {
        let mut rng = rng::seeded(8);
        for k in 0..1000 {
            let n = 1 + k % 17;
            let mut v = fixtures::uniform_matrix(&mut rng, 1, n, 0.0, 5.0).into_vec();
            if k % 3 == 0 {
                v[0] = 0.0;
            }
            let x = saliency_vector(&stats_with_mean_abs(v)).unwrap();
            assert!(x.values().iter().all(|&s| s > 0.0));
        }
    }

    #[test]
    fn empty_stats_rejected() {
        assert!(matches!(
            saliency_vector(&stats_with_mean_abs(vec![])),
            Err(SlimError::EmptyStats)
        ));
        assert!(matches!(
            SaliencyVector::new(vec![1.0, 0.0]),
            Err(SlimError::NonPositiveSaliency(1))
        ));
    }

    #[test]
    fn no_error_gives_zero_adapters() {
        let mut rng = rng::seeded(1);
        let w = fixtures::gaussian_matrix(&mut rng, 6, 5, 1.0);
        let naive = naive_lora(&w, &w, 2).unwrap();
        assert!(naive.product().frobenius_norm() <= 1e-7 * w.frobenius_norm());
        let x = SaliencyVector::new(vec![0.5, 1.0, 2.0, 3.0, 0.1, 1.0]).unwrap();
        let slim = slim_lora(&w, &w, &x, 2).unwrap();
        assert!(slim.product().frobenius_norm() <= 1e-7 * w.frobenius_norm());
    }

    #[test]
    fn naive_recovers_rank_one_error() {
        let mut rng = rng::seeded(2);
        let w = fixtures::gaussian_matrix(&mut rng, 5, 7, 1.0);
        let u = [0.4f32, -1.0, 2.0, 0.1, 0.7];
        let v = [1.0f32, 0.3, -0.2, 0.9, -1.4, 0.5, 0.05];
        let w_c = w.sub(&Matrix::from_fn(5, 7, |i, j| u[i] * v[j])).unwrap();
        let a = naive_lora(&w, &w_c, 1).unwrap();
        let rel = w
            .sub(&w_c.add(&a.product()).unwrap())
            .unwrap()
            .frobenius_norm()
            / w.frobenius_norm();
        assert!(rel <= 1e-5, "{rel}");
    }

    #[test]
    fn naive_residual_matches_singular_value_tail() {
        let mut rng = rng::seeded(3);
        let w = fixtures::gaussian_matrix(&mut rng, 8, 8, 1.0);
        let w_c = fixtures::gaussian_matrix(&mut rng, 8, 8, 1.0);
        let a = naive_lora(&w, &w_c, 3).unwrap();
        let residual = w
            .sub(&w_c)
            .unwrap()
            .sub(&a.product())
            .unwrap()
            .frobenius_norm();
        let sigma = singular_values(&w.sub(&w_c).unwrap());
        let expected = sigma[3..].iter().map(|s| s * s).sum::<f64>().sqrt();
        assert!(
            (residual - expected).abs() <= 1e-4 * expected,
            "{residual} vs {expected}"
        );
    }

    #[test]
    fn slim_full_rank_is_exact() {
        let mut rng = rng::seeded(4);
        let w = fixtures::gaussian_matrix(&mut rng, 6, 9, 1.0);
        let w_c = fixtures::gaussian_matrix(&mut rng, 6, 9, 0.5);
        let x = SaliencyVector::new(vec![0.2, 1.0, 3.0, 0.7, 1.5, 0.05]).unwrap();
        let a = slim_lora(&w, &w_c, &x, 6).unwrap();
        let base = x.apply(&w.sub(&w_c).unwrap()).unwrap().frobenius_norm();
        assert!(weighted_residual(&w, &w_c, &a, &x) <= 1e-5 * base);
    }

    #[test]
    fn slim_recovers_rank_one_error_under_any_weighting() {
        let w = Matrix::from_fn(4, 4, |i, j| (i as f32 - 1.5) * 0.3 + j as f32 * 0.1);
        let u = [1.0f32, -0.5, 0.25, 2.0];
        let v = [0.3f32, -0.6, 0.9, 0.1];
        let w_c = w.add(&Matrix::from_fn(4, 4, |i, j| u[i] * v[j])).unwrap();
        let x = SaliencyVector::new(vec![0.1, 5.0, 1.3, 0.02]).unwrap();
        let a = slim_lora(&w, &w_c, &x, 1).unwrap();
        let corrected = w_c.add(&a.product()).unwrap();
        let err = w
            .sub(&corrected)
            .unwrap()
            .as_slice()
            .iter()
            .fold(0.0f32, |m, v| m.max(v.abs()));
        assert!(err <= 1e-5, "{err}");
    }

    #[test]
    fn shape_and_rank_errors() {
        let a = Matrix::zeros(4, 3);
        let b = Matrix::zeros(3, 4);
        assert!(matches!(
            naive_lora(&a, &b, 1),
            Err(SlimError::ShapeMismatch(_))
        ));
        assert!(matches!(
            naive_lora(&a, &a, 4),
            Err(SlimError::RankOutOfRange { .. })
        ));
        let x = SaliencyVector::constant(3, 1.0).unwrap();
        assert!(matches!(
            slim_lora(&a, &a, &x, 1),
            Err(SlimError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn quantized_constant_factors_are_lossless() {
        let a = LowRankAdapter::new(
            Matrix::from_fn(6, 2, |_, _| 0.25),
            Matrix::from_fn(2, 5, |_, _| -1.5),
        )
        .unwrap();
        let q = quantize_adapter(&a, 128, 4).unwrap();
        assert_eq!(q.left, a.left);
        assert_eq!(q.right, a.right);
        assert!(q.quantized.is_some());
    }

    #[test]
    fn quantized_factor_error_bound() {
        let mut rng = rng::seeded(5);
        let a = LowRankAdapter::new(
            fixtures::gaussian_matrix(&mut rng, 64, 8, 1.0),
            fixtures::gaussian_matrix(&mut rng, 8, 64, 1.0),
        )
        .unwrap();
        let q = quantize_adapter(&a, 128, 4).unwrap();
        let (ql, qr) = q.quantized.as_ref().unwrap();
        for (orig, deq, qt) in [(&a.left, &q.left, ql), (&a.right, &q.right, qr)] {
            assert_eq!(deq.shape(), orig.shape());
            assert_eq!(qt.group_size(), Some(128));
            for (k, (x, y)) in orig.as_slice().iter().zip(deq.as_slice()).enumerate() {
                assert!((x - y).abs() <= qt.scales()[k / 128] / 14.0 + 1e-7);
            }
        }
    }

    #[test]
    fn default_rank_rule() {
        assert_eq!(default_rank(0.1, 64, 64), 7);
        assert_eq!(default_rank(0.1, 4096, 11008), 410);
        assert_eq!(default_rank(0.1, 768, 768), 77);
        assert_eq!(default_rank(0.1, 5, 3), 1);
        assert_eq!(default_rank(1.0, 5, 3), 3);
    }
}
