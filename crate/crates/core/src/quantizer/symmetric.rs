use super::{check_bits, code_range, QuantizedTensor};
use crate::error::{Result, SlimError};
use crate::tensor::Matrix;

/// Per-tensor symmetric quantization with step `alpha · 2^(1-q)`.
/// Rounds half away from zero and clamps to `[-2^(q-1), 2^(q-1) - 1]`.
pub fn quantize_symmetric(w: &Matrix, alpha: f32, q: u32) -> Result<QuantizedTensor> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(SlimError::NonPositiveAlpha(alpha));
    }
    check_bits(q)?;
    let step = alpha as f64 * 2f64.powi(1 - q as i32);
    let (lo, hi) = code_range(q, false);
    let codes = w
        .as_slice()
        .iter()
        .map(|&v| ((v as f64 / step).round().clamp(lo as f64, hi as f64)) as i8)
        .collect();
    Ok(QuantizedTensor {
        rows: w.rows(),
        cols: w.cols(),
        codes,
        scales: vec![alpha],
        group_size: None,
        bits: q,
    })
}

pub fn dequantize(t: &QuantizedTensor) -> Matrix {
    let data = match t.group_size {
        None => {
            let step = t.scales[0] as f64 * 2f64.powi(1 - t.bits as i32);
            t.codes.iter().map(|&c| (c as f64 * step) as f32).collect()
        }
        Some(g) => {
            let levels = ((1i32 << (t.bits - 1)) - 1) as f64;
            t.codes
                .chunks(g)
                .zip(&t.scales)
                .flat_map(|(group, &s)| {
                    group
                        .iter()
                        .map(move |&c| (c as f64 * s as f64 / levels) as f32)
                })
                .collect()
        }
    };
    Matrix::from_raw(t.rows, t.cols, data)
}

/// `max |w|`, or 1.0 for an all-zero tensor.
pub fn absmax_alpha(w: &Matrix) -> Result<f32> {
    if w.is_empty() {
        return Err(SlimError::EmptyTensor);
    }
    let m = w.max_abs();
    Ok(if m == 0.0 { 1.0 } else { m })
}

/// AbsMax quantization with one scale per contiguous row-major group.
pub fn group_absmax_quantize(w: &Matrix, group_size: usize, q: u32) -> Result<QuantizedTensor> {
    check_bits(q)?;
    if group_size == 0 {
        return Err(SlimError::ConfigInvalid(
            "group size must be at least 1".into(),
        ));
    }
    let levels = ((1i32 << (q - 1)) - 1) as f64;
    let mut codes = Vec::with_capacity(w.len());
    let mut scales = Vec::with_capacity(w.len().div_ceil(group_size));
    for group in w.as_slice().chunks(group_size) {
        let m = group.iter().fold(0.0f32, |m, v| m.max(v.abs()));
        let scale = if m == 0.0 { 1.0 } else { m };
        scales.push(scale);
        codes.extend(group.iter().map(|&v| {
            (v as f64 * levels / scale as f64)
                .round()
                .clamp(-levels, levels) as i8
        }));
    }
    Ok(QuantizedTensor {
        rows: w.rows(),
        cols: w.cols(),
        codes,
        scales,
        group_size: Some(group_size),
        bits: q,
    })
}
