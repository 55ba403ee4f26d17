use nalgebra::{DMatrix, SVD};

use crate::error::{Result, SlimError};
use crate::tensor::Matrix;

/// Truncated SVD: returns `(left, right)` with `left: rows x r` and
/// `right: r x cols` such that `left · right` is a Frobenius-optimal
/// rank-`r` approximation of `m`.
///
/// Singular values are folded into `left`, so the rows of `right` are
/// orthonormal. The first entry of each `right` row whose magnitude exceeds
/// `1e-12` is non-negative.
pub fn svd_truncated(m: &Matrix, r: usize) -> Result<(Matrix, Matrix)> {
    let (rows, cols) = m.shape();
    let max_rank = rows.min(cols);
    if r == 0 || r > max_rank {
        return Err(SlimError::RankOutOfRange {
            rank: r,
            max: max_rank,
        });
    }
    if m.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(SlimError::NonFinite("svd input"));
    }

    let a = DMatrix::from_row_iterator(rows, cols, m.as_slice().iter().map(|&v| v as f64));
    let svd = SVD::try_new(a, true, true, f64::EPSILON, 0)
        .ok_or(SlimError::NonFinite("svd did not converge"))?;
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sigma = &svd.singular_values;

    // Descending singular values, ties broken by position.
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));

    let mut left = vec![0.0f32; rows * r];
    let mut right = vec![0.0f32; r * cols];
    for (k, &idx) in order.iter().take(r).enumerate() {
        let row = v_t.row(idx);
        let sign =
            row.iter()
                .find(|v| v.abs() > 1e-12)
                .map_or(1.0, |&v| if v < 0.0 { -1.0 } else { 1.0 });
        for j in 0..cols {
            right[k * cols + j] = (sign * row[j]) as f32;
        }
        let s = sigma[idx] * sign;
        for i in 0..rows {
            left[i * r + k] = (u[(i, idx)] * s) as f32;
        }
    }
    Ok((
        Matrix::from_raw(rows, r, left),
        Matrix::from_raw(r, cols, right),
    ))
}
