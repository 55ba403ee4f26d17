//! Test-only reference routines, independent of the production SVD path.

use crate::tensor::Matrix;

/// Cyclic Jacobi eigenvalues of a symmetric matrix, used as an
/// independent route to the singular values.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Singular values of `m`, descending, via Jacobi eigenvalues of `mᵀm`.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    let (rows, cols) = m.shape();
    let gram = (0..cols)
        .map(|i| {
            (0..cols)
                .map(|j| {
                    (0..rows)
                        .map(|k| m.get(k, i) as f64 * m.get(k, j) as f64)
                        .sum()
                })
                .collect()
        })
        .collect();
    jacobi_eigenvalues(gram)
        .into_iter()
        .map(|e| e.max(0.0).sqrt())
        .collect()
}
