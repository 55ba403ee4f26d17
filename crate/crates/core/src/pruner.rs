//! Saliency scores and sparsity masks.
//!
//! Masks compare scores within a group: for unstructured sparsity the group
//! is one output column (all input channels feeding that output); for n:m
//! sparsity it is an aligned run of `m` consecutive input channels in one
//! output column. Ties keep the lower input index.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SlimError};
use crate::io::CalibrationStats;
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SparsityPattern {
    /// Prunes `⌊ratio · d_in⌋` entries per output column.
    Unstructured { ratio: f32 },
    /// Keeps exactly `n` of every aligned `m` input channels.
    SemiStructured { n: usize, m: usize },
}

impl SparsityPattern {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Unstructured { ratio } if !(0.0..1.0).contains(&ratio) => Err(
                SlimError::InvalidPattern(format!("unstructured ratio {ratio} outside [0, 1)")),
            ),
            Self::SemiStructured { n, m } if n == 0 || n >= m => Err(SlimError::InvalidPattern(
                format!("{n}:{m} needs 0 < n < m"),
            )),
            _ => Ok(()),
        }
    }

    /// Fraction of weights kept for a layer with `d_in` input channels.
    pub fn density(&self, d_in: usize) -> f64 {
        match *self {
            Self::Unstructured { ratio } => {
                if d_in == 0 {
                    1.0
                } else {
                    (d_in - pruned_count(ratio, d_in)) as f64 / d_in as f64
                }
            }
            Self::SemiStructured { n, m } => n as f64 / m as f64,
        }
    }
}

/// Accepts `unstructured:RATIO` or `N:M`.
impl FromStr for SparsityPattern {
    type Err = SlimError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || SlimError::InvalidPattern(format!("cannot parse sparsity '{s}'"));
        let pattern = if let Some(ratio) = s.strip_prefix("unstructured:") {
            Self::Unstructured {
                ratio: ratio.parse().map_err(|_| bad())?,
            }
        } else {
            let (n, m) = s.split_once(':').ok_or_else(bad)?;
            Self::SemiStructured {
                n: n.parse().map_err(|_| bad())?,
                m: m.parse().map_err(|_| bad())?,
            }
        };
        pattern.validate()?;
        Ok(pattern)
    }
}

impl fmt::Display for SparsityPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Unstructured { ratio } => write!(f, "unstructured:{ratio}"),
            Self::SemiStructured { n, m } => write!(f, "{n}:{m}"),
        }
    }
}

/// Keep/drop flags, row-major with the weight's `d_in x d_out` shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityMask {
    rows: usize,
    cols: usize,
    keep: Vec<bool>,
}

impl SparsityMask {
    pub fn new(rows: usize, cols: usize, keep: Vec<bool>) -> Result<Self> {
        if keep.len() != rows * cols {
            return Err(SlimError::ShapeMismatch(format!(
                "{} mask flags for {rows}x{cols}",
                keep.len()
            )));
        }
        Ok(Self { rows, cols, keep })
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            keep: vec![true; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_kept(&self, i: usize, j: usize) -> bool {
        self.keep[i * self.cols + j]
    }

    pub fn keep_flags(&self) -> &[bool] {
        &self.keep
    }

    pub fn keep_count(&self) -> usize {
        self.keep.iter().filter(|k| **k).count()
    }

    pub fn density(&self) -> f64 {
        if self.keep.is_empty() {
            1.0
        } else {
            self.keep_count() as f64 / self.keep.len() as f64
        }
    }

    /// Bitset, 8 flags per byte in row-major order, least significant bit first.
    pub fn pack(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.keep.len().div_ceil(8)];
        for (k, _) in self.keep.iter().enumerate().filter(|(_, &kept)| kept) {
            out[k / 8] |= 1 << (k % 8);
        }
        out
    }

    pub fn unpack(rows: usize, cols: usize, bytes: &[u8]) -> Result<Self> {
        let n = rows * cols;
        if bytes.len() != n.div_ceil(8) {
            return Err(SlimError::SchemaViolation(format!(
                "{} mask bytes for {n} entries",
                bytes.len()
            )));
        }
        if !n.is_multiple_of(8) && bytes[n / 8] >> (n % 8) != 0 {
            return Err(SlimError::SchemaViolation(
                "mask padding bits must be zero".into(),
            ));
        }
        let keep = (0..n).map(|k| bytes[k / 8] >> (k % 8) & 1 == 1).collect();
        Ok(Self { rows, cols, keep })
    }
}

/// `|w_ij| · l2_norm_i`, `i` indexing input channels.
pub fn wanda_scores(w: &Matrix, stats: &CalibrationStats) -> Result<Matrix> {
    if stats.l2_norm.len() != w.rows() {
        return Err(SlimError::ShapeMismatch(format!(
            "{} activation norms for {} input channels",
            stats.l2_norm.len(),
            w.rows()
        )));
    }
    w.map(f32::abs).scale_rows(&stats.l2_norm)
}

pub fn magnitude_scores(w: &Matrix) -> Matrix {
    w.map(f32::abs)
}

fn pruned_count(ratio: f32, d_in: usize) -> usize {
    ((ratio as f64 * d_in as f64 + 1e-6).floor() as usize).min(d_in)
}

/// Indices of the `keep` best entries among `candidates`, by descending
/// score then ascending index.
fn top_indices(
    scores: &Matrix,
    col: usize,
    candidates: std::ops::Range<usize>,
    keep: usize,
) -> Vec<usize> {
    let mut idx: Vec<usize> = candidates.collect();
    idx.sort_by(|&a, &b| {
        scores
            .get(b, col)
            .total_cmp(&scores.get(a, col))
            .then(a.cmp(&b))
    });
    idx.truncate(keep);
    idx
}

pub fn unstructured_mask(scores: &Matrix, ratio: f32) -> Result<SparsityMask> {
    SparsityPattern::Unstructured { ratio }.validate()?;
    let (rows, cols) = scores.shape();
    let keep_per_col = rows - pruned_count(ratio, rows);
    let mut keep = vec![false; rows * cols];
    for j in 0..cols {
        for i in top_indices(scores, j, 0..rows, keep_per_col) {
            keep[i * cols + j] = true;
        }
    }
    SparsityMask::new(rows, cols, keep)
}

pub fn semistructured_mask(scores: &Matrix, n: usize, m: usize) -> Result<SparsityMask> {
    SparsityPattern::SemiStructured { n, m }.validate()?;
    let (rows, cols) = scores.shape();
    if rows % m != 0 {
        return Err(SlimError::IndivisibleDimension { dim: rows, m });
    }
    let mut keep = vec![false; rows * cols];
    for j in 0..cols {
        for start in (0..rows).step_by(m) {
            for i in top_indices(scores, j, start..start + m, n) {
                keep[i * cols + j] = true;
            }
        }
    }
    SparsityMask::new(rows, cols, keep)
}

pub fn build_mask(scores: &Matrix, pattern: SparsityPattern) -> Result<SparsityMask> {
    match pattern {
        SparsityPattern::Unstructured { ratio } => unstructured_mask(scores, ratio),
        SparsityPattern::SemiStructured { n, m } => semistructured_mask(scores, n, m),
    }
}

pub fn apply_mask(w: &Matrix, mask: &SparsityMask) -> Result<Matrix> {
    if w.shape() != (mask.rows, mask.cols) {
        return Err(SlimError::ShapeMismatch(format!(
            "mask {}x{} for weight {}x{}",
            mask.rows,
            mask.cols,
            w.rows(),
            w.cols()
        )));
    }
    let data = w
        .as_slice()
        .iter()
        .zip(&mask.keep)
        .map(|(&v, &k)| if k { v } else { 0.0 })
        .collect();
    Matrix::new(w.rows(), w.cols(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::tensor::rng;

    fn column(values: &[f32]) -> Matrix {
        Matrix::new(values.len(), 1, values.to_vec()).unwrap()
    }

    fn kept_rows(mask: &SparsityMask, col: usize) -> Vec<usize> {
        (0..mask.rows()).filter(|&i| mask.is_kept(i, col)).collect()
    }

    #[test]
    fn wanda_examples() {
        let w = column(&[1.0, -3.0, 2.0, 0.0]);
        let stats = CalibrationStats {
            d_in: 4,
            mean_abs: vec![1.0; 4],
            l2_norm: vec![2.0, 1.0, 1.0, 5.0],
            token_count: 1,
        };
        assert_eq!(
            wanda_scores(&w, &stats).unwrap().as_slice(),
            &[2.0, 3.0, 2.0, 0.0]
        );
        let mut rng = rng::seeded(3);
        let w = fixtures::gaussian_matrix(&mut rng, 4, 3, 1.0);
        assert_eq!(
            wanda_scores(&w, &CalibrationStats::uniform(4)).unwrap(),
            magnitude_scores(&w)
        );
        assert!(matches!(
            wanda_scores(&w, &CalibrationStats::uniform(3)),
            Err(SlimError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn wanda_matches_double_loop() {
        let mut rng = rng::seeded(4);
        let w = fixtures::gaussian_matrix(&mut rng, 16, 16, 1.0);
        let norms = fixtures::uniform_matrix(&mut rng, 1, 16, 0.0, 4.0).into_vec();
        let stats = CalibrationStats {
            d_in: 16,
            mean_abs: norms.clone(),
            l2_norm: norms.clone(),
            token_count: 1,
        };
        let s = wanda_scores(&w, &stats).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                assert_eq!(s.get(i, j), w.get(i, j).abs() * norms[i]);
            }
        }
    }

    #[test]
    fn magnitude_examples() {
        let w = Matrix::new(1, 2, vec![-2.0, 3.0]).unwrap();
        assert_eq!(magnitude_scores(&w).as_slice(), &[2.0, 3.0]);
        assert_eq!(magnitude_scores(&Matrix::zeros(2, 2)), Matrix::zeros(2, 2));
    }

    #[test]
    fn unstructured_examples() {
        let s = column(&[4.0, 1.0, 3.0, 2.0]);
        assert_eq!(
            kept_rows(&unstructured_mask(&s, 0.5).unwrap(), 0),
            vec![0, 2]
        );
        assert_eq!(unstructured_mask(&s, 0.0).unwrap().keep_count(), 4);
        assert!(unstructured_mask(&s, 1.0).is_err());
    }

    #[test]
    fn unstructured_f32_ratio_rounding() {
        let s = column(&[1.0; 10]);
        assert_eq!(unstructured_mask(&s, 0.7).unwrap().keep_count(), 3);
        assert_eq!(unstructured_mask(&s, 0.25).unwrap().keep_count(), 8);
    }

    #[test]
    fn two_four_examples() {
        assert_eq!(
            kept_rows(
                &semistructured_mask(&column(&[4.0, 3.0, 2.0, 1.0]), 2, 4).unwrap(),
                0
            ),
            vec![0, 1]
        );
        assert_eq!(
            kept_rows(
                &semistructured_mask(&column(&[2.0, 3.0, 2.0, 0.0]), 2, 4).unwrap(),
                0
            ),
            vec![0, 1]
        );
        assert!(matches!(
            semistructured_mask(&column(&[1.0; 6]), 2, 4),
            Err(SlimError::IndivisibleDimension { dim: 6, m: 4 })
        ));
        assert!(semistructured_mask(&column(&[1.0; 4]), 4, 4).is_err());
    }

    #[test]
    fn two_four_matches_subset_enumeration() {
        let mut rng = rng::seeded(5);
        let s = fixtures::uniform_matrix(&mut rng, 64, 16, 0.0, 1.0);
        let mask = semistructured_mask(&s, 2, 4).unwrap();
        for j in 0..16 {
            for g in (0..64).step_by(4) {
                let mut best = (f32::MIN, 0, 0);
                for a in 0..4 {
                    for b in a + 1..4 {
                        let total = s.get(g + a, j) + s.get(g + b, j);
                        if total > best.0 {
                            best = (total, a, b);
                        }
                    }
                }
                let kept: Vec<usize> = (0..4).filter(|&k| mask.is_kept(g + k, j)).collect();
                assert_eq!(kept, vec![best.1, best.2]);
            }
        }
    }

    #[test]
    fn apply_mask_cases() {
        let mut rng = rng::seeded(6);
        let w = fixtures::gaussian_matrix(&mut rng, 8, 4, 1.0);
        assert_eq!(apply_mask(&w, &SparsityMask::full(8, 4)).unwrap(), w);
        let none = SparsityMask::new(8, 4, vec![false; 32]).unwrap();
        assert_eq!(apply_mask(&w, &none).unwrap(), Matrix::zeros(8, 4));
        let mask = unstructured_mask(&magnitude_scores(&w), 0.5).unwrap();
        assert_eq!(
            apply_mask(&w, &mask).unwrap().count_nonzero(),
            mask.keep_count()
        );
        assert!(apply_mask(&w, &SparsityMask::full(4, 8)).is_err());
    }

    #[test]
    fn packing() {
        let keep: Vec<bool> = (0..32).map(|k| k % 3 == 0).collect();
        let mask = SparsityMask::new(4, 8, keep).unwrap();
        let bytes = mask.pack();
        assert_eq!(bytes.len(), 4);
        assert_eq!(bytes[0], 0b0100_1001);
        assert_eq!(SparsityMask::unpack(4, 8, &bytes).unwrap(), mask);
        assert!(SparsityMask::unpack(3, 3, &[0xff, 0xff]).is_err());
    }

    #[test]
    fn pattern_parsing() {
        assert_eq!(
            "2:4".parse::<SparsityPattern>().unwrap(),
            SparsityPattern::SemiStructured { n: 2, m: 4 }
        );
        assert_eq!(
            "unstructured:0.5".parse::<SparsityPattern>().unwrap(),
            SparsityPattern::Unstructured { ratio: 0.5 }
        );
        for bad in ["4:4", "0:4", "x", "unstructured:1.5", "2:"] {
            assert!(bad.parse::<SparsityPattern>().is_err(), "{bad}");
        }
    }

    proptest::proptest! {
        #[test]
        fn masks_are_score_monotone(values in proptest::collection::vec(0f32..10.0, 32), ratio in 0f32..0.99) {
            let s = Matrix::new(8, 4, values).unwrap();
            for (mask, group) in [(unstructured_mask(&s, ratio).unwrap(), 8), (semistructured_mask(&s, 2, 4).unwrap(), 4)] {
                for j in 0..4 {
                    for g in (0..8).step_by(group) {
                        let kept_min = (g..g + group).filter(|&i| mask.is_kept(i, j)).map(|i| s.get(i, j)).fold(f32::MAX, f32::min);
                        let dropped_max = (g..g + group).filter(|&i| !mask.is_kept(i, j)).map(|i| s.get(i, j)).fold(f32::MIN, f32::max);
                        proptest::prop_assert!(dropped_max <= kept_min);
                    }
                }
            }
        }
    }
}
