use crate::error::{Result, SlimError};
use crate::tensor::Matrix;

/// Histogram of `|w|` over `num_bins` equal-width bins spanning `[0, max_abs]`.
///
/// Bins are closed on the right: bin 0 is `[0, h]` and bin `k > 0` is
/// `(k·h, (k+1)·h]`, so a value equal to `max_abs` lands in the last bin.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsHistogram {
    max_abs: f32,
    counts: Vec<u64>,
    total: u64,
}

/// Default bin count for a tensor with `elements` entries:
/// `max(512, min(elements / 1000, 20000))`.
pub fn default_num_bins(elements: usize) -> usize {
    (elements / 1000).clamp(512, 20_000)
}

impl AbsHistogram {
    pub fn build(w: &Matrix, num_bins: Option<usize>) -> Result<Self> {
        Self::from_values(w.as_slice(), num_bins)
    }

    pub fn from_values(values: &[f32], num_bins: Option<usize>) -> Result<Self> {
        if values.is_empty() {
            return Err(SlimError::EmptyTensor);
        }
        let num_bins = num_bins.unwrap_or_else(|| default_num_bins(values.len()));
        if num_bins == 0 {
            return Err(SlimError::ConfigInvalid(
                "histogram needs at least one bin".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SlimError::NonFinite("histogram input"));
        }
        let max_abs = values.iter().fold(0.0f32, |m, v| m.max(v.abs()));
        let mut counts = vec![0u64; num_bins];
        if max_abs == 0.0 {
            counts[0] = values.len() as u64;
        } else {
            let scale = num_bins as f64 / max_abs as f64;
            for v in values {
                let t = (v.abs() as f64) * scale;
                let idx = (t.ceil() as usize).saturating_sub(1).min(num_bins - 1);
                counts[idx] += 1;
            }
        }
        Ok(Self {
            max_abs,
            counts,
            total: values.len() as u64,
        })
    }

    pub fn max_abs(&self) -> f32 {
        self.max_abs
    }

    pub fn num_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn bin_width(&self) -> f64 {
        self.max_abs as f64 / self.counts.len() as f64
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.bin_width()
    }

    /// Non-empty bins as `(center, probability mass)` pairs.
    pub fn masses(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let total = self.total as f64;
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(move |(k, &c)| (self.bin_center(k), c as f64 / total))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_bins_follow_size_rule() {
        assert_eq!(default_num_bins(1000 * 1000), 1000);
        assert_eq!(default_num_bins(100), 512);
        assert_eq!(default_num_bins(100_000_000), 20_000);
    }

    #[test]
    fn million_element_matrix_uses_thousand_bins() {
        let w = Matrix::zeros(1000, 1000);
        let h = AbsHistogram::build(&w, None).unwrap();
        assert_eq!(h.num_bins(), 1000);
    }

    #[test]
    fn zeros_collapse_into_first_bin() {
        let w = Matrix::zeros(3, 5);
        let h = AbsHistogram::build(&w, Some(7)).unwrap();
        assert_eq!(h.max_abs(), 0.0);
        assert_eq!(h.counts()[0], 15);
        assert_eq!(h.counts()[1..].iter().sum::<u64>(), 0);
    }

    #[test]
    fn small_example_bins() {
        let h = AbsHistogram::from_values(&[-2.0, -1.0, 0.0, 1.0, 2.0], Some(4)).unwrap();
        assert_eq!(h.max_abs(), 2.0);
        assert_eq!(h.counts(), &[1, 2, 0, 2]);
        assert_eq!(h.total(), 5);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(
            AbsHistogram::from_values(&[], None),
            Err(SlimError::EmptyTensor)
        ));
    }

    proptest::proptest! {
        #[test]
        fn mass_is_conserved(values in proptest::collection::vec(-1e3f32..1e3, 1..400), bins in 1usize..64) {
            let h = AbsHistogram::from_values(&values, Some(bins)).unwrap();
            proptest::prop_assert_eq!(h.counts().iter().sum::<u64>(), values.len() as u64);
            proptest::prop_assert_eq!(h.total(), values.len() as u64);
            let m = values.iter().fold(0.0f32, |m, v| m.max(v.abs()));
            proptest::prop_assert_eq!(h.max_abs(), m);
        }
    }
}
