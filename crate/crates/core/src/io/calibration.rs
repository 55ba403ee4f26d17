use serde::{Deserialize, Serialize};

use crate::error::{Result, SlimError};
use crate::io::container::{Tensor, TensorMap};
use crate::tensor::Matrix;

/// Per-input-channel activation statistics gathered over calibration tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationStats {
    pub d_in: usize,
    /// `(1/T) Σ_t |x_tj|`
    pub mean_abs: Vec<f32>,
    /// `sqrt(Σ_t x_tj²)`
    pub l2_norm: Vec<f32>,
    pub token_count: u64,
}

#[derive(Serialize, Deserialize)]
struct CalibMeta {
    token_count: u64,
    d_in: usize,
}

impl CalibrationStats {
    /// Unit statistics: every channel has mean-abs and norm 1.
    pub fn uniform(d_in: usize) -> Self {
        Self {
            d_in,
            mean_abs: vec![1.0; d_in],
            l2_norm: vec![1.0; d_in],
            token_count: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean_abs.len() != self.d_in || self.l2_norm.len() != self.d_in {
            return Err(SlimError::SchemaViolation(format!(
                "calibration vectors must have length d_in = {}",
                self.d_in
            )));
        }
        if self.token_count == 0 || self.d_in == 0 {
            return Err(SlimError::EmptyStats);
        }
        let bad = |v: &f32| !v.is_finite() || *v < 0.0;
        if self.mean_abs.iter().any(bad) || self.l2_norm.iter().any(bad) {
            return Err(SlimError::SchemaViolation(
                "calibration statistics must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn to_tensors(&self) -> TensorMap {
        let mut map = TensorMap::new();
        map.insert(
            "mean_abs".into(),
            Tensor::f32(vec![self.d_in], self.mean_abs.clone()),
        );
        map.insert(
            "l2_norm".into(),
            Tensor::f32(vec![self.d_in], self.l2_norm.clone()),
        );
        let meta = CalibMeta {
            token_count: self.token_count,
            d_in: self.d_in,
        };
        map.insert("__meta__".into(), Tensor::json(&meta));
        map
    }

    pub fn from_tensors(map: &TensorMap) -> Result<Self> {
        let meta: CalibMeta = map
            .get("__meta__")
            .ok_or_else(|| SlimError::SchemaViolation("missing __meta__".into()))?
            .parse_json()?;
        let vector = |name: &str| -> Result<Vec<f32>> {
            let t = map
                .get(name)
                .ok_or_else(|| SlimError::SchemaViolation(format!("missing {name}")))?;
            Ok(t.as_f32()?.to_vec())
        };
        let stats = Self {
            d_in: meta.d_in,
            mean_abs: vector("mean_abs")?,
            l2_norm: vector("l2_norm")?,
            token_count: meta.token_count,
        };
        stats.validate()?;
        Ok(stats)
    }
}

/// Single-pass accumulator over token batches (`T x d_in` matrices).
#[derive(Debug, Clone)]
pub struct CalibrationAccumulator {
    abs_sum: Vec<f64>,
    sq_sum: Vec<f64>,
    tokens: u64,
}

impl CalibrationAccumulator {
    pub fn new(d_in: usize) -> Self {
        Self {
            abs_sum: vec![0.0; d_in],
            sq_sum: vec![0.0; d_in],
            tokens: 0,
        }
    }

    pub fn push(&mut self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.abs_sum.len() {
            return Err(SlimError::ShapeMismatch(format!(
                "calibration batch has {} columns, expected {}",
                batch.cols(),
                self.abs_sum.len()
            )));
        }
        for t in 0..batch.rows() {
            for (j, &v) in batch.row(t).iter().enumerate() {
                let v = v as f64;
                self.abs_sum[j] += v.abs();
                self.sq_sum[j] += v * v;
            }
        }
        self.tokens += batch.rows() as u64;
        Ok(())
    }

    pub fn finish(self) -> Result<CalibrationStats> {
        if self.tokens == 0 {
            return Err(SlimError::EmptyInput);
        }
        let t = self.tokens as f64;
        Ok(CalibrationStats {
            d_in: self.abs_sum.len(),
            mean_abs: self.abs_sum.iter().map(|s| (s / t) as f32).collect(),
            l2_norm: self.sq_sum.iter().map(|s| s.sqrt() as f32).collect(),
            token_count: self.tokens,
        })
    }
}

/// Streams every batch once; batches must share their column count.
pub fn compute_calibration<'a>(
    batches: impl IntoIterator<Item = &'a Matrix>,
) -> Result<CalibrationStats> {
    let mut acc: Option<CalibrationAccumulator> = None;
    for batch in batches {
        acc.get_or_insert_with(|| CalibrationAccumulator::new(batch.cols()))
            .push(batch)?;
    }
    acc.ok_or(SlimError::EmptyInput)?.finish()
}
