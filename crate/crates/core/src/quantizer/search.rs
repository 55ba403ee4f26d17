//! Histogram-driven search for the per-tensor scale `α`.
//!
//! The objective is the expected squared error of quantizing `|w|`:
//! rounding error for magnitudes up to `α` plus clipping error `(α - x)²`
//! beyond it, integrated over the magnitude histogram with the midpoint
//! rule.

use super::check_bits;
use crate::error::{Result, SlimError};
use crate::tensor::AbsHistogram;

/// Result of a scale search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleSearch {
    pub alpha: f32,
    pub error: f64,
}

/// Multi-grid search parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    /// Samples in the first uniform grid over `(0, M]`.
    pub coarse_points: usize,
    /// Final step size; `None` selects `M / 1000`.
    pub eta_high: Option<f64>,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            coarse_points: 10,
            eta_high: None,
        }
    }
}

pub fn estimate_error(h: &AbsHistogram, alpha: f32, q: u32) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(SlimError::NonPositiveAlpha(alpha));
    }
    check_bits(q)?;
    Ok(objective(h, alpha as f64, q))
}

fn objective(h: &AbsHistogram, alpha: f64, q: u32) -> f64 {
    let levels = 2f64.powi(q as i32 - 1);
    let step = alpha / levels;
    h.masses()
        .map(|(x, p)| {
            let err = if x <= alpha {
                (x / step).round() * step - x
            } else {
                alpha - x
            };
            p * err * err
        })
        .sum()
}

/// Coarse-to-fine minimization of [`estimate_error`].
///
/// The first level samples `coarse_points` uniform scales over `(0, M]`,
/// `M` included. Each further level scans `±step` around the best scale so
/// far with the step divided by `coarse_points`, never finer than
/// `eta_high`, until the step reaches `eta_high`. The best scale over all
/// evaluations is returned. An all-zero histogram yields `(1.0, 0.0)`.
pub fn slimquant_search(h: &AbsHistogram, q: u32, params: SearchParams) -> Result<ScaleSearch> {
    check_bits(q)?;
    if params.coarse_points < 2 {
        return Err(SlimError::ConfigInvalid(
            "coarse_points must be at least 2".into(),
        ));
    }
    let m = h.max_abs() as f64;
    if m == 0.0 {
        return Ok(ScaleSearch {
            alpha: 1.0,
            error: 0.0,
        });
    }
    let eta_high = params.eta_high.unwrap_or(m / 1000.0);
    if !(eta_high.is_finite() && eta_high > 0.0) {
        return Err(SlimError::ConfigInvalid(format!(
            "eta_high must be positive, got {eta_high}"
        )));
    }

    let mut best = (m, f64::INFINITY);
    let consider = |alpha: f64, best: &mut (f64, f64)| {
        let alpha32 = alpha as f32;
        if alpha32 <= 0.0 {
            return;
        }
        let e = objective(h, alpha32 as f64, q);
        if e < best.1 {
            *best = (alpha32 as f64, e);
        }
    };

    let coarse = params.coarse_points;
    let mut step = m / coarse as f64;
    for k in 1..=coarse {
        consider(m * k as f64 / coarse as f64, &mut best);
    }
    while step > eta_high {
        let fine = (step / coarse as f64).max(eta_high);
        let center = best.0;
        let n = (2.0 * step / fine).round() as usize;
        for i in 0..=n {
            let alpha = center - step + i as f64 * fine;
            if alpha > 0.0 && alpha <= m {
                consider(alpha, &mut best);
            }
        }
        step = fine;
    }
    Ok(ScaleSearch {
        alpha: best.0 as f32,
        error: best.1,
    })
}

/// Exhaustive scan of `points` uniform scales `M·k/points`, `k = 1..=points`.
/// Reference for judging [`slimquant_search`].
pub fn dense_grid_search(h: &AbsHistogram, q: u32, points: usize) -> Result<ScaleSearch> {
    check_bits(q)?;
    if points == 0 {
        return Err(SlimError::ConfigInvalid(
            "grid needs at least one point".into(),
        ));
    }
    let m = h.max_abs() as f64;
    if m == 0.0 {
        return Ok(ScaleSearch {
            alpha: 1.0,
            error: 0.0,
        });
    }
    let mut best = ScaleSearch {
        alpha: h.max_abs(),
        error: f64::INFINITY,
    };
    for k in 1..=points {
        let alpha = (m * k as f64 / points as f64) as f32;
        if alpha <= 0.0 {
            continue;
        }
        let e = objective(h, alpha as f64, q);
        if e < best.error {
            best = ScaleSearch { alpha, error: e };
        }
    }
    Ok(best)
}
