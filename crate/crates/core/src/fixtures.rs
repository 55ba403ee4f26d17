//! Seeded synthetic tensors for tests, benchmarks and the `gen-fixture` command.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::SlimError;
use crate::tensor::rng::{seeded, SlimRng};
use crate::tensor::Matrix;

/// Element distribution of a synthetic fixture. `scale` is the standard
/// deviation (Gaussian), the diversity `b` (Laplace, so `E|x| = b`), or the
/// point magnitude (two-point).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureDist {
    Gaussian,
    Laplace,
    TwoPoint,
    /// 95% `N(0, scale²)` plus 5% `N(0, (8·scale)²)` outliers.
    Mixture,
}

impl FromStr for FixtureDist {
    type Err = SlimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "laplace" => Ok(Self::Laplace),
            "two-point" => Ok(Self::TwoPoint),
            "mixture" => Ok(Self::Mixture),
            other => Err(SlimError::ConfigInvalid(format!(
                "unknown distribution '{other}'"
            ))),
        }
    }
}

impl fmt::Display for FixtureDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gaussian => "gaussian",
            Self::Laplace => "laplace",
            Self::TwoPoint => "two-point",
            Self::Mixture => "mixture",
        })
    }
}

pub fn generate(dist: FixtureDist, rows: usize, cols: usize, scale: f32, seed: u64) -> Matrix {
    let mut rng = seeded(seed);
    match dist {
        FixtureDist::Gaussian => gaussian_matrix(&mut rng, rows, cols, scale),
        FixtureDist::Laplace => laplace_matrix(&mut rng, rows, cols, scale),
        FixtureDist::TwoPoint => two_point_matrix(&mut rng, rows, cols, scale),
        FixtureDist::Mixture => mixture_matrix(&mut rng, rows, cols, scale),
    }
}

pub fn gaussian_matrix(rng: &mut SlimRng, rows: usize, cols: usize, std: f32) -> Matrix {
    let normal = Normal::new(0.0f64, std as f64).expect("valid std");
    Matrix::from_fn(rows, cols, |_, _| normal.sample(rng) as f32)
}

pub fn uniform_matrix(rng: &mut SlimRng, rows: usize, cols: usize, lo: f32, hi: f32) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

/// Inverse-CDF Laplace sampling.
pub fn laplace_matrix(rng: &mut SlimRng, rows: usize, cols: usize, b: f32) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let u: f64 = rng.random::<f64>() - 0.5;
        let tail = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
        (-(b as f64) * u.signum() * tail.ln()) as f32
    })
}

pub fn two_point_matrix(rng: &mut SlimRng, rows: usize, cols: usize, c: f32) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| if rng.random::<bool>() { c } else { -c })
}

pub fn mixture_matrix(rng: &mut SlimRng, rows: usize, cols: usize, std: f32) -> Matrix {
    let core = Normal::new(0.0f64, std as f64).expect("valid std");
    let outlier = Normal::new(0.0f64, 8.0 * std as f64).expect("valid std");
    Matrix::from_fn(rows, cols, |_, _| {
        if rng.random::<f64>() < 0.05 {
            outlier.sample(rng) as f32
        } else {
            core.sample(rng) as f32
        }
    })
}
