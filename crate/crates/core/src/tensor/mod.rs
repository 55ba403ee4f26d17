//! Dense matrices and the numerical primitives shared by every stage.

mod histogram;
mod matrix;
#[cfg(test)]
pub(crate) mod oracle;
pub mod rng;
mod svd;

pub use histogram::{default_num_bins, AbsHistogram};
pub use matrix::Matrix;
pub use svd::svd_truncated;
