//! One-shot, layer-wise weight compression.
//!
//! A layer weight `W` (`d_in x d_out`, row-major) is compressed in three
//! steps: symmetric quantization with a histogram-driven scale search,
//! n:m or unstructured pruning of the quantized weight, and a low-rank
//! adapter pair `(L, R)` fitted to the remaining error so that
//! `W ≈ W_c + L·R`. The adapter can be weighted by per-channel activation
//! magnitudes and optionally group-quantized.
//!
//! # Modules
//!
//! - [`tensor`] -- dense matrix, absolute-value histogram, truncated SVD, seeded RNG
//! - [`quantizer`] -- symmetric/AbsMax/group quantization, scale search, channel scaling, FP8
//! - [`pruner`] -- magnitude and activation-weighted scores, sparsity masks
//! - [`adapter`] -- unweighted and saliency-weighted low-rank adapters
//! - [`pipeline`] -- per-layer orchestration, inference, error reports
//! - [`metrics`] -- analytic memory and FLOP budgets
//! - [`io`] -- binary tensor container, calibration statistics, artifacts
//! - [`fixtures`] -- seeded synthetic tensors

pub mod adapter;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod pruner;
pub mod quantizer;
pub mod tensor;

pub use adapter::{LowRankAdapter, SaliencyVector};
pub use error::{Result, SlimError};
pub use io::calibration::CalibrationStats;
pub use pipeline::{CompressedLayer, ErrorReport, LayerCompressionConfig};
pub use pruner::{SparsityMask, SparsityPattern};
pub use quantizer::QuantizedTensor;
pub use tensor::{AbsHistogram, Matrix};

/// Library version string.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
