//! Persistence: the binary tensor container, calibration statistics and
//! compressed-layer artifacts.

pub mod artifact;
pub mod calibration;
pub mod container;

pub use artifact::{deserialize_compressed_layer, serialize_compressed_layer};
pub use calibration::{compute_calibration, CalibrationAccumulator, CalibrationStats};
pub use container::{read_container, write_container, Tensor, TensorData, TensorMap};
