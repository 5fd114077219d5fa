//! Multi-scale Harris–Hessian keypoint detection with FREAK descriptors,
//! tiled data-parallel kernels, benchmarking and thermal telemetry analysis.

pub mod bench;
pub mod detector;
pub mod error;
pub mod freak;
pub mod pipeline;
pub mod raster;
pub mod synthetic;
pub mod telemetry;

pub use error::{Error, Result};
