//! Tiled data-parallel kernels with per-stage timing.

mod gaussian;
mod pointwise;
mod tile;
mod timing;

pub use gaussian::{gauss_x, gauss_y, gaussian_blur, make_gaussian_kernel, GaussianKernel};
pub use pointwise::{derivative_x, derivative_y, gradient, pointwise, pointwise_indexed};
pub use tile::{staged_elements, Axis, TileConfig, DEFAULT_MAX_TILE_AREA, SMALL_MAX_TILE_AREA};
pub use timing::{run_stage, StageTiming, Timings};
