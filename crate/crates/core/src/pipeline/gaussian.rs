use crate::error::{Error, Result};
use crate::pipeline::tile::{for_each_tile, TileConfig};
use crate::raster::Raster;

/// Sampled, normalized 1-D Gaussian with `2·radius + 1` taps.
///
/// The radius is `max(1, round(3σ))`, which gives the 121-tap filter at σ = 20.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    sigma: f64,
    radius: usize,
    weights: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::contract(format!(
                "gaussian sigma must be positive and finite, got {sigma}"
            )));
        }
        let radius = ((3.0 * sigma).round() as usize).max(1);
        let denom = 2.0 * sigma * sigma;
        let mut weights: Vec<f64> = (0..=2 * radius)
            .map(|i| {
                let d = i as f64 - radius as f64;
                (-d * d / denom).exp()
            })
            .collect();
        let sum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= sum;
        }
        // Enforce exact symmetry after normalization.
        for i in 0..radius {
            weights[2 * radius - i] = weights[i];
        }
        Ok(Self { sigma, radius, weights })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn taps(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

pub fn make_gaussian_kernel(sigma: f64) -> Result<GaussianKernel> {
    GaussianKernel::new(sigma)
}

/// Horizontal Gaussian pass with clamp-to-edge borders.
///
/// Each tile copies a `(tile_w + 2·radius) × tile_h` strip of the input into
/// its scratch buffer, then convolves from there.
pub fn gauss_x(img: &Raster, kernel: &GaussianKernel, tiles: TileConfig) -> Result<Raster> {
    img.ensure_single_channel("gauss_x")?;
    let (width, height) = (img.width(), img.height());
    let r = kernel.radius;
    let weights = &kernel.weights;
    let mut out = vec![0.0f32; width * height];
    for_each_tile(width, height, tiles, &mut out, |rect, rows, strip| {
        let strip_w = rect.w + 2 * r;
        strip.clear();
        for y in rect.y0..rect.y0 + rect.h {
            for xs in 0..strip_w {
                let x = rect.x0 as isize + xs as isize - r as isize;
                strip.push(img.get_clamped(x, y as isize));
            }
        }
        for ty in 0..rect.h {
            let src = &strip[ty * strip_w..(ty + 1) * strip_w];
            let dst = &mut rows[ty * width + rect.x0..ty * width + rect.x0 + rect.w];
            for (tx, d) in dst.iter_mut().enumerate() {
                *d = convolve(weights, src[tx..tx + weights.len()].iter().copied());
            }
        }
    });
    Raster::new(width, height, 1, out)
}

/// Vertical Gaussian pass; see [`gauss_x`]. Strips are `tile_w × (tile_h + 2·radius)`.
pub fn gauss_y(img: &Raster, kernel: &GaussianKernel, tiles: TileConfig) -> Result<Raster> {
    img.ensure_single_channel("gauss_y")?;
    let (width, height) = (img.width(), img.height());
    let r = kernel.radius;
    let weights = &kernel.weights;
    let mut out = vec![0.0f32; width * height];
    for_each_tile(width, height, tiles, &mut out, |rect, rows, strip| {
        let strip_h = rect.h + 2 * r;
        strip.clear();
        for ys in 0..strip_h {
            let y = rect.y0 as isize + ys as isize - r as isize;
            for x in rect.x0..rect.x0 + rect.w {
                strip.push(img.get_clamped(x as isize, y));
            }
        }
        for ty in 0..rect.h {
            for tx in 0..rect.w {
                let column = (0..weights.len()).map(|i| strip[(ty + i) * rect.w + tx]);
                rows[ty * width + rect.x0 + tx] = convolve(weights, column);
            }
        }
    });
    Raster::new(width, height, 1, out)
}

/// Separable blur: x pass then y pass.
pub fn gaussian_blur(img: &Raster, kernel: &GaussianKernel, tiles: TileConfig) -> Result<Raster> {
    gauss_y(&gauss_x(img, kernel, tiles)?, kernel, tiles)
}

// Both passes accumulate taps in the same order in f64, so gauss_y is
// exactly the transpose of gauss_x on the transposed image.
#[inline]
fn convolve(weights: &[f64], samples: impl Iterator<Item = f32>) -> f32 {
    let mut acc = 0.0f64;
    for (w, s) in weights.iter().zip(samples) {
        acc += w * s as f64;
    }
    acc as f32
}
