//! Harris-Hessian keypoint detector.
//!
//! For every sigma the detector runs twelve kernels (blur, derivatives,
//! structure tensor, Harris response, corner count, Hessian determinant).
//! The sigma with the most corners is the characteristic scale σc; two more
//! scales, σc/√2 and σc·√2, are then evaluated. Finally every corner pixel is
//! kept at each scale where its scale-normalized Hessian determinant is a
//! local maximum across neighbouring scales and exceeds a threshold.

mod config;

pub use config::{
    DetectorConfig, Stage, StageTiles, BASE_SIGMAS, DEFAULT_CORNER_THRESHOLD, DEFAULT_HARRIS_K,
    DEFAULT_HESSIAN_THRESHOLD, GATHER_STAGE,
};

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::pipeline::{
    derivative_x, derivative_y, gauss_x, gauss_y, make_gaussian_kernel, pointwise, run_stage, TileConfig, Timings,
};
use crate::raster::{to_gray, Keypoint, Raster};

/// Everything evaluated at one sigma.
#[derive(Debug, Clone)]
pub struct ScaleLevel {
    pub sigma: f64,
    pub response: Raster,
    pub mask: Vec<bool>,
    pub count: usize,
    pub determinant: Raster,
}

/// Scale levels over a common image size, ordered by ascending sigma.
#[derive(Debug, Clone)]
pub struct ScaleSpace {
    levels: Vec<ScaleLevel>,
}

impl ScaleSpace {
    pub fn new(mut levels: Vec<ScaleLevel>) -> Result<Self> {
        if let Some(first) = levels.first() {
            let (w, h) = (first.response.width(), first.response.height());
            for l in &levels {
                let shapes_ok = l.response.width() == w
                    && l.response.height() == h
                    && l.determinant.width() == w
                    && l.determinant.height() == h
                    && l.mask.len() == w * h;
                if !shapes_ok {
                    return Err(Error::contract("scale levels differ in size"));
                }
                if l.count != l.mask.iter().filter(|&&m| m).count() {
                    return Err(Error::contract("corner count disagrees with mask"));
                }
            }
        }
        levels.sort_by(|a, b| a.sigma.total_cmp(&b.sigma));
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[ScaleLevel] {
        &self.levels
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.sigma).collect()
    }
}

/// Result of [`detect`].
#[derive(Debug, Clone)]
pub struct Detection {
    pub keypoints: Vec<Keypoint>,
    pub timings: Timings,
    pub characteristic_sigma: f64,
    /// Corner count per evaluated sigma, in evaluation order (base scales first).
    pub counts: Vec<(f64, usize)>,
}

impl Detection {
    /// Every sigma evaluated, ascending.
    pub fn evaluated_sigmas(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.counts.iter().map(|c| c.0).collect();
        s.sort_by(f64::total_cmp);
        s
    }
}

struct Parameters<'a> {
    k: f64,
    corner_threshold: f64,
    tiles: &'a StageTiles,
}

/// Run all twelve stages at one sigma, timing each into `timings`.
fn evaluate_scale(img: &Raster, sigma: f64, params: &Parameters<'_>, timings: &mut Timings) -> Result<ScaleLevel> {
    let kernel = make_gaussian_kernel(sigma)?;
    let t = |s: Stage| params.tiles.get(s);
    let at = Some(sigma);

    let tmp = run_stage(timings, "gaussx", at, || gauss_x(img, &kernel, t(Stage::GaussX)))?;
    let smooth = run_stage(timings, "gaussy", at, || gauss_y(&tmp, &kernel, t(Stage::GaussY)))?;
    drop(tmp);
    let lx = run_stage(timings, "ddx", at, || derivative_x(&smooth, t(Stage::Ddx)))?;
    let ly = run_stage(timings, "ddy", at, || derivative_y(&smooth, t(Stage::Ddy)))?;
    let xx = run_stage(timings, "mulxx", at, || square(&lx, t(Stage::MulXX)))?;
    let yy = run_stage(timings, "mulyy", at, || square(&ly, t(Stage::MulYY)))?;
    let xy = run_stage(timings, "mulxy", at, || product(&lx, &ly, t(Stage::MulXY)))?;
    let [xx, yy, xy] = run_stage(timings, "gaussx2", at, || {
        blur_each([&xx, &yy, &xy], |r| gauss_x(r, &kernel, t(Stage::GaussX2)))
    })?;
    let [a, b, c] = run_stage(timings, "gaussy2", at, || {
        blur_each([&xx, &yy, &xy], |r| gauss_y(r, &kernel, t(Stage::GaussY2)))
    })?;
    let response = run_stage(timings, "harris", at, || {
        harris_from_tensor(&a, &b, &c, params.k, t(Stage::Harris))
    })?;
    let (mask, count) = run_stage(timings, "count", at, || {
        corner_mask(&response, params.corner_threshold, t(Stage::Count))
    })?;
    let determinant = run_stage(timings, "hessian", at, || {
        determinant_from_gradients(&lx, &ly, sigma, t(Stage::Hessian))
    })?;
    Ok(ScaleLevel {
        sigma,
        response,
        mask,
        count,
        determinant,
    })
}

pub(crate) fn square(r: &Raster, tiles: TileConfig) -> Result<Raster> {
    pointwise([r], tiles, |[v]| (v as f64 * v as f64) as f32)
}

pub(crate) fn product(a: &Raster, b: &Raster, tiles: TileConfig) -> Result<Raster> {
    pointwise([a, b], tiles, |[p, q]| (p as f64 * q as f64) as f32)
}

pub(crate) fn blur_each(inputs: [&Raster; 3], pass: impl Fn(&Raster) -> Result<Raster>) -> Result<[Raster; 3]> {
    Ok([pass(inputs[0])?, pass(inputs[1])?, pass(inputs[2])?])
}

pub(crate) fn harris_from_tensor(a: &Raster, b: &Raster, c: &Raster, k: f64, tiles: TileConfig) -> Result<Raster> {
    pointwise([a, b, c], tiles, |[a, b, c]| {
        let (a, b, c) = (a as f64, b as f64, c as f64);
        let trace = a + b;
        ((a * b - c * c) - k * trace * trace) as f32
    })
}

/// Strict 8-neighbourhood maxima above `threshold`, as a tile-parallel kernel.
pub(crate) fn corner_mask(response: &Raster, threshold: f64, tiles: TileConfig) -> Result<(Vec<bool>, usize)> {
    let (w, h) = (response.width(), response.height());
    let flags = crate::pipeline::pointwise_indexed(response, tiles, |x, y| {
        let v = response.get(x, y);
        if v as f64 <= threshold {
            return 0.0;
        }
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                if response.get(nx as usize, ny as usize) >= v {
                    return 0.0;
                }
            }
        }
        1.0
    })?;
    let mask: Vec<bool> = flags.data().iter().map(|&f| f != 0.0).collect();
    let count = mask.iter().filter(|&&m| m).count();
    Ok((mask, count))
}

/// `σ⁴·(Lxx·Lyy − Lxy²)` from first derivatives by a second round of central differences.
pub(crate) fn determinant_from_gradients(lx: &Raster, ly: &Raster, sigma: f64, tiles: TileConfig) -> Result<Raster> {
    let lxx = derivative_x(lx, tiles)?;
    let lyy = derivative_y(ly, tiles)?;
    let lxy = derivative_y(lx, tiles)?;
    let norm = sigma.powi(4);
    pointwise([&lxx, &lyy, &lxy], tiles, |[xx, yy, xy]| {
        let (xx, yy, xy) = (xx as f64, yy as f64, xy as f64);
        (norm * (xx * yy - xy * xy)) as f32
    })
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::contract(format!("sigma must be positive, got {sigma}")))
    }
}

/// Harris response `(AB − C²) − k(A+B)²` of the σ-blurred image, with the
/// structure tensor smoothed at the same σ.
pub fn harris_response(img: &Raster, sigma: f64, k: f64, tiles: TileConfig) -> Result<Raster> {
    img.ensure_single_channel("harris_response")?;
    check_sigma(sigma)?;
    let kernel = make_gaussian_kernel(sigma)?;
    let smooth = gauss_y(&gauss_x(img, &kernel, tiles)?, &kernel, tiles)?;
    let lx = derivative_x(&smooth, tiles)?;
    let ly = derivative_y(&smooth, tiles)?;
    let blur = |r: &Raster| gauss_y(&gauss_x(r, &kernel, tiles)?, &kernel, tiles);
    let a = blur(&square(&lx, tiles)?)?;
    let b = blur(&square(&ly, tiles)?)?;
    let c = blur(&product(&lx, &ly, tiles)?)?;
    harris_from_tensor(&a, &b, &c, k, tiles)
}

/// Mask of strict 8-neighbourhood maxima with response above `threshold`, and their count.
pub fn count_corners(response: &Raster, threshold: f64) -> Result<(Vec<bool>, usize)> {
    response.ensure_single_channel("count_corners")?;
    corner_mask(response, threshold, TileConfig::default())
}

/// Sigma with the most corners; ties go to the smaller sigma.
pub fn characteristic_sigma(counts: &[(f64, usize)]) -> Result<f64> {
    counts
        .iter()
        .copied()
        .reduce(|best, cur| {
            if cur.1 > best.1 || (cur.1 == best.1 && cur.0 < best.0) {
                cur
            } else {
                best
            }
        })
        .map(|(sigma, _)| sigma)
        .ok_or_else(|| Error::contract("characteristic_sigma needs at least one count"))
}

/// The two refinement scales `(σc/√2, σc·√2)`.
pub fn refinement_sigmas(sigma_c: f64) -> (f64, f64) {
    (sigma_c / SQRT_2, sigma_c * SQRT_2)
}

/// Scale-normalized Hessian determinant `σ⁴·(Lxx·Lyy − Lxy²)` of the σ-blurred image.
pub fn hessian_determinant(img: &Raster, sigma: f64, tiles: TileConfig) -> Result<Raster> {
    img.ensure_single_channel("hessian_determinant")?;
    check_sigma(sigma)?;
    let kernel = make_gaussian_kernel(sigma)?;
    let smooth = gauss_y(&gauss_x(img, &kernel, tiles)?, &kernel, tiles)?;
    let lx = derivative_x(&smooth, tiles)?;
    let ly = derivative_y(&smooth, tiles)?;
    determinant_from_gradients(&lx, &ly, sigma, tiles)
}

/// Keep `(x, y, σi)` for every corner pixel of the scale space where the
/// determinant at σi beats both neighbouring scales (one neighbour at the
/// ends of the schedule) and exceeds `threshold`.
///
/// A pixel counts as a corner if it is marked at any scale. Output is in
/// row-major pixel order, then ascending sigma.
pub fn cull_keypoints(space: &ScaleSpace, threshold: f64) -> Result<Vec<Keypoint>> {
    let levels = space.levels();
    if levels.len() < 3 {
        return Err(Error::contract(format!(
            "culling needs at least 3 scales, got {}",
            levels.len()
        )));
    }
    let width = levels[0].response.width();
    let pixels = levels[0].mask.len();
    let mut out = Vec::new();
    for p in 0..pixels {
        if !levels.iter().any(|l| l.mask[p]) {
            continue;
        }
        let det = |i: usize| levels[i].determinant.data()[p] as f64;
        for i in 0..levels.len() {
            let d = det(i);
            let above_lower = i == 0 || d > det(i - 1);
            let above_upper = i + 1 == levels.len() || d > det(i + 1);
            if above_lower && above_upper && d > threshold {
                out.push(Keypoint::new(p % width, p / width, levels[i].sigma));
            }
        }
    }
    Ok(out)
}

/// Full Harris-Hessian detection.
///
/// Three-channel input is desaturated first. Timings hold twelve entries per
/// evaluated sigma plus one [`GATHER_STAGE`] entry.
pub fn detect(img: &Raster, cfg: &DetectorConfig) -> Result<Detection> {
    cfg.validate()?;
    let gray = to_gray(img)?;
    let params = Parameters {
        k: cfg.harris_k,
        corner_threshold: cfg.corner_threshold,
        tiles: &cfg.tiles,
    };
    let mut timings = Timings::new();
    let mut levels = Vec::with_capacity(cfg.base_sigmas.len() + 2);
    for &sigma in &cfg.base_sigmas {
        levels.push(evaluate_scale(&gray, sigma, &params, &mut timings)?);
    }

    // Barrier: counts from every base scale are needed before refining.
    let counts: Vec<(f64, usize)> = levels.iter().map(|l| (l.sigma, l.count)).collect();
    let sigma_c = characteristic_sigma(&counts)?;
    let (low, high) = refinement_sigmas(sigma_c);
    for sigma in [low, high] {
        if levels.iter().any(|l| l.sigma == sigma) {
            continue;
        }
        levels.push(evaluate_scale(&gray, sigma, &params, &mut timings)?);
    }
    let counts: Vec<(f64, usize)> = levels.iter().map(|l| (l.sigma, l.count)).collect();

    let keypoints = run_stage(&mut timings, GATHER_STAGE, None, || {
        let space = ScaleSpace::new(levels)?;
        cull_keypoints(&space, cfg.hessian_threshold)
    })?;
    Ok(Detection {
        keypoints,
        timings,
        characteristic_sigma: sigma_c,
        counts,
    })
}

/// Stage-by-stage evaluation at one sigma without culling; used by the sweep harness
/// to prepare isolated stage inputs.
pub fn evaluate_scale_level(img: &Raster, sigma: f64, cfg: &DetectorConfig) -> Result<ScaleLevel> {
    cfg.validate()?;
    let params = Parameters {
        k: cfg.harris_k,
        corner_threshold: cfg.corner_threshold,
        tiles: &cfg.tiles,
    };
    evaluate_scale(&to_gray(img)?, sigma, &params, &mut Timings::new())
}

pub(crate) mod kernels {
    //! Stage kernels exposed to the sweep harness.
    pub(crate) use super::{blur_each, corner_mask, determinant_from_gradients, harris_from_tensor, product, square};
}

#[cfg(test)]
mod tests;
