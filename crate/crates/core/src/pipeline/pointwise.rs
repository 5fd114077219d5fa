use crate::error::{Error, Result};
use crate::pipeline::tile::{for_each_tile, TileConfig};
use crate::raster::Raster;

/// Central difference along x, `(I(x+1) − I(x−1)) / 2`, clamp-to-edge.
pub fn derivative_x(img: &Raster, tiles: TileConfig) -> Result<Raster> {
    img.ensure_single_channel("derivative_x")?;
    let width = img.width();
    let mut out = vec![0.0f32; width * img.height()];
    for_each_tile(width, img.height(), tiles, &mut out, |rect, rows, _| {
        for y in rect.y0..rect.y0 + rect.h {
            for x in rect.x0..rect.x0 + rect.w {
                let (xi, yi) = (x as isize, y as isize);
                rows[(y - rect.y0) * width + x] =
                    half_difference(img.get_clamped(xi + 1, yi), img.get_clamped(xi - 1, yi));
            }
        }
    });
    Raster::new(width, img.height(), 1, out)
}

/// Central difference along y; see [`derivative_x`].
pub fn derivative_y(img: &Raster, tiles: TileConfig) -> Result<Raster> {
    img.ensure_single_channel("derivative_y")?;
    let width = img.width();
    let mut out = vec![0.0f32; width * img.height()];
    for_each_tile(width, img.height(), tiles, &mut out, |rect, rows, _| {
        for y in rect.y0..rect.y0 + rect.h {
            for x in rect.x0..rect.x0 + rect.w {
                let (xi, yi) = (x as isize, y as isize);
                rows[(y - rect.y0) * width + x] =
                    half_difference(img.get_clamped(xi, yi + 1), img.get_clamped(xi, yi - 1));
            }
        }
    });
    Raster::new(width, img.height(), 1, out)
}

/// Both central differences of `img` with the default tiling.
pub fn gradient(img: &Raster) -> Result<(Raster, Raster)> {
    let tiles = TileConfig::default();
    Ok((derivative_x(img, tiles)?, derivative_y(img, tiles)?))
}

#[inline]
fn half_difference(ahead: f32, behind: f32) -> f32 {
    ((ahead as f64 - behind as f64) * 0.5) as f32
}

/// Per-pixel map over `N` equally shaped single-channel rasters.
pub fn pointwise<const N: usize, F>(inputs: [&Raster; N], tiles: TileConfig, f: F) -> Result<Raster>
where
    F: Fn([f32; N]) -> f32 + Sync,
{
    let first = inputs
        .first()
        .ok_or_else(|| Error::contract("pointwise needs at least one input"))?;
    for img in &inputs {
        img.ensure_single_channel("pointwise")?;
        if !img.same_shape(first) {
            return Err(Error::contract("pointwise inputs differ in shape"));
        }
    }
    let (width, height) = (first.width(), first.height());
    let mut out = vec![0.0f32; width * height];
    for_each_tile(width, height, tiles, &mut out, |rect, rows, _| {
        for y in rect.y0..rect.y0 + rect.h {
            for x in rect.x0..rect.x0 + rect.w {
                let i = y * width + x;
                rows[(y - rect.y0) * width + x] = f(inputs.map(|img| img.data()[i]));
            }
        }
    });
    Raster::new(width, height, 1, out)
}

/// Tile-parallel map over pixel coordinates, producing a raster shaped like `shape`.
pub fn pointwise_indexed<F>(shape: &Raster, tiles: TileConfig, f: F) -> Result<Raster>
where
    F: Fn(usize, usize) -> f32 + Sync,
{
    let (width, height) = (shape.width(), shape.height());
    let mut out = vec![0.0f32; width * height];
    for_each_tile(width, height, tiles, &mut out, |rect, rows, _| {
        for y in rect.y0..rect.y0 + rect.h {
            for x in rect.x0..rect.x0 + rect.w {
                rows[(y - rect.y0) * width + x] = f(x, y);
            }
        }
    });
    Raster::new(width, height, 1, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_has_zero_gradient() {
        let (dx, dy) = gradient(&Raster::filled(9, 7, 0.4)).unwrap();
        assert!(dx.data().iter().chain(dy.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn x_ramp_has_constant_interior_slope() {
        let w = 20;
        let img = Raster::from_fn(w, 6, |x, _| x as f32 / w as f32);
        let (dx, dy) = gradient(&img).unwrap();
        for y in 0..6 {
            for x in 1..w - 1 {
                assert!((dx.get(x, y) as f64 - 1.0 / w as f64).abs() < 1e-6);
            }
            // clamp-to-edge halves the border slope
            assert!((dx.get(0, y) as f64 - 0.5 / w as f64).abs() < 1e-6);
        }
        assert!(dy.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn y_ramp_has_constant_interior_slope() {
        let img = Raster::from_fn(5, 12, |_, y| y as f32);
        let (dx, dy) = gradient(&img).unwrap();
        for y in 1..11 {
            for x in 0..5 {
                assert_eq!(dy.get(x, y), 1.0);
            }
        }
        assert!(dx.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pointwise_multiplies_and_checks_shapes() {
        let a = Raster::from_fn(4, 3, |x, y| (x + y) as f32);
        let b = Raster::filled(4, 3, 2.0);
        let out = pointwise([&a, &b], TileConfig::default(), |[p, q]| p * q).unwrap();
        assert_eq!(out.get(3, 2), 10.0);
        let c = Raster::filled(3, 4, 1.0);
        assert!(pointwise([&a, &c], TileConfig::default(), |[p, q]| p + q).is_err());
    }

    #[test]
    fn derivatives_are_tiling_invariant() {
        let img = Raster::from_fn(21, 13, |x, y| ((x * 7 + y * 3) % 11) as f32 / 11.0);
        let reference = derivative_x(&img, TileConfig::new(1, 1).unwrap()).unwrap();
        for t in ["2x2", "8x4", "32x8"] {
            let t: TileConfig = t.parse().unwrap();
            assert!(derivative_x(&img, t).unwrap().bit_identical(&reference));
        }
    }
}
