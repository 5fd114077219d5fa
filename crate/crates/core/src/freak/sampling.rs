use crate::freak::pattern::ReceptiveField;
use crate::raster::{Keypoint, Raster};

/// Keypoint sigma at which one pattern unit equals one pixel.
pub const SIGMA_REF: f64 = 2.0;

/// Summed-area table of a single-channel raster, `(w+1) × (h+1)` entries in f64.
///
/// Pixel `(x, y)` covers the unit square `[x, x+1) × [y, y+1)`. Within each
/// square the continuous area integral is bilinear, so bilinear interpolation
/// of the table gives exact box sums for fractional box edges.
#[derive(Debug, Clone)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    table: Vec<f64>,
}

impl IntegralImage {
    pub fn new(img: &Raster) -> Self {
        debug_assert_eq!(img.channels(), 1);
        let (w, h) = (img.width(), img.height());
        let stride = w + 1;
        let mut table = vec![0.0f64; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0.0f64;
            for x in 0..w {
                row += img.get(x, y) as f64;
                table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row;
            }
        }
        Self {
            width: w,
            height: h,
            table,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    fn at(&self, x: usize, y: usize) -> f64 {
        self.table[y * (self.width + 1) + x]
    }

    /// Integral over `[0, u) × [0, v)`, with `u`, `v` already inside the image.
    fn integral(&self, u: f64, v: f64) -> f64 {
        let i = (u.floor() as usize).min(self.width - 1);
        let j = (v.floor() as usize).min(self.height - 1);
        let (fu, fv) = (u - i as f64, v - j as f64);
        let top = self.at(i, j) * (1.0 - fu) + self.at(i + 1, j) * fu;
        let bottom = self.at(i, j + 1) * (1.0 - fu) + self.at(i + 1, j + 1) * fu;
        top * (1.0 - fv) + bottom * fv
    }

    /// Mean over the axis-aligned box of half-size `half` centred at `(cx, cy)`
    /// in continuous pixel coordinates. The centre is clamped into the image and
    /// the box is clipped to it.
    pub fn box_mean(&self, cx: f64, cy: f64, half: f64) -> f64 {
        let (w, h) = (self.width as f64, self.height as f64);
        let cx = cx.clamp(0.0, w);
        let cy = cy.clamp(0.0, h);
        let x0 = (cx - half).clamp(0.0, w);
        let x1 = (cx + half).clamp(0.0, w);
        let y0 = (cy - half).clamp(0.0, h);
        let y1 = (cy + half).clamp(0.0, h);
        let area = (x1 - x0) * (y1 - y0);
        if area <= 0.0 {
            // Degenerate only for half == 0 or a zero-sized image edge case.
            let px = (cx.floor() as usize).min(self.width - 1);
            let py = (cy.floor() as usize).min(self.height - 1);
            return self.at(px + 1, py + 1) - self.at(px, py + 1) - self.at(px + 1, py) + self.at(px, py);
        }
        let sum = self.integral(x1, y1) - self.integral(x0, y1) - self.integral(x1, y0) + self.integral(x0, y0);
        sum / area
    }
}

/// Mean intensity of one receptive field placed at `kp`, rotated by `angle`.
///
/// The field centre sits at the keypoint's pixel centre plus the rotated
/// offset, scaled by `kp.sigma / SIGMA_REF`. The disc of radius `r` is
/// approximated by the equal-area square. The mean is rounded to `f32`, which
/// absorbs summed-area round-off so equal regions compare equal.
pub fn sample_field(ii: &IntegralImage, kp: &Keypoint, field: &ReceptiveField, angle: f64) -> f32 {
    let scale = kp.sigma / SIGMA_REF;
    let (sin, cos) = angle.sin_cos();
    let ox = (field.cx * cos - field.cy * sin) * scale;
    let oy = (field.cx * sin + field.cy * cos) * scale;
    let half = (field.radius * scale * std::f64::consts::PI.sqrt() / 2.0).max(0.5);
    ii.box_mean(kp.x as f64 + 0.5 + ox, kp.y as f64 + 0.5 + oy, half) as f32
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_box_mean(img: &Raster, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        // Area-weighted pixel sum of the clipped box.
        let (w, h) = (img.width() as f64, img.height() as f64);
        let (x0, x1, y0, y1) = (x0.clamp(0.0, w), x1.clamp(0.0, w), y0.clamp(0.0, h), y1.clamp(0.0, h));
        let mut sum = 0.0;
        for y in 0..img.height() {
            for x in 0..img.width() {
                let ox = (x1.min(x as f64 + 1.0) - x0.max(x as f64)).max(0.0);
                let oy = (y1.min(y as f64 + 1.0) - y0.max(y as f64)).max(0.0);
                sum += ox * oy * img.get(x, y) as f64;
            }
        }
        sum / ((x1 - x0) * (y1 - y0))
    }

    #[test]
    fn box_mean_matches_area_weighted_sum() {
        let img = Raster::from_fn(13, 9, |x, y| ((x * 5 + y * 11) % 7) as f32 / 7.0);
        let ii = IntegralImage::new(&img);
        for &(cx, cy, half) in &[(6.3, 4.1, 2.25), (1.0, 1.0, 0.5), (10.7, 7.9, 1.3), (6.5, 4.5, 4.0)] {
            let expected = brute_box_mean(&img, cx - half, cx + half, cy - half, cy + half);
            assert!((ii.box_mean(cx, cy, half) - expected).abs() < 1e-12);
        }
        // Clipped at the border.
        let expected = brute_box_mean(&img, 0.0, 1.75, 0.0, 2.0);
        assert!((ii.box_mean(0.25, 0.5, 1.5) - expected).abs() < 1e-12);
    }

    #[test]
    fn constant_image_samples_exactly() {
        let img = Raster::filled(40, 30, 0.3);
        let ii = IntegralImage::new(&img);
        let kp = Keypoint::new(20, 15, 4.0);
        for &(cx, cy, r) in &[(0.0, 0.0, 0.5), (7.3, -2.1, 3.0), (-40.0, 80.0, 9.0)] {
            let f = ReceptiveField { cx, cy, radius: r };
            for angle in [0.0, 0.7, -2.5] {
                assert_eq!(sample_field(&ii, &kp, &f, angle), 0.3f32);
            }
        }
    }

    #[test]
    fn full_turn_is_identity() {
        let img = Raster::from_fn(64, 64, |x, y| {
            ((x as f32) * 0.13).sin() * ((y as f32) * 0.07).cos() * 0.5 + 0.5
        });
        let ii = IntegralImage::new(&img);
        let kp = Keypoint::new(31, 33, 2.0);
        let f = ReceptiveField {
            cx: 5.5,
            cy: -3.25,
            radius: 2.0,
        };
        let a = sample_field(&ii, &kp, &f, 0.0) as f64;
        let b = sample_field(&ii, &kp, &f, 2.0 * std::f64::consts::PI) as f64;
        assert!((a - b).abs() <= 1e-9);
    }

    #[test]
    fn field_inside_white_square_reads_one() {
        let img = Raster::from_fn(64, 64, |x, y| {
            if (16..48).contains(&x) && (16..48).contains(&y) {
                1.0
            } else {
                0.0
            }
        });
        let ii = IntegralImage::new(&img);
        let kp = Keypoint::new(32, 32, 2.0);
        let inside = ReceptiveField {
            cx: 4.0,
            cy: 3.0,
            radius: 5.0,
        };
        assert_eq!(sample_field(&ii, &kp, &inside, 0.3), 1.0);
        let outside = ReceptiveField {
            cx: -25.0,
            cy: 0.0,
            radius: 2.0,
        };
        assert_eq!(sample_field(&ii, &kp, &outside, 0.0), 0.0);
    }
}
