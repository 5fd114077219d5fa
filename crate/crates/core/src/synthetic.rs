//! Deterministic synthetic images for tests, demos and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::raster::Raster;

/// Seed of the bundled 800×600 test image.
pub const POSTER_SEED: u64 = 2013;

#[derive(Debug, Clone, Copy)]
struct Blob {
    x: f64,
    y: f64,
    sx: f64,
    sy: f64,
    theta: f64,
    amplitude: f64,
}

impl Blob {
    fn eval(&self, x: f64, y: f64) -> f64 {
        let (s, c) = self.theta.sin_cos();
        let (dx, dy) = (x - self.x, y - self.y);
        let u = (dx * c + dy * s) / self.sx;
        let v = (-dx * s + dy * c) / self.sy;
        self.amplitude * (-0.5 * (u * u + v * v)).exp()
    }
}

/// Smooth continuous intensity field built from anisotropic Gaussian blobs.
///
/// Coordinates are relative to the render centre, so the same texture can be
/// rendered rotated about that centre.
#[derive(Debug, Clone)]
pub struct Texture {
    base: f64,
    blobs: Vec<Blob>,
}

impl Texture {
    /// Random blob texture covering roughly a 240×240 patch.
    pub fn seeded(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blobs = (0..160)
            .map(|_| Blob {
                x: rng.gen_range(-120.0..120.0),
                y: rng.gen_range(-120.0..120.0),
                sx: rng.gen_range(2.0..9.0),
                sy: rng.gen_range(2.0..9.0),
                theta: rng.gen_range(0.0..std::f64::consts::PI),
                amplitude: rng.gen_range(-0.25..0.25),
            })
            .collect();
        Self { base: 0.5, blobs }
    }

    /// One elongated blob off the centre plus a weaker one, giving a clear
    /// dominant direction.
    pub fn anisotropic_blob() -> Self {
        Self {
            base: 0.2,
            blobs: vec![
                Blob {
                    x: 7.0,
                    y: 2.0,
                    sx: 9.0,
                    sy: 3.5,
                    theta: 0.3,
                    amplitude: 0.6,
                },
                Blob {
                    x: -4.0,
                    y: 6.0,
                    sx: 3.0,
                    sy: 3.0,
                    theta: 0.0,
                    amplitude: 0.2,
                },
            ],
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.base + self.blobs.iter().map(|b| b.eval(x, y)).sum::<f64>()
    }

    /// Render centred on the image, unrotated.
    pub fn render(&self, width: usize, height: usize) -> Raster {
        self.render_rotated(width, height, (width as f64 / 2.0, height as f64 / 2.0), 0.0)
    }

    /// Render the texture rotated by `angle` about `center` (pixel-centre
    /// coordinates, i.e. pixel `(x, y)` sits at `(x + 0.5, y + 0.5)`).
    pub fn render_rotated(&self, width: usize, height: usize, center: (f64, f64), angle: f64) -> Raster {
        let (s, c) = angle.sin_cos();
        Raster::from_fn(width, height, |x, y| {
            let (px, py) = (x as f64 + 0.5 - center.0, y as f64 + 0.5 - center.1);
            let (u, v) = (px * c + py * s, -px * s + py * c);
            self.eval(u, v).clamp(0.0, 1.0) as f32
        })
    }
}

/// Round every pixel to a multiple of `1/levels`.
pub fn quantize(img: &Raster, levels: u32) -> Raster {
    let l = levels as f32;
    img.map(|v| (v * l).round() / l)
}

/// White axis-aligned square of side `side` with top-left at `(x0, y0)` on black.
pub fn white_square(width: usize, height: usize, x0: usize, y0: usize, side: usize) -> Raster {
    Raster::from_fn(width, height, |x, y| {
        if (x0..x0 + side).contains(&x) && (y0..y0 + side).contains(&y) {
            1.0
        } else {
            0.0
        }
    })
}

/// Isotropic Gaussian blob of peak 1 centred on pixel `(cx, cy)`.
pub fn gaussian_blob(width: usize, height: usize, cx: f64, cy: f64, sigma: f64) -> Raster {
    Raster::from_fn(width, height, |x, y| {
        let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
        (-d2 / (2.0 * sigma * sigma)).exp() as f32
    })
}

/// Indoor-scene stand-in: posters, frames and blobs on a shaded wall,
/// quantised to 8-bit levels.
pub fn poster_wall(width: usize, height: usize, seed: u64) -> Raster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as f64, height as f64);
    let mut img: Vec<f64> = (0..width * height)
        .map(|i| {
            let (x, y) = ((i % width) as f64, (i / width) as f64);
            0.35 + 0.15 * (x / w) + 0.1 * (y / h)
        })
        .collect();

    let poster_count = (width * height / 12_000).max(4);
    for _ in 0..poster_count {
        let pw = rng.gen_range(w * 0.04..w * 0.2);
        let ph = rng.gen_range(h * 0.04..h * 0.25);
        let x0 = rng.gen_range(0.0..w - pw);
        let y0 = rng.gen_range(0.0..h - ph);
        let level = rng.gen_range(0.0..1.0);
        let frame = rng.gen_bool(0.5).then(|| rng.gen_range(0.0..1.0));
        for y in y0 as usize..(y0 + ph) as usize {
            for x in x0 as usize..(x0 + pw) as usize {
                let border = (x as f64 - x0) < 3.0
                    || (x0 + pw - x as f64) < 3.0
                    || (y as f64 - y0) < 3.0
                    || (y0 + ph - y as f64) < 3.0;
                img[y * width + x] = match frame {
                    Some(f) if border => f,
                    _ => level,
                };
            }
        }
    }

    for _ in 0..poster_count {
        let b = Blob {
            x: rng.gen_range(0.0..w),
            y: rng.gen_range(0.0..h),
            sx: rng.gen_range(3.0..20.0),
            sy: rng.gen_range(3.0..20.0),
            theta: rng.gen_range(0.0..std::f64::consts::PI),
            amplitude: rng.gen_range(-0.4..0.4),
        };
        for (i, v) in img.iter_mut().enumerate() {
            *v += b.eval((i % width) as f64, (i / width) as f64);
        }
    }

    let data = img
        .into_iter()
        .map(|v| ((v.clamp(0.0, 1.0) * 255.0).round() / 255.0) as f32)
        .collect();
    Raster::new(width, height, 1, data).expect("shape matches")
}

/// The bundled 800×600 test image.
pub fn test_image() -> Raster {
    poster_wall(800, 600, POSTER_SEED)
}
