//! Scalar rasters, image decoding and the keypoint/descriptor text formats.
//!
//! All pixel data is stored row-major as `f32`. Decoded images are
//! normalized to `[0, 1]`; rasters built by hand may hold any finite value.

mod decode;
mod formats;

pub use decode::{decode_image, encode_pgm};
pub use formats::{
    parse_descriptor_file, parse_keypoint_file, write_descriptor_file, write_keypoint_file, DescriptorRecord, Keypoint,
};

use crate::error::{Error, Result};

/// Rec. 709 luma weights used by [`desaturate`].
pub const LUMA_WEIGHTS: [f64; 3] = [0.2126, 0.7152, 0.0722];

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::contract(format!(
                "raster dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::contract(format!(
                "raster must have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::contract(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Single-channel raster filled with `value`.
    ///
    /// Panics on a zero dimension.
    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be positive");
        Self {
            width,
            height,
            channels: 1,
            data: vec![value; width * height],
        }
    }

    /// Single-channel raster with `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut out = Self::filled(width, height, 0.0);
        for y in 0..height {
            for x in 0..width {
                out.data[y * width + x] = f(x, y);
            }
        }
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Value of a single-channel pixel.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        debug_assert_eq!(self.channels, 1);
        self.data[y * self.width + x]
    }

    /// Value with coordinates clamped to the image (clamp-to-edge border).
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    pub(crate) fn ensure_single_channel(&self, op: &str) -> Result<()> {
        if self.channels != 1 {
            return Err(Error::contract(format!(
                "{op} requires a single-channel raster, got {} channels",
                self.channels
            )));
        }
        Ok(())
    }

    pub(crate) fn same_shape(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    /// Swap rows and columns of a single-channel raster.
    pub fn transpose(&self) -> Raster {
        debug_assert_eq!(self.channels, 1);
        Raster::from_fn(self.height, self.width, |x, y| self.get(y, x))
    }

    /// Mirror a single-channel raster left to right.
    pub fn mirror_x(&self) -> Raster {
        debug_assert_eq!(self.channels, 1);
        Raster::from_fn(self.width, self.height, |x, y| self.get(self.width - 1 - x, y))
    }

    /// Apply `f` to every sample.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Bitwise equality of the sample data, distinguishing `-0.0` and NaN payloads.
    pub fn bit_identical(&self, other: &Raster) -> bool {
        self.same_shape(other)
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Convert a 3-channel raster to grayscale with Rec. 709 luma weights.
///
/// Each output pixel is accumulated in `f64` and rounded once, so a gray
/// input (R = G = B) maps back to its own value.
pub fn desaturate(img: &Raster) -> Result<Raster> {
    if img.channels != 3 {
        return Err(Error::contract(format!(
            "desaturate requires 3 channels, got {}",
            img.channels
        )));
    }
    let [wr, wg, wb] = LUMA_WEIGHTS;
    let data = img
        .data
        .chunks_exact(3)
        .map(|px| {
            let v = wr * px[0] as f64 + wg * px[1] as f64 + wb * px[2] as f64;
            v as f32
        })
        .collect();
    Raster::new(img.width, img.height, 1, data)
}

/// Grayscale view of `img`: desaturated when it has three channels, cloned otherwise.
pub fn to_gray(img: &Raster) -> Result<Raster> {
    match img.channels {
        1 => Ok(img.clone()),
        _ => desaturate(img),
    }
}
