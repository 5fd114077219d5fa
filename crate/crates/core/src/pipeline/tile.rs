use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Largest tile area accepted by default (the larger of the two modeled device limits).
pub const DEFAULT_MAX_TILE_AREA: usize = 1024;
/// Tile area limit of the smaller modeled device.
pub const SMALL_MAX_TILE_AREA: usize = 256;

/// Work decomposition of a stage: `tile_w × tile_h` output pixels per tile.
///
/// Tiles play the role of GPU work-groups. Each tile stages its input
/// (including the filter halo) into a private strip before computing, and
/// tiles run in parallel. Outputs never depend on the tile shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TileConfig {
    tile_w: usize,
    tile_h: usize,
}

impl TileConfig {
    pub fn new(tile_w: usize, tile_h: usize) -> Result<Self> {
        for (name, v) in [("tile_w", tile_w), ("tile_h", tile_h)] {
            if !v.is_power_of_two() {
                return Err(Error::Config(format!("{name} must be a power of two >= 1, got {v}")));
            }
        }
        Ok(Self { tile_w, tile_h })
    }

    /// Like [`TileConfig::new`], additionally enforcing `tile_w·tile_h ≤ max_area`.
    pub fn with_limit(tile_w: usize, tile_h: usize, max_area: usize) -> Result<Self> {
        let t = Self::new(tile_w, tile_h)?;
        if !t.fits(max_area) {
            return Err(Error::Config(format!(
                "tile {t} has area {} above the limit {max_area}",
                t.area()
            )));
        }
        Ok(t)
    }

    pub fn tile_w(&self) -> usize {
        self.tile_w
    }

    pub fn tile_h(&self) -> usize {
        self.tile_h
    }

    pub fn area(&self) -> usize {
        self.tile_w * self.tile_h
    }

    pub fn fits(&self, max_area: usize) -> bool {
        self.area() <= max_area
    }

    /// Elements one tile stages for a filter of the given radius along x:
    /// `(tile_w + 2·radius)·tile_h`. Along y the roles swap.
    pub fn staged_strip_len(&self, radius: usize, axis: Axis) -> usize {
        match axis {
            Axis::X => (self.tile_w + 2 * radius) * self.tile_h,
            Axis::Y => self.tile_w * (self.tile_h + 2 * radius),
        }
    }

    /// Every power-of-two tile with both sides in `[min_side, max_side]` and area
    /// at most `max_area`, ordered by width then height.
    pub fn power_of_two_grid(min_side: usize, max_side: usize, max_area: usize) -> Vec<Self> {
        let sides: Vec<usize> = (0..usize::BITS)
            .map(|p| 1usize << p)
            .skip_while(|&s| s < min_side)
            .take_while(|&s| s <= max_side)
            .collect();
        let mut out = Vec::new();
        for &w in &sides {
            for &h in &sides {
                if w * h <= max_area {
                    out.push(Self { tile_w: w, tile_h: h });
                }
            }
        }
        out
    }
}

impl Default for TileConfig {
    fn default() -> Self {
        Self { tile_w: 8, tile_h: 4 }
    }
}

impl fmt::Display for TileConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.tile_w, self.tile_h)
    }
}

impl FromStr for TileConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (w, h) = s
            .trim()
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::Config(format!("tile {s:?} is not of the form WxH")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("tile {s:?} is not of the form WxH")))
        };
        Self::new(parse(w)?, parse(h)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Output region of one tile, clipped to the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct TileRect {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

/// Run `kernel` once per tile over a `width × height` output.
///
/// Rows of tiles (bands) execute in parallel. The kernel receives the tile
/// rectangle, the band's output rows (row stride `width`, first row `rect.y0`)
/// and a scratch buffer reused across the tiles of a band.
pub(crate) fn for_each_tile<F>(width: usize, height: usize, tiles: TileConfig, out: &mut [f32], kernel: F)
where
    F: Fn(TileRect, &mut [f32], &mut Vec<f32>) + Sync,
{
    debug_assert_eq!(out.len(), width * height);
    let band_rows = tiles.tile_h;
    out.par_chunks_mut(width * band_rows)
        .enumerate()
        .for_each(|(band, rows)| {
            let y0 = band * band_rows;
            let h = band_rows.min(height - y0);
            let mut scratch = Vec::new();
            let mut x0 = 0;
            while x0 < width {
                let w = tiles.tile_w.min(width - x0);
                kernel(TileRect { x0, y0, w, h }, rows, &mut scratch);
                x0 += tiles.tile_w;
            }
        });
}

/// Total elements staged by all tiles of one pass along `axis`.
pub fn staged_elements(width: usize, height: usize, tiles: TileConfig, radius: usize, axis: Axis) -> usize {
    let cols = width.div_ceil(tiles.tile_w);
    let rows = height.div_ceil(tiles.tile_h);
    let full_w = |i: usize| tiles.tile_w.min(width - i * tiles.tile_w);
    let full_h = |j: usize| tiles.tile_h.min(height - j * tiles.tile_h);
    let mut total = 0;
    for j in 0..rows {
        for i in 0..cols {
            total += match axis {
                Axis::X => (full_w(i) + 2 * radius) * full_h(j),
                Axis::Y => full_w(i) * (full_h(j) + 2 * radius),
            };
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_powers_of_two_and_oversized() {
        assert!(TileConfig::new(3, 4).is_err());
        assert!(TileConfig::new(0, 4).is_err());
        assert!(TileConfig::new(1, 1).is_ok());
        assert!(TileConfig::with_limit(32, 16, SMALL_MAX_TILE_AREA).is_err());
        assert!(TileConfig::with_limit(32, 8, SMALL_MAX_TILE_AREA).is_ok());
        assert!(TileConfig::with_limit(128, 8, DEFAULT_MAX_TILE_AREA).is_ok());
    }

    #[test]
    fn parses_and_displays() {
        let t: TileConfig = "32x8".parse().unwrap();
        assert_eq!((t.tile_w(), t.tile_h()), (32, 8));
        assert_eq!(t.to_string(), "32x8");
        assert!("32*8".parse::<TileConfig>().is_err());
        assert!("6x8".parse::<TileConfig>().is_err());
    }

    #[test]
    fn strip_matches_prefetch_geometry() {
        // 121-tap filter (radius 60) on an 8x4 work-group: (60 + 8 + 60) * 4.
        let t = TileConfig::new(8, 4).unwrap();
        assert_eq!(t.staged_strip_len(60, Axis::X), (60 + 8 + 60) * 4);
        assert_eq!(t.staged_strip_len(60, Axis::Y), 8 * (60 + 4 + 60));
    }

    #[test]
    fn grid_respects_bounds() {
        let grid = TileConfig::power_of_two_grid(2, 32, 256);
        assert_eq!(grid.first().unwrap().to_string(), "2x2");
        assert!(grid.iter().all(|t| t.area() <= 256));
        assert!(grid.contains(&TileConfig::new(32, 8).unwrap()));
        assert!(!grid.contains(&TileConfig::new(32, 16).unwrap()));
    }

    #[test]
    fn every_pixel_visited_once() {
        for (w, h) in [(1, 1), (5, 3), (17, 9)] {
            for t in [TileConfig::new(2, 2).unwrap(), TileConfig::new(8, 4).unwrap()] {
                let mut out = vec![0.0f32; w * h];
                for_each_tile(w, h, t, &mut out, |r, rows, _| {
                    for y in r.y0..r.y0 + r.h {
                        for x in r.x0..r.x0 + r.w {
                            rows[(y - r.y0) * w + x] += 1.0;
                        }
                    }
                });
                assert!(out.iter().all(|&v| v == 1.0));
            }
        }
    }

    #[test]
    fn staged_elements_counts_halo_per_tile() {
        let t = TileConfig::new(4, 2).unwrap();
        // 8x4 image: 2x2 tiles of 4x2, each stages (4 + 2)*2 along x.
        assert_eq!(staged_elements(8, 4, t, 1, Axis::X), 4 * 12);
        assert_eq!(staged_elements(8, 4, t, 0, Axis::X), 32);
    }
}
