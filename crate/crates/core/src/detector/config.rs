use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::pipeline::{TileConfig, DEFAULT_MAX_TILE_AREA};

/// The nine scales evaluated before the characteristic scale is known.
pub const BASE_SIGMAS: [f64; 9] = [0.7, 2.0, 4.0, 6.0, 8.0, 12.0, 16.0, 20.0, 24.0];

pub const DEFAULT_HARRIS_K: f64 = 0.04;
/// Calibrated on the bundled 800×600 poster image (see `hhfreak calibrate`).
pub const DEFAULT_CORNER_THRESHOLD: f64 = 1e-6;
/// Calibrated on the bundled 800×600 poster image (see `hhfreak calibrate`).
pub const DEFAULT_HESSIAN_THRESHOLD: f64 = 1e-3;

/// The twelve kernel calls run for every sigma, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    GaussX,
    GaussY,
    Ddx,
    Ddy,
    MulXX,
    MulYY,
    MulXY,
    GaussX2,
    GaussY2,
    Harris,
    Count,
    Hessian,
}

impl Stage {
    pub const ALL: [Stage; 12] = [
        Stage::GaussX,
        Stage::GaussY,
        Stage::Ddx,
        Stage::Ddy,
        Stage::MulXX,
        Stage::MulYY,
        Stage::MulXY,
        Stage::GaussX2,
        Stage::GaussY2,
        Stage::Harris,
        Stage::Count,
        Stage::Hessian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::GaussX => "gaussx",
            Stage::GaussY => "gaussy",
            Stage::Ddx => "ddx",
            Stage::Ddy => "ddy",
            Stage::MulXX => "mulxx",
            Stage::MulYY => "mulyy",
            Stage::MulXY => "mulxy",
            Stage::GaussX2 => "gaussx2",
            Stage::GaussY2 => "gaussy2",
            Stage::Harris => "harris",
            Stage::Count => "count",
            Stage::Hessian => "hessian",
        }
    }

    pub fn is_gaussian(self) -> bool {
        matches!(self, Stage::GaussX | Stage::GaussY | Stage::GaussX2 | Stage::GaussY2)
    }

    fn index(self) -> usize {
        Stage::ALL.iter().position(|&s| s == self).unwrap()
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage {s:?}")))
    }
}

/// Name of the final keypoint-gathering call.
pub const GATHER_STAGE: &str = "gather";

/// Tile shape per detector stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageTiles([TileConfig; 12]);

impl StageTiles {
    pub fn uniform(tiles: TileConfig) -> Self {
        Self([tiles; 12])
    }

    pub fn get(&self, stage: Stage) -> TileConfig {
        self.0[stage.index()]
    }

    pub fn set(&mut self, stage: Stage, tiles: TileConfig) {
        self.0[stage.index()] = tiles;
    }

    pub fn iter(&self) -> impl Iterator<Item = (Stage, TileConfig)> + '_ {
        Stage::ALL.into_iter().zip(self.0.iter().copied())
    }
}

impl Default for StageTiles {
    fn default() -> Self {
        Self::uniform(TileConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub base_sigmas: Vec<f64>,
    pub harris_k: f64,
    pub corner_threshold: f64,
    pub hessian_threshold: f64,
    pub tiles: StageTiles,
    pub max_tile_area: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            base_sigmas: BASE_SIGMAS.to_vec(),
            harris_k: DEFAULT_HARRIS_K,
            corner_threshold: DEFAULT_CORNER_THRESHOLD,
            hessian_threshold: DEFAULT_HESSIAN_THRESHOLD,
            tiles: StageTiles::default(),
            max_tile_area: DEFAULT_MAX_TILE_AREA,
        }
    }
}

impl DetectorConfig {
    pub fn with_tiles(mut self, tiles: TileConfig) -> Self {
        self.tiles = StageTiles::uniform(tiles);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_sigmas.is_empty() {
            return Err(Error::Config("base_sigmas is empty".into()));
        }
        if self.base_sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Config("base_sigmas must be positive".into()));
        }
        if self.base_sigmas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("base_sigmas must be strictly increasing".into()));
        }
        for (name, v) in [
            ("corner_threshold", self.corner_threshold),
            ("hessian_threshold", self.hessian_threshold),
            ("harris_k", self.harris_k),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (stage, t) in self.tiles.iter() {
            if !t.fits(self.max_tile_area) {
                return Err(Error::Config(format!(
                    "tile {t} for stage {stage} exceeds max_tile_area {}",
                    self.max_tile_area
                )));
            }
        }
        Ok(())
    }

    /// Parse a `key = value` config file on top of the defaults.
    ///
    /// Keys: `base_sigmas` (comma separated), `harris_k`, `corner_threshold`,
    /// `hessian_threshold`, `max_tile_area`, `tile` (all stages, `WxH`) and
    /// `tile.<stage>` (one stage). `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut stage_tiles: Vec<(Stage, TileConfig)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(lineno, "expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            let real = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| Error::parse(lineno, format!("bad number {v:?} for {key}")))
            };
            let wrap = |e: Error| Error::parse(lineno, e.to_string());
            match key {
                "base_sigmas" => {
                    cfg.base_sigmas = value.split(',').map(|v| real(v.trim())).collect::<Result<_>>()?;
                }
                "harris_k" => cfg.harris_k = real(value)?,
                "corner_threshold" => cfg.corner_threshold = real(value)?,
                "hessian_threshold" => cfg.hessian_threshold = real(value)?,
                "max_tile_area" => {
                    cfg.max_tile_area = value
                        .parse()
                        .map_err(|_| Error::parse(lineno, format!("bad integer {value:?}")))?;
                }
                "tile" => cfg.tiles = StageTiles::uniform(value.parse().map_err(wrap)?),
                _ => match key.strip_prefix("tile.") {
                    Some(stage) => {
                        let stage: Stage = stage.parse().map_err(wrap)?;
                        stage_tiles.push((stage, value.parse().map_err(wrap)?));
                    }
                    None => return Err(Error::parse(lineno, format!("unknown key {key:?}"))),
                },
            }
        }
        for (stage, t) in stage_tiles {
            cfg.tiles.set(stage, t);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
