//! Repeated-run timing of the detector and isolated tile-size sweeps.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::time::Instant;

use crate::detector::kernels::{
    blur_each, corner_mask, determinant_from_gradients, harris_from_tensor, product, square,
};
use crate::detector::{detect, DetectorConfig, Stage, GATHER_STAGE};
use crate::error::{Error, Result};
use crate::pipeline::{
    derivative_x, derivative_y, gauss_x, gauss_y, make_gaussian_kernel, GaussianKernel, TileConfig,
    DEFAULT_MAX_TILE_AREA,
};
use crate::raster::{to_gray, Keypoint, Raster};

pub const DEFAULT_RUNS: usize = 10;
/// Sigma whose blur feeds isolated stage sweeps (121 taps).
pub const SWEEP_SIGMA: f64 = 20.0;
pub const SWEEP_CSV_HEADER: &str = "stage,tile_w,tile_h,mean_s,std_s,min_s,max_s";
/// Setting this environment variable to a non-empty value waives the
/// Gaussian-dominance soft check.
pub const DOMINANCE_WAIVER_ENV: &str = "HHFREAK_WAIVE_DOMINANCE";

/// Summary statistics of raw elapsed-time samples (seconds).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single sample.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::contract("statistics need at least one sample"));
        }
        let n = samples.len();
        let mut sum = 0.0;
        for &s in samples {
            sum += s;
        }
        let mean = sum / n as f64;
        let std = if n == 1 {
            0.0
        } else {
            let mut sq = 0.0;
            for &s in samples {
                sq += (s - mean) * (s - mean);
            }
            (sq / (n - 1) as f64).sqrt()
        };
        let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { n, mean, std, min, max })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub runs: usize,
    pub stages: Vec<Stage>,
    pub candidates: Vec<TileConfig>,
    pub max_tile_area: usize,
    pub sweep_sigma: f64,
    pub detector: DetectorConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            runs: DEFAULT_RUNS,
            stages: vec![Stage::GaussX, Stage::GaussY],
            candidates: TileConfig::power_of_two_grid(2, DEFAULT_MAX_TILE_AREA, DEFAULT_MAX_TILE_AREA),
            max_tile_area: DEFAULT_MAX_TILE_AREA,
            sweep_sigma: SWEEP_SIGMA,
            detector: DetectorConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.candidates.is_empty() {
            return Err(Error::Config("no tile candidates".into()));
        }
        if self.sweep_sigma.is_nan() || self.sweep_sigma <= 0.0 {
            return Err(Error::Config("sweep sigma must be positive".into()));
        }
        self.detector.validate()
    }
}

/// Per-stage timings of repeated [`detect`] runs.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub runs: usize,
    /// Per stage (twelve stages then gather): time summed over sigmas, per run.
    pub stages: Vec<(String, Stats)>,
    /// Per (stage, sigma) cell, in evaluation order.
    pub matrix: Vec<(String, f64, Stats)>,
    /// Wall time of whole `detect` calls, measured independently of stages.
    pub total: Stats,
    pub keypoints: Vec<Keypoint>,
}

impl TimingReport {
    pub fn stage(&self, name: &str) -> Option<&Stats> {
        self.stages.iter().find(|(s, _)| s == name).map(|(_, st)| st)
    }

    /// Sigmas that appear in the stage×sigma matrix, in evaluation order.
    pub fn sigmas(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for (_, s, _) in &self.matrix {
            if !out.contains(s) {
                out.push(*s);
            }
        }
        out
    }

    pub fn dominance(&self) -> DominanceCheck {
        let mean = |s: Stage| self.stage(s.name()).map_or(0.0, |st| st.mean);
        let gauss_xy = mean(Stage::GaussX) + mean(Stage::GaussY);
        let strongest_other = Stage::ALL
            .into_iter()
            .filter(|s| !s.is_gaussian())
            .map(|s| (s, mean(s)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-gaussian stages exist");
        let blur: f64 = Stage::ALL.into_iter().filter(|s| s.is_gaussian()).map(mean).sum();
        let all: f64 = Stage::ALL.into_iter().map(mean).sum();
        DominanceCheck {
            gauss_xy,
            strongest_other,
            blur_share: if all > 0.0 { blur / all } else { 0.0 },
        }
    }

    /// `stage,mean_s,std_s,min_s,max_s`, stages in pipeline order, then `total`.
    pub fn write_stage_csv(&self, mut sink: impl Write) -> Result<()> {
        writeln!(sink, "stage,mean_s,std_s,min_s,max_s")?;
        for (name, st) in self
            .stages
            .iter()
            .map(|(n, s)| (n.as_str(), s))
            .chain([("total", &self.total)])
        {
            writeln!(sink, "{name},{},{},{},{}", st.mean, st.std, st.min, st.max)?;
        }
        Ok(())
    }

    /// `stage,sigma,mean_s` for every evaluated (stage, sigma).
    pub fn write_matrix_csv(&self, mut sink: impl Write) -> Result<()> {
        writeln!(sink, "stage,sigma,mean_s")?;
        for (name, sigma, st) in &self.matrix {
            writeln!(sink, "{name},{sigma},{}", st.mean)?;
        }
        Ok(())
    }
}

/// Blur-dominance figures from a [`TimingReport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominanceCheck {
    pub gauss_xy: f64,
    pub strongest_other: (Stage, f64),
    /// Share of the four blur stages in the summed stage time.
    pub blur_share: f64,
}

impl DominanceCheck {
    pub fn passed(&self) -> bool {
        self.gauss_xy >= self.strongest_other.1 && self.blur_share > 0.5
    }
}

pub fn dominance_waived() -> bool {
    std::env::var_os(DOMINANCE_WAIVER_ENV).is_some_and(|v| !v.is_empty())
}

/// One untimed warm-up, then `cfg.runs` timed [`detect`] calls. Fails if any
/// run's keypoints differ from the warm-up's.
pub fn bench_pipeline(img: &Raster, cfg: &BenchConfig) -> Result<TimingReport> {
    cfg.validate()?;
    let reference = detect(img, &cfg.detector)?.keypoints;

    let mut totals = Vec::with_capacity(cfg.runs);
    let mut per_stage: BTreeMap<usize, (String, Vec<f64>)> = BTreeMap::new();
    let mut per_cell: BTreeMap<usize, (String, f64, Vec<f64>)> = BTreeMap::new();
    let stage_order = |name: &str| {
        Stage::ALL
            .iter()
            .position(|s| s.name() == name)
            .unwrap_or(Stage::ALL.len())
    };
    for run in 0..cfg.runs {
        let start = Instant::now();
        let det = detect(img, &cfg.detector)?;
        totals.push(start.elapsed().as_secs_f64());
        if det.keypoints != reference {
            return Err(Error::Determinism(format!("run {run} produced different keypoints")));
        }
        let mut stage_sums: BTreeMap<usize, (String, f64)> = BTreeMap::new();
        for (i, e) in det.timings.entries().iter().enumerate() {
            let secs = e.total.as_secs_f64();
            let slot = stage_sums
                .entry(stage_order(&e.stage))
                .or_insert((e.stage.clone(), 0.0));
            slot.1 += secs;
            if let Some(sigma) = e.sigma {
                per_cell
                    .entry(i)
                    .or_insert((e.stage.clone(), sigma, Vec::new()))
                    .2
                    .push(secs);
            }
        }
        for (k, (name, secs)) in stage_sums {
            per_stage.entry(k).or_insert((name, Vec::new())).1.push(secs);
        }
    }

    let stages = per_stage
        .into_values()
        .map(|(name, samples)| Ok((name, Stats::from_samples(&samples)?)))
        .collect::<Result<Vec<_>>>()?;
    let matrix = per_cell
        .into_values()
        .map(|(name, sigma, samples)| Ok((name, sigma, Stats::from_samples(&samples)?)))
        .collect::<Result<Vec<_>>>()?;
    debug_assert!(stages.iter().any(|(n, _)| n == GATHER_STAGE));
    Ok(TimingReport {
        runs: cfg.runs,
        stages,
        matrix,
        total: Stats::from_samples(&totals)?,
        keypoints: reference,
    })
}

/// Intermediate rasters of one sigma, used as fixed inputs for isolated stages.
struct StageInputs {
    kernel: GaussianKernel,
    gray: Raster,
    blurred_x: Raster,
    smooth: Raster,
    lx: Raster,
    ly: Raster,
    products: [Raster; 3],
    products_x: [Raster; 3],
    tensor: [Raster; 3],
    response: Raster,
    sigma: f64,
    k: f64,
    corner_threshold: f64,
}

impl StageInputs {
    fn prepare(img: &Raster, sigma: f64, cfg: &DetectorConfig) -> Result<Self> {
        let t = TileConfig::default();
        let kernel = make_gaussian_kernel(sigma)?;
        let gray = to_gray(img)?;
        let blurred_x = gauss_x(&gray, &kernel, t)?;
        let smooth = gauss_y(&blurred_x, &kernel, t)?;
        let lx = derivative_x(&smooth, t)?;
        let ly = derivative_y(&smooth, t)?;
        let products = [square(&lx, t)?, square(&ly, t)?, product(&lx, &ly, t)?];
        let [p0, p1, p2] = &products;
        let products_x = blur_each([p0, p1, p2], |r| gauss_x(r, &kernel, t))?;
        let [q0, q1, q2] = &products_x;
        let tensor = blur_each([q0, q1, q2], |r| gauss_y(r, &kernel, t))?;
        let response = harris_from_tensor(&tensor[0], &tensor[1], &tensor[2], cfg.harris_k, t)?;
        Ok(Self {
            kernel,
            gray,
            blurred_x,
            smooth,
            lx,
            ly,
            products,
            products_x,
            tensor,
            response,
            sigma,
            k: cfg.harris_k,
            corner_threshold: cfg.corner_threshold,
        })
    }

    /// Run one stage alone with the given tiling.
    fn run(&self, stage: Stage, t: TileConfig) -> Result<Vec<Raster>> {
        let k = &self.kernel;
        Ok(match stage {
            Stage::GaussX => vec![gauss_x(&self.gray, k, t)?],
            Stage::GaussY => vec![gauss_y(&self.blurred_x, k, t)?],
            Stage::Ddx => vec![derivative_x(&self.smooth, t)?],
            Stage::Ddy => vec![derivative_y(&self.smooth, t)?],
            Stage::MulXX => vec![square(&self.lx, t)?],
            Stage::MulYY => vec![square(&self.ly, t)?],
            Stage::MulXY => vec![product(&self.lx, &self.ly, t)?],
            Stage::GaussX2 => blur_each(self.products.each_ref(), |r| gauss_x(r, k, t))?.into(),
            Stage::GaussY2 => blur_each(self.products_x.each_ref(), |r| gauss_y(r, k, t))?.into(),
            Stage::Harris => {
                let [a, b, c] = &self.tensor;
                vec![harris_from_tensor(a, b, c, self.k, t)?]
            }
            Stage::Count => {
                let (mask, _) = corner_mask(&self.response, self.corner_threshold, t)?;
                let data = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
                vec![Raster::new(self.response.width(), self.response.height(), 1, data)?]
            }
            Stage::Hessian => vec![determinant_from_gradients(&self.lx, &self.ly, self.sigma, t)?],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub stage: String,
    pub tiles: TileConfig,
    pub stats: Stats,
    /// Raw elapsed seconds per timed run; empty for rows read back from CSV.
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepReport {
    /// Sorted by stage name, then tile width, then tile height.
    pub rows: Vec<SweepRow>,
    /// Candidates above the area limit, per stage.
    pub skipped: Vec<(String, TileConfig)>,
}

impl SweepReport {
    fn extreme(&self, stage: Option<&str>, better: impl Fn(f64, f64) -> bool) -> Option<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| stage.is_none_or(|s| r.stage == s))
            .fold(None, |best: Option<&SweepRow>, r| match best {
                Some(b) if !better(r.stats.mean, b.stats.mean) => Some(b),
                _ => Some(r),
            })
    }

    /// Row with the lowest mean (first in row order on ties).
    pub fn best(&self, stage: Option<&str>) -> Option<&SweepRow> {
        self.extreme(stage, |a, b| a < b)
    }

    /// Row with the highest mean (first in row order on ties).
    pub fn worst(&self, stage: Option<&str>) -> Option<&SweepRow> {
        self.extreme(stage, |a, b| a > b)
    }

    pub fn stages(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.rows.iter().map(|r| r.stage.as_str()).collect();
        out.dedup();
        out
    }
}

/// Time each stage in isolation for every candidate tiling.
///
/// Inputs are the intermediates of the `cfg.sweep_sigma` pipeline. Before any
/// timing, every candidate's output is compared bit-for-bit with the first
/// candidate's; a mismatch is a [`Error::Determinism`].
pub fn sweep_workgroups(img: &Raster, cfg: &BenchConfig) -> Result<SweepReport> {
    cfg.validate()?;
    if cfg.stages.is_empty() {
        return Err(Error::Config("no stages to sweep".into()));
    }
    let inputs = StageInputs::prepare(img, cfg.sweep_sigma, &cfg.detector)?;
    let mut report = SweepReport::default();
    let mut candidates = cfg.candidates.clone();
    candidates.sort();
    candidates.dedup();

    for &stage in &cfg.stages {
        let (valid, too_big): (Vec<TileConfig>, Vec<TileConfig>) =
            candidates.iter().partition(|t| t.fits(cfg.max_tile_area));
        for t in too_big {
            log::warn!(
                "skipping {stage} tile {t}: area {} exceeds {}",
                t.area(),
                cfg.max_tile_area
            );
            report.skipped.push((stage.name().to_string(), t));
        }

        let mut reference: Option<Vec<Raster>> = None;
        for &t in &valid {
            let out = inputs.run(stage, t)?;
            match &reference {
                None => reference = Some(out),
                Some(r) => {
                    if !r.iter().zip(&out).all(|(a, b)| a.bit_identical(b)) {
                        return Err(Error::Determinism(format!("{stage} output differs with tile {t}")));
                    }
                }
            }
        }

        for &t in &valid {
            inputs.run(stage, t)?;
            let mut samples = Vec::with_capacity(cfg.runs);
            for _ in 0..cfg.runs {
                let start = Instant::now();
                let out = inputs.run(stage, t)?;
                samples.push(start.elapsed().as_secs_f64());
                drop(out);
            }
            report.rows.push(SweepRow {
                stage: stage.name().to_string(),
                tiles: t,
                stats: Stats::from_samples(&samples)?,
                samples,
            });
        }
    }
    sort_rows(&mut report.rows);
    Ok(report)
}

fn sort_rows(rows: &mut [SweepRow]) {
    rows.sort_by(|a, b| {
        a.stage
            .cmp(&b.stage)
            .then(a.tiles.tile_w().cmp(&b.tiles.tile_w()))
            .then(a.tiles.tile_h().cmp(&b.tiles.tile_h()))
    });
}

/// Write the sweep CSV; returns the number of bytes written.
pub fn emit_csv(report: &SweepReport, mut sink: impl Write) -> Result<usize> {
    let mut text = String::new();
    text.push_str(SWEEP_CSV_HEADER);
    text.push('\n');
    let mut rows = report.rows.clone();
    sort_rows(&mut rows);
    for r in &rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.stage,
            r.tiles.tile_w(),
            r.tiles.tile_h(),
            r.stats.mean,
            r.stats.std,
            r.stats.min,
            r.stats.max
        ));
    }
    sink.write_all(text.as_bytes())?;
    Ok(text.len())
}

/// Parse a sweep CSV written by [`emit_csv`]. Sample counts are not stored,
/// so `stats.n` is 0.
pub fn parse_sweep_csv(reader: impl BufRead) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let ln = i + 1;
        if i == 0 {
            if line.trim() != SWEEP_CSV_HEADER {
                return Err(Error::parse(ln, format!("expected header `{SWEEP_CSV_HEADER}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(Error::parse(ln, format!("expected 7 fields, got {}", f.len())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|e| Error::parse(ln, e.to_string()));
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::parse(ln, e.to_string()));
        let tiles = TileConfig::new(int(f[1])?, int(f[2])?).map_err(|e| Error::parse(ln, e.to_string()))?;
        rows.push(SweepRow {
            stage: f[0].to_string(),
            tiles,
            stats: Stats {
                n: 0,
                mean: num(f[3])?,
                std: num(f[4])?,
                min: num(f[5])?,
                max: num(f[6])?,
            },
            samples: Vec::new(),
        });
    }
    Ok(rows)
}

/// Gnuplot `nonuniform matrix` of mean seconds for one stage: first row is the
/// column count followed by tile widths, each further row a tile height
/// followed by its means. Missing cells are `NaN`.
pub fn emit_matrix(report: &SweepReport, stage: &str, mut sink: impl Write) -> Result<usize> {
    let rows: Vec<&SweepRow> = report.rows.iter().filter(|r| r.stage == stage).collect();
    let mut widths: Vec<usize> = rows.iter().map(|r| r.tiles.tile_w()).collect();
    let mut heights: Vec<usize> = rows.iter().map(|r| r.tiles.tile_h()).collect();
    widths.sort_unstable();
    widths.dedup();
    heights.sort_unstable();
    heights.dedup();

    let mut text = String::new();
    text.push_str(&widths.len().to_string());
    for w in &widths {
        text.push_str(&format!(" {w}"));
    }
    text.push('\n');
    for h in &heights {
        text.push_str(&h.to_string());
        for w in &widths {
            match rows.iter().find(|r| r.tiles.tile_w() == *w && r.tiles.tile_h() == *h) {
                Some(r) => text.push_str(&format!(" {}", r.stats.mean)),
                None => text.push_str(" NaN"),
            }
        }
        text.push('\n');
    }
    sink.write_all(text.as_bytes())?;
    Ok(text.len())
}
