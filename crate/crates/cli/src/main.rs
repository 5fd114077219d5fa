use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use hhfreak_core::bench::{
    self, bench_pipeline, dominance_waived, emit_csv, emit_matrix, sweep_workgroups, BenchConfig,
};
use hhfreak_core::detector::{detect, DetectorConfig, Stage};
use hhfreak_core::freak::{describe_all, match_descriptors, MatchPolicy, SamplingPattern};
use hhfreak_core::pipeline::{TileConfig, DEFAULT_MAX_TILE_AREA};
use hhfreak_core::raster::{
    decode_image, encode_pgm, parse_descriptor_file, parse_keypoint_file, write_descriptor_file, write_keypoint_file,
    Raster,
};
use hhfreak_core::synthetic;
use hhfreak_core::telemetry::{self, analyze, parse_trace, write_trace, AnalysisParams, Scenario};

#[derive(Parser)]
#[command(
    name = "hhfreak",
    version,
    about = "Harris-Hessian keypoints, FREAK descriptors and pipeline benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutDir {
    /// Directory that receives every output file.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Detect keypoints; writes keypoints.txt and timings.csv.
    Detect {
        image: PathBuf,
        /// key=value detector configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Compute descriptors; detects keypoints first unless --keypoints is given.
    Describe {
        image: PathBuf,
        #[arg(long)]
        keypoints: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Match two descriptor files; writes matches.csv.
    Match {
        a: PathBuf,
        b: PathBuf,
        /// Cumulative distance limits after each cascade, e.g. 30,60,90,120.
        #[arg(long, default_value_t = MatchPolicy::default())]
        policy: MatchPolicy,
        #[command(flatten)]
        out: OutDir,
    },
    /// Time repeated detector runs per stage; writes stage_timings.csv and stage_sigma.csv.
    Bench {
        image: PathBuf,
        #[arg(long, default_value_t = bench::DEFAULT_RUNS)]
        runs: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Fail when the blur stages do not dominate (unless waived).
        #[arg(long)]
        check_dominance: bool,
        /// Waive the blur-dominance check.
        #[arg(long)]
        waive_dominance: bool,
        #[command(flatten)]
        out: OutDir,
    },
    /// Sweep tile shapes for isolated stages; writes sweep.csv and one matrix file per stage.
    Sweep {
        image: PathBuf,
        /// Stage to sweep; repeatable.
        #[arg(long = "stage", default_values_t = vec!["gaussx".to_string()])]
        stages: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_MAX_TILE_AREA)]
        max_area: usize,
        #[arg(long, default_value_t = 2)]
        min_side: usize,
        /// Largest tile side considered (default: the area limit).
        #[arg(long)]
        max_side: Option<usize>,
        /// Explicit candidates like 8x4; overrides the power-of-two grid.
        #[arg(long = "tile")]
        tiles: Vec<TileConfig>,
        #[arg(long, default_value_t = bench::DEFAULT_RUNS)]
        runs: usize,
        #[arg(long, default_value_t = bench::SWEEP_SIGMA)]
        sigma: f64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Analyse a `t,channel,kind,value` trace; writes events.csv and summary.txt.
    Telemetry {
        trace: PathBuf,
        #[arg(long, default_value_t = telemetry::DEFAULT_STEP_WINDOW)]
        window: f64,
        #[arg(long, default_value_t = telemetry::DEFAULT_FREQUENCY_DELTA)]
        freq_delta: f64,
        #[arg(long, default_value_t = telemetry::DEFAULT_TEMPERATURE_DELTA)]
        temp_delta: f64,
        #[arg(long, default_value_t = telemetry::DEFAULT_STABLE_WINDOW)]
        stable_window: f64,
        #[arg(long, default_value_t = telemetry::DEFAULT_STABLE_EPS)]
        stable_eps: f64,
        #[arg(long, default_value_t = telemetry::DEFAULT_PAIR_TOLERANCE)]
        tolerance: f64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Keypoint counts over a threshold grid; writes calibration.csv.
    Calibrate {
        image: PathBuf,
        #[arg(long, default_value_t = 100)]
        min_keypoints: usize,
        #[arg(long, default_value_t = 5000)]
        max_keypoints: usize,
        #[command(flatten)]
        out: OutDir,
    },
    /// Regenerate the bundled synthetic image and traces.
    GenAssets {
        #[command(flatten)]
        out: OutDir,
    },
    /// Write the built-in sampling pattern as text.
    Pattern {
        #[command(flatten)]
        out: OutDir,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Detect { image, config, out } => cmd_detect(&image, config.as_deref(), &out.out),
        Command::Describe {
            image,
            keypoints,
            config,
            out,
        } => cmd_describe(&image, keypoints.as_deref(), config.as_deref(), &out.out),
        Command::Match { a, b, policy, out } => cmd_match(&a, &b, &policy, &out.out),
        Command::Bench {
            image,
            runs,
            config,
            check_dominance,
            waive_dominance,
            out,
        } => cmd_bench(
            &image,
            runs,
            config.as_deref(),
            check_dominance,
            waive_dominance,
            &out.out,
        ),
        Command::Sweep {
            image,
            stages,
            max_area,
            min_side,
            max_side,
            tiles,
            runs,
            sigma,
            out,
        } => {
            let stages = stages
                .iter()
                .map(|s| s.parse::<Stage>())
                .collect::<hhfreak_core::Result<Vec<_>>>()?;
            let candidates = if tiles.is_empty() {
                TileConfig::power_of_two_grid(min_side, max_side.unwrap_or(max_area), max_area)
            } else {
                tiles
            };
            let cfg = BenchConfig {
                runs,
                stages,
                candidates,
                max_tile_area: max_area,
                sweep_sigma: sigma,
                ..BenchConfig::default()
            };
            cmd_sweep(&image, &cfg, &out.out)
        }
        Command::Telemetry {
            trace,
            window,
            freq_delta,
            temp_delta,
            stable_window,
            stable_eps,
            tolerance,
            out,
        } => {
            let params = AnalysisParams {
                step_window: window,
                frequency_delta: freq_delta,
                temperature_delta: temp_delta,
                stable_window,
                stable_eps,
                pair_tolerance: tolerance,
            };
            cmd_telemetry(&trace, &params, &out.out)
        }
        Command::Calibrate {
            image,
            min_keypoints,
            max_keypoints,
            out,
        } => cmd_calibrate(&image, min_keypoints, max_keypoints, &out.out),
        Command::GenAssets { out } => cmd_gen_assets(&out.out),
        Command::Pattern { out } => {
            let path = create_out(&out.out)?.join("freak_pattern_v1.txt");
            fs::write(&path, SamplingPattern::builtin().to_text())
                .with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn create_out(dir: &Path) -> Result<&Path> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

fn create_file(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok((path, BufWriter::new(file)))
}

fn load_image(path: &Path) -> Result<Raster> {
    let bytes = fs::read(path).with_context(|| format!("reading image {}", path.display()))?;
    decode_image(&bytes).with_context(|| format!("decoding {}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<DetectorConfig> {
    match path {
        None => Ok(DetectorConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            DetectorConfig::parse(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

fn cmd_detect(image: &Path, config: Option<&Path>, out: &Path) -> Result<()> {
    let img = load_image(image)?;
    let cfg = load_config(config)?;
    let det = detect(&img, &cfg)?;
    let out = create_out(out)?;

    let (kp_path, mut w) = create_file(out, "keypoints.txt")?;
    write_keypoint_file(&det.keypoints, &mut w)?;
    w.flush()?;

    let (t_path, mut w) = create_file(out, "timings.csv")?;
    writeln!(w, "stage,sigma,seconds")?;
    for e in det.timings.entries() {
        let sigma = e.sigma.map_or(String::new(), |s| s.to_string());
        writeln!(w, "{},{},{}", e.stage, sigma, e.total.as_secs_f64())?;
    }
    w.flush()?;

    println!(
        "{} keypoints, characteristic sigma {}, {} sigmas evaluated",
        det.keypoints.len(),
        det.characteristic_sigma,
        det.counts.len()
    );
    println!("wrote {} and {}", kp_path.display(), t_path.display());
    Ok(())
}

fn cmd_describe(image: &Path, keypoints: Option<&Path>, config: Option<&Path>, out: &Path) -> Result<()> {
    let img = load_image(image)?;
    let out = create_out(out)?;
    let kps = match keypoints {
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            parse_keypoint_file(BufReader::new(f)).with_context(|| format!("parsing {}", p.display()))?
        }
        None => {
            let det = detect(&img, &load_config(config)?)?;
            let (path, mut w) = create_file(out, "keypoints.txt")?;
            write_keypoint_file(&det.keypoints, &mut w)?;
            w.flush()?;
            info!("wrote {}", path.display());
            det.keypoints
        }
    };
    let records = describe_all(&img, &kps, SamplingPattern::builtin())?;
    let (path, mut w) = create_file(out, "descriptors.txt")?;
    write_descriptor_file(&records, &mut w)?;
    w.flush()?;
    println!("{} descriptors written to {}", records.len(), path.display());
    Ok(())
}

fn read_descriptors(path: &Path) -> Result<Vec<hhfreak_core::raster::DescriptorRecord>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_descriptor_file(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_match(a: &Path, b: &Path, policy: &MatchPolicy, out: &Path) -> Result<()> {
    let (qa, tb) = (read_descriptors(a)?, read_descriptors(b)?);
    let matches = match_descriptors(&qa, &tb, policy);
    let (path, mut w) = create_file(create_out(out)?, "matches.csv")?;
    writeln!(w, "query,train,distance,query_x,query_y,train_x,train_y")?;
    for m in &matches {
        let (q, t) = (&qa[m.query].keypoint, &tb[m.train].keypoint);
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            m.query, m.train, m.distance, q.x, q.y, t.x, t.y
        )?;
    }
    w.flush()?;
    println!(
        "{} of {} descriptors matched (policy {policy}); wrote {}",
        matches.len(),
        qa.len(),
        path.display()
    );
    Ok(())
}

fn cmd_bench(
    image: &Path,
    runs: usize,
    config: Option<&Path>,
    check_dominance: bool,
    waive: bool,
    out: &Path,
) -> Result<()> {
    let img = load_image(image)?;
    let cfg = BenchConfig {
        runs,
        detector: load_config(config)?,
        ..BenchConfig::default()
    };
    let report = bench_pipeline(&img, &cfg)?;
    let out = create_out(out)?;
    let (p1, mut w) = create_file(out, "stage_timings.csv")?;
    report.write_stage_csv(&mut w)?;
    w.flush()?;
    let (p2, mut w) = create_file(out, "stage_sigma.csv")?;
    report.write_matrix_csv(&mut w)?;
    w.flush()?;

    println!("{runs} runs, {} keypoints", report.keypoints.len());
    for (name, st) in &report.stages {
        println!("  {name:<8} {:>10.3} ms ± {:.3}", st.mean * 1e3, st.std * 1e3);
    }
    println!(
        "  {:<8} {:>10.3} ms ± {:.3}",
        "total",
        report.total.mean * 1e3,
        report.total.std * 1e3
    );

    let dom = report.dominance();
    let verdict = format!(
        "gaussx+gaussy {:.3} ms vs slowest other stage {} {:.3} ms; blur share {:.1}%",
        dom.gauss_xy * 1e3,
        dom.strongest_other.0,
        dom.strongest_other.1 * 1e3,
        dom.blur_share * 100.0
    );
    if dom.passed() {
        println!("blur dominance holds: {verdict}");
    } else if waive || dominance_waived() {
        warn!("blur dominance does not hold (waived): {verdict}");
    } else if check_dominance {
        bail!("blur dominance does not hold: {verdict}");
    } else {
        warn!("blur dominance does not hold: {verdict}");
    }
    println!("wrote {} and {}", p1.display(), p2.display());
    Ok(())
}

fn cmd_sweep(image: &Path, cfg: &BenchConfig, out: &Path) -> Result<()> {
    let img = load_image(image)?;
    let report = sweep_workgroups(&img, cfg)?;
    let out = create_out(out)?;
    let (path, mut w) = create_file(out, "sweep.csv")?;
    emit_csv(&report, &mut w)?;
    w.flush()?;
    println!("wrote {} ({} rows)", path.display(), report.rows.len());
    for stage in report.stages() {
        let (mp, mut w) = create_file(out, &format!("sweep_{stage}.matrix"))?;
        emit_matrix(&report, stage, &mut w)?;
        w.flush()?;
        let (best, worst) = (report.best(Some(stage)), report.worst(Some(stage)));
        if let (Some(b), Some(wr)) = (best, worst) {
            println!(
                "{stage}: best {} {:.3} ms, worst {} {:.3} ms ({:.1}x); matrix {}",
                b.tiles,
                b.stats.mean * 1e3,
                wr.tiles,
                wr.stats.mean * 1e3,
                wr.stats.mean / b.stats.mean,
                mp.display()
            );
        }
    }
    for (stage, t) in &report.skipped {
        println!("{stage}: skipped {t} (area {} > {})", t.area(), cfg.max_tile_area);
    }
    Ok(())
}

fn cmd_telemetry(trace: &Path, params: &AnalysisParams, out: &Path) -> Result<()> {
    let f = File::open(trace).with_context(|| format!("opening {}", trace.display()))?;
    let traces = parse_trace(BufReader::new(f)).with_context(|| format!("parsing {}", trace.display()))?;
    let analysis = analyze(&traces, params)?;
    let out = create_out(out)?;
    let (events, mut w) = create_file(out, "events.csv")?;
    analysis.write_events_csv(&mut w)?;
    w.flush()?;
    let summary = analysis.summary();
    fs::write(out.join("summary.txt"), &summary)?;
    print!("{summary}");
    println!("wrote {}", events.display());
    Ok(())
}

const CORNER_GRID: [f64; 5] = [1e-8, 1e-7, 1e-6, 1e-5, 1e-4];
const HESSIAN_GRID: [f64; 4] = [1e-4, 1e-3, 1e-2, 3e-2];

fn cmd_calibrate(image: &Path, min_kp: usize, max_kp: usize, out: &Path) -> Result<()> {
    if min_kp > max_kp {
        bail!("--min-keypoints exceeds --max-keypoints");
    }
    let img = load_image(image)?;
    let (path, mut w) = create_file(create_out(out)?, "calibration.csv")?;
    writeln!(w, "corner_threshold,hessian_threshold,keypoints,characteristic_sigma")?;
    let target = ((min_kp.max(1) * max_kp) as f64).sqrt();
    let mut best: Option<(f64, f64, usize)> = None;
    for ct in CORNER_GRID {
        for ht in HESSIAN_GRID {
            let cfg = DetectorConfig {
                corner_threshold: ct,
                hessian_threshold: ht,
                ..DetectorConfig::default()
            };
            let det = detect(&img, &cfg)?;
            let n = det.keypoints.len();
            writeln!(w, "{ct:e},{ht:e},{n},{}", det.characteristic_sigma)?;
            println!("corner {ct:e} hessian {ht:e}: {n} keypoints");
            let in_range = (min_kp..=max_kp).contains(&n);
            let score = |n: usize| ((n.max(1) as f64).ln() - target.ln()).abs();
            if in_range && best.is_none_or(|b| score(n) < score(b.2)) {
                best = Some((ct, ht, n));
            }
        }
    }
    w.flush()?;
    match best {
        Some((ct, ht, n)) => println!("suggested corner_threshold={ct:e} hessian_threshold={ht:e} ({n} keypoints)"),
        None => warn!("no grid point yields {min_kp}..={max_kp} keypoints"),
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_gen_assets(out: &Path) -> Result<()> {
    let out = create_out(out)?;
    let (img_path, mut w) = create_file(out, "test_image.pgm")?;
    encode_pgm(&synthetic::test_image(), &mut w)?;
    w.flush()?;
    println!("wrote {}", img_path.display());
    for (name, scenario) in [
        ("trace_throttle.csv", Scenario::Throttle),
        ("trace_steady.csv", Scenario::Steady),
    ] {
        let (path, mut w) = create_file(out, name)?;
        write_trace(&telemetry::synthetic_traces(scenario, telemetry::TRACE_SEED), &mut w)?;
        w.flush()?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
