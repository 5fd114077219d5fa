//! Thermal and clock-frequency trace analysis: stabilization, step detection
//! and temperature/frequency event correlation.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const TRACE_HEADER: [&str; 4] = ["t", "channel", "kind", "value"];
pub const EVENTS_HEADER: &str = "event_type,channel,t,delta";

pub const DEFAULT_STEP_WINDOW: f64 = 30.0;
pub const DEFAULT_FREQUENCY_DELTA: f64 = 50.0;
pub const DEFAULT_TEMPERATURE_DELTA: f64 = 0.5;
pub const DEFAULT_STABLE_WINDOW: f64 = 120.0;
pub const DEFAULT_STABLE_EPS: f64 = 0.2;
pub const DEFAULT_PAIR_TOLERANCE: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SensorKind {
    Temperature,
    Frequency,
}

impl SensorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SensorKind::Temperature => "temperature",
            SensorKind::Frequency => "frequency",
        }
    }

    fn check(self, value: f64) -> std::result::Result<(), String> {
        let ok = match self {
            SensorKind::Temperature => value > -40.0 && value < 150.0,
            SensorKind::Frequency => value >= 0.0,
        };
        if ok && value.is_finite() {
            Ok(())
        } else {
            Err(format!("{} value {value} out of range", self.as_str()))
        }
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SensorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "temperature" => Ok(SensorKind::Temperature),
            "frequency" => Ok(SensorKind::Frequency),
            other => Err(format!("unknown sensor kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub value: f64,
}

/// One channel's samples, strictly increasing in time.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorTrace {
    pub channel: String,
    pub kind: SensorKind,
    samples: Vec<Sample>,
}

impl SensorTrace {
    /// Sorts by time and rejects repeated timestamps or out-of-range values.
    pub fn new(channel: impl Into<String>, kind: SensorKind, mut samples: Vec<Sample>) -> Result<Self> {
        let channel = channel.into();
        samples.sort_by(|a, b| a.t.total_cmp(&b.t));
        if let Some(w) = samples.windows(2).find(|w| w[0].t >= w[1].t) {
            return Err(Error::contract(format!(
                "channel {channel}: time {} is not strictly increasing",
                w[1].t
            )));
        }
        for s in &samples {
            kind.check(s.value)
                .map_err(|m| Error::contract(format!("channel {channel}: {m}")))?;
        }
        Ok(Self { channel, kind, samples })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn shifted(&self, dt: f64) -> Self {
        Self {
            channel: self.channel.clone(),
            kind: self.kind,
            samples: self
                .samples
                .iter()
                .map(|s| Sample {
                    t: s.t + dt,
                    value: s.value,
                })
                .collect(),
        }
    }
}

/// Parse a `t,channel,kind,value` CSV into per-channel traces, ordered by channel name.
pub fn parse_trace(reader: impl Read) -> Result<Vec<SensorTrace>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::parse(1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != TRACE_HEADER {
        return Err(Error::parse(1, format!("expected header `{}`", TRACE_HEADER.join(","))));
    }

    // channel -> (kind, [(line, sample)])
    let mut channels: BTreeMap<String, (SensorKind, Vec<(usize, Sample)>)> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| record.get(i).unwrap_or("");
        let t: f64 = field(0)
            .parse()
            .map_err(|_| Error::parse(line, format!("bad time {:?}", field(0))))?;
        if !t.is_finite() {
            return Err(Error::parse(line, "time must be finite"));
        }
        let channel = field(1);
        if channel.is_empty() {
            return Err(Error::parse(line, "empty channel name"));
        }
        let kind: SensorKind = field(2).parse().map_err(|m| Error::parse(line, m))?;
        let value: f64 = field(3)
            .parse()
            .map_err(|_| Error::parse(line, format!("bad value {:?}", field(3))))?;
        kind.check(value).map_err(|m| Error::parse(line, m))?;

        let entry = channels
            .entry(channel.to_string())
            .or_insert_with(|| (kind, Vec::new()));
        if entry.0 != kind {
            return Err(Error::parse(line, format!("channel {channel} changes kind to {kind}")));
        }
        entry.1.push((line, Sample { t, value }));
    }

    channels
        .into_iter()
        .map(|(channel, (kind, mut rows))| {
            rows.sort_by(|a, b| a.1.t.total_cmp(&b.1.t));
            if let Some(w) = rows.windows(2).find(|w| w[0].1.t == w[1].1.t) {
                let line = w[0].0.max(w[1].0);
                return Err(Error::parse(
                    line,
                    format!("duplicate time {} in channel {channel}", w[1].1.t),
                ));
            }
            SensorTrace::new(channel, kind, rows.into_iter().map(|r| r.1).collect())
        })
        .collect()
}

/// Write traces back out as CSV, row order by time then channel.
pub fn write_trace(traces: &[SensorTrace], writer: impl Write) -> Result<()> {
    let mut rows: Vec<(f64, &SensorTrace, f64)> = traces
        .iter()
        .flat_map(|tr| tr.samples.iter().map(move |s| (s.t, tr, s.value)))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.channel.cmp(&b.1.channel)));
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRACE_HEADER).map_err(csv_io)?;
    for (t, tr, v) in rows {
        w.write_record([t.to_string(), tr.channel.clone(), tr.kind.to_string(), v.to_string()])
            .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stabilization {
    pub t_stable: f64,
    pub mean: f64,
}

/// Earliest sample time `t` whose window `[t, t+w]` is complete (ends no later
/// than the last sample) and whose samples all lie within `±eps` of the window mean.
pub fn stabilization_window(trace: &SensorTrace, eps: f64, w: f64) -> Option<Stabilization> {
    let s = &trace.samples;
    let last = s.last()?.t;
    let mut end = 0;
    for start in 0..s.len() {
        let t = s[start].t;
        if t + w > last {
            break;
        }
        end = end.max(start);
        while end + 1 < s.len() && s[end + 1].t <= t + w {
            end += 1;
        }
        let window = &s[start..=end];
        let mean = window.iter().map(|p| p.value).sum::<f64>() / window.len() as f64;
        if window.iter().all(|p| (p.value - mean).abs() <= eps) {
            return Some(Stabilization { t_stable: t, mean });
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepEvent {
    pub channel: String,
    pub t: f64,
    pub delta: f64,
}

/// Windowed-mean step detector.
///
/// The score at sample time `t` is `mean(t, t+w] − mean[t−w, t)`, evaluated
/// only where both windows fit inside the trace. Times with `|score| ≥ min_delta`
/// form clusters whenever consecutive detections are at most `w` apart; each
/// cluster yields one event at its earliest time, carrying the score of
/// largest magnitude in the cluster.
pub fn detect_steps(trace: &SensorTrace, min_delta: f64, w: f64) -> Vec<StepEvent> {
    let s = &trace.samples;
    let (Some(first), Some(last)) = (s.first(), s.last()) else {
        return Vec::new();
    };
    let mut prefix = Vec::with_capacity(s.len() + 1);
    prefix.push(0.0f64);
    for p in s {
        prefix.push(prefix.last().unwrap() + p.value);
    }
    let mean = |lo: usize, hi: usize| (prefix[hi] - prefix[lo]) / (hi - lo) as f64;
    // First index with time >= x (or > x when `strict`).
    let lower = |x: f64, strict: bool| s.partition_point(|p| if strict { p.t <= x } else { p.t < x });

    let mut events: Vec<StepEvent> = Vec::new();
    let mut last_hit: Option<f64> = None;
    for (i, p) in s.iter().enumerate() {
        let t = p.t;
        if t - w < first.t || t + w > last.t {
            continue;
        }
        let before = lower(t - w, false)..i;
        let after = i + 1..lower(t + w, true);
        if before.is_empty() || after.is_empty() {
            continue;
        }
        let score = mean(after.start, after.end) - mean(before.start, before.end);
        if score.abs() < min_delta {
            continue;
        }
        match (last_hit, events.last_mut()) {
            (Some(prev), Some(ev)) if t - prev <= w => {
                if score.abs() > ev.delta.abs() {
                    ev.delta = score;
                }
            }
            _ => events.push(StepEvent {
                channel: trace.channel.clone(),
                t,
                delta: score,
            }),
        }
        last_hit = Some(t);
    }
    events
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventPair {
    pub temperature: StepEvent,
    pub frequency: StepEvent,
}

impl EventPair {
    pub fn dt(&self) -> f64 {
        self.temperature.t - self.frequency.t
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Correlation {
    pub pairs: Vec<EventPair>,
    pub unpaired_temperature: Vec<StepEvent>,
    pub unpaired_frequency: Vec<StepEvent>,
}

/// Greedy nearest-in-time pairing of temperature and frequency events within
/// `tol` seconds. Closest candidates are paired first; ties go to the lower
/// temperature index, then the lower frequency index.
pub fn correlate(temp_events: &[StepEvent], freq_events: &[StepEvent], tol: f64) -> Correlation {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, te) in temp_events.iter().enumerate() {
        for (j, fe) in freq_events.iter().enumerate() {
            let dt = (te.t - fe.t).abs();
            if dt <= tol {
                candidates.push((dt, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut temp_used = vec![false; temp_events.len()];
    let mut freq_used = vec![false; freq_events.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if temp_used[i] || freq_used[j] {
            continue;
        }
        temp_used[i] = true;
        freq_used[j] = true;
        pairs.push(EventPair {
            temperature: temp_events[i].clone(),
            frequency: freq_events[j].clone(),
        });
    }
    pairs.sort_by(|a, b| a.temperature.t.total_cmp(&b.temperature.t));
    let unpaired = |events: &[StepEvent], used: &[bool]| {
        events
            .iter()
            .zip(used)
            .filter(|(_, &u)| !u)
            .map(|(e, _)| e.clone())
            .collect()
    };
    Correlation {
        unpaired_temperature: unpaired(temp_events, &temp_used),
        unpaired_frequency: unpaired(freq_events, &freq_used),
        pairs,
    }
}

/// Parameters for [`analyze`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisParams {
    pub step_window: f64,
    pub frequency_delta: f64,
    pub temperature_delta: f64,
    pub stable_window: f64,
    pub stable_eps: f64,
    pub pair_tolerance: f64,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            step_window: DEFAULT_STEP_WINDOW,
            frequency_delta: DEFAULT_FREQUENCY_DELTA,
            temperature_delta: DEFAULT_TEMPERATURE_DELTA,
            stable_window: DEFAULT_STABLE_WINDOW,
            stable_eps: DEFAULT_STABLE_EPS,
            pair_tolerance: DEFAULT_PAIR_TOLERANCE,
        }
    }
}

impl AnalysisParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step window", self.step_window),
            ("frequency delta", self.frequency_delta),
            ("temperature delta", self.temperature_delta),
            ("stable window", self.stable_window),
            ("stable eps", self.stable_eps),
            ("pair tolerance", self.pair_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    /// Per temperature channel; `None` when the channel never settles.
    pub stabilization: Vec<(String, Option<Stabilization>)>,
    pub temperature_steps: Vec<StepEvent>,
    pub frequency_steps: Vec<StepEvent>,
    pub correlation: Correlation,
}

/// Stabilization of every temperature channel, steps on every channel, and
/// pairing of temperature steps with frequency steps.
pub fn analyze(traces: &[SensorTrace], params: &AnalysisParams) -> Result<Analysis> {
    params.validate()?;
    let mut stabilization = Vec::new();
    let mut temperature_steps = Vec::new();
    let mut frequency_steps = Vec::new();
    for tr in traces {
        match tr.kind {
            SensorKind::Temperature => {
                stabilization.push((
                    tr.channel.clone(),
                    stabilization_window(tr, params.stable_eps, params.stable_window),
                ));
                temperature_steps.extend(detect_steps(tr, params.temperature_delta, params.step_window));
            }
            SensorKind::Frequency => {
                frequency_steps.extend(detect_steps(tr, params.frequency_delta, params.step_window));
            }
        }
    }
    let by_time = |a: &StepEvent, b: &StepEvent| a.t.total_cmp(&b.t).then_with(|| a.channel.cmp(&b.channel));
    temperature_steps.sort_by(by_time);
    frequency_steps.sort_by(by_time);
    let correlation = correlate(&temperature_steps, &frequency_steps, params.pair_tolerance);
    Ok(Analysis {
        stabilization,
        temperature_steps,
        frequency_steps,
        correlation,
    })
}

impl Analysis {
    /// Machine-readable events, `event_type,channel,t,delta`.
    ///
    /// `stable` rows carry the window mean in the last column; `pair` rows name
    /// both channels as `temp~freq`, use the temperature event time and carry
    /// the time offset `t_temp − t_freq`.
    pub fn write_events_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(EVENTS_HEADER.split(',')).map_err(csv_io)?;
        for (channel, st) in &self.stabilization {
            if let Some(st) = st {
                w.write_record(["stable", channel, &st.t_stable.to_string(), &st.mean.to_string()])
                    .map_err(csv_io)?;
            }
        }
        for e in self.temperature_steps.iter().chain(&self.frequency_steps) {
            w.write_record(["step", &e.channel, &e.t.to_string(), &e.delta.to_string()])
                .map_err(csv_io)?;
        }
        for p in &self.correlation.pairs {
            let channel = format!("{}~{}", p.temperature.channel, p.frequency.channel);
            w.write_record(["pair", &channel, &p.temperature.t.to_string(), &p.dt().to_string()])
                .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        out.push_str("stabilization:\n");
        for (channel, st) in &self.stabilization {
            match st {
                Some(s) => out.push_str(&format!(
                    "  {channel}: stable from t={} s at {:.2}\n",
                    s.t_stable, s.mean
                )),
                None => out.push_str(&format!("  {channel}: never stable\n")),
            }
        }
        out.push_str("steps:\n");
        for e in self.temperature_steps.iter().chain(&self.frequency_steps) {
            out.push_str(&format!("  {} at t={} s, delta {:+.2}\n", e.channel, e.t, e.delta));
        }
        out.push_str("correlated:\n");
        for p in &self.correlation.pairs {
            out.push_str(&format!(
                "  {} (t={} s, {:+.2}) <-> {} (t={} s, {:+.2})\n",
                p.temperature.channel,
                p.temperature.t,
                p.temperature.delta,
                p.frequency.channel,
                p.frequency.t,
                p.frequency.delta
            ));
        }
        let unpaired = self.correlation.unpaired_temperature.len() + self.correlation.unpaired_frequency.len();
        out.push_str(&format!("unpaired events: {unpaired}\n"));
        out
    }
}

/// Shapes of the bundled synthetic traces. Both are synthetic, sampled at 1 Hz for 3500 s.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Ramp to a stable zone at 1800 s, two CPU clocks dropping 100 MHz at
    /// 1800 s and a second sensor dropping 1 °C at 1805 s.
    Throttle,
    /// Already warm device holding 38–42 °C with a steady GPU clock and
    /// isolated one-sample dips.
    Steady,
}

pub const TRACE_DURATION: usize = 3500;
/// Seed of the bundled trace files.
pub const TRACE_SEED: u64 = 1805;

/// Deterministic synthetic traces for `scenario`.
pub fn synthetic_traces(scenario: Scenario, seed: u64) -> Vec<SensorTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = move |amp: f64| rng.gen_range(-amp..=amp);
    let times = (0..TRACE_DURATION).map(|i| i as f64);
    let round = |v: f64, step: f64| (v / step).round() * step;
    let trace = |channel: &str, kind, values: Vec<f64>| {
        let samples = times
            .clone()
            .zip(values)
            .map(|(t, value)| Sample { t, value })
            .collect();
        SensorTrace::new(channel, kind, samples).expect("generated trace is valid")
    };

    let gpu_dips = || -> Vec<f64> {
        (0..TRACE_DURATION)
            .map(|i| if i % 97 == 41 { 400.0 } else { 650.0 })
            .collect()
    };

    match scenario {
        Scenario::Throttle => {
            let tz0 = (0..TRACE_DURATION)
                .map(|i| {
                    let t = i as f64;
                    let base = if t < 1800.0 { 30.0 + 20.0 * t / 1800.0 } else { 50.0 };
                    round(base + noise(0.05), 0.001)
                })
                .collect();
            let tz1 = (0..TRACE_DURATION)
                .map(|i| {
                    let base = if i < 1805 { 40.0 } else { 39.0 };
                    round(base + noise(0.1), 0.001)
                })
                .collect();
            let cpu = |noise: &mut dyn FnMut(f64) -> f64| -> Vec<f64> {
                (0..TRACE_DURATION)
                    .map(|i| {
                        let base = if i < 1800 { 700.0 } else { 600.0 };
                        base + round(noise(3.0), 1.0)
                    })
                    .collect()
            };
            let cpu3 = cpu(&mut noise);
            let cpu4 = cpu(&mut noise);
            let gpu = gpu_dips();
            vec![
                trace("cpu3", SensorKind::Frequency, cpu3),
                trace("cpu4", SensorKind::Frequency, cpu4),
                trace("gpu", SensorKind::Frequency, gpu),
                trace("tz0", SensorKind::Temperature, tz0),
                trace("tz1", SensorKind::Temperature, tz1),
            ]
        }
        Scenario::Steady => {
            let tz2 = (0..TRACE_DURATION)
                .map(|i| {
                    let t = i as f64;
                    round(40.0 + 1.5 * (t / 400.0).sin() + noise(0.2), 0.001)
                })
                .collect();
            let gpu = gpu_dips();
            vec![
                trace("gpu", SensorKind::Frequency, gpu),
                trace("tz2", SensorKind::Temperature, tz2),
            ]
        }
    }
}
