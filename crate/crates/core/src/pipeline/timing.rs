use std::time::{Duration, Instant};

/// Accumulated wall time for one stage (optionally at one sigma).
#[derive(Debug, Clone, PartialEq)]
pub struct StageTiming {
    pub stage: String,
    pub sigma: Option<f64>,
    pub total: Duration,
    pub invocations: u32,
}

impl StageTiming {
    pub fn mean_secs(&self) -> f64 {
        if self.invocations == 0 {
            0.0
        } else {
            self.total.as_secs_f64() / self.invocations as f64
        }
    }
}

/// Timing sink keyed by `(stage, sigma)`, kept in first-seen order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timings {
    entries: Vec<StageTiming>,
}

impl Timings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, stage: &str, sigma: Option<f64>, elapsed: Duration) {
        match self.position(stage, sigma) {
            Some(i) => {
                let e = &mut self.entries[i];
                e.total += elapsed;
                e.invocations += 1;
            }
            None => self.entries.push(StageTiming {
                stage: stage.to_string(),
                sigma,
                total: elapsed,
                invocations: 1,
            }),
        }
    }

    pub fn get(&self, stage: &str, sigma: Option<f64>) -> Option<&StageTiming> {
        self.position(stage, sigma).map(|i| &self.entries[i])
    }

    pub fn entries(&self) -> &[StageTiming] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct stage names in first-seen order.
    pub fn stage_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = Vec::new();
        for e in &self.entries {
            if !names.contains(&e.stage.as_str()) {
                names.push(&e.stage);
            }
        }
        names
    }

    /// Distinct sigmas in first-seen order.
    pub fn sigmas(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for s in self.entries.iter().filter_map(|e| e.sigma) {
            if !out.iter().any(|o| o.to_bits() == s.to_bits()) {
                out.push(s);
            }
        }
        out
    }

    /// Total time per stage name, summed over sigmas.
    pub fn total_for_stage(&self, stage: &str) -> Duration {
        self.entries.iter().filter(|e| e.stage == stage).map(|e| e.total).sum()
    }

    fn position(&self, stage: &str, sigma: Option<f64>) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| e.stage == stage && e.sigma.map(f64::to_bits) == sigma.map(f64::to_bits))
    }
}

/// Run `stage` and record its wall time (monotonic clock) under `name`.
pub fn run_stage<T>(timings: &mut Timings, name: &str, sigma: Option<f64>, stage: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = stage();
    timings.record(name, sigma, start.elapsed());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Raster;

    #[test]
    fn identity_stage_passes_through() {
        let img = Raster::from_fn(5, 4, |x, y| (x * y) as f32);
        let mut t = Timings::new();
        let out = run_stage(&mut t, "identity", None, || img.clone());
        assert_eq!(out, img);
        let e = t.get("identity", None).unwrap();
        assert_eq!(e.invocations, 1);
        assert!(e.mean_secs() >= 0.0);
    }

    #[test]
    fn repeated_invocations_accumulate() {
        let mut t = Timings::new();
        run_stage(&mut t, "a", Some(2.0), || ());
        run_stage(&mut t, "a", Some(2.0), || ());
        run_stage(&mut t, "a", Some(4.0), || ());
        run_stage(&mut t, "b", None, || ());
        assert_eq!(t.get("a", Some(2.0)).unwrap().invocations, 2);
        assert_eq!(t.entries().len(), 3);
        assert_eq!(t.stage_names(), vec!["a", "b"]);
        assert_eq!(t.sigmas(), vec![2.0, 4.0]);
        assert!(t.get("a", None).is_none());
    }
}
