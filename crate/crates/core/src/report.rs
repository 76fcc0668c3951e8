//! Verification reports and deterministic sampling streams.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Random stream for check number `index` of a run seeded with `seed`.
/// Streams are independent, so adding a check leaves the others unchanged.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub check_name: String,
    /// Short statement of the identity being checked.
    pub anchor: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub samples: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VerificationReport {
    pub entries: Vec<ReportEntry>,
    #[serde(default)]
    pub config_echo: serde_json::Value,
}

impl ReportEntry {
    /// `passed` is `residual < tolerance`. Non-finite residuals are stored as
    /// `f64::MAX` so that the report stays valid JSON, and fail.
    pub fn new(check_name: impl Into<String>, anchor: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        let residual = if residual.is_finite() { residual } else { f64::MAX };
        Self {
            check_name: check_name.into(),
            anchor: anchor.into(),
            residual,
            tolerance,
            passed: residual < tolerance,
            samples: 1,
            seed: 0,
            wall_time_ms: None,
        }
    }

    pub fn with_samples(mut self, samples: u64, seed: u64) -> Self {
        self.samples = samples;
        self.seed = seed;
        self
    }

    /// Entry for a check that could not be evaluated.
    pub fn failed(check_name: impl Into<String>, anchor: impl Into<String>, tolerance: f64) -> Self {
        Self::new(check_name, anchor, f64::MAX, tolerance)
    }
}

impl VerificationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, entry: ReportEntry) {
        self.entries.push(entry);
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.entries.extend(other.entries);
    }

    /// Runs `check`, records its wall time when `timed`.
    pub fn run(&mut self, timed: bool, check: impl FnOnce() -> ReportEntry) {
        let start = Instant::now();
        let mut entry = check();
        if timed {
            entry.wall_time_ms = Some(start.elapsed().as_secs_f64() * 1e3);
        }
        self.entries.push(entry);
    }

    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn get(&self, check_name: &str) -> Option<&ReportEntry> {
        self.entries.iter().find(|e| e.check_name == check_name)
    }

    /// Orders entries by check name so concurrent producers merge
    /// deterministically.
    pub fn sort(&mut self) {
        self.entries.sort_by(|a, b| a.check_name.cmp(&b.check_name));
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::Error::Schema(e.to_string()))
    }

    pub fn render_text(&self) -> String {
        let width = self.entries.iter().map(|e| e.check_name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!(
                "{:<4} {:<width$}  residual {:>10.3e}  tol {:>8.1e}  ({})\n",
                if e.passed { "PASS" } else { "FAIL" },
                e.check_name,
                e.residual,
                e.tolerance,
                e.anchor,
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn substreams_are_independent_of_order() {
        let a: f64 = substream(7, 3).random();
        let _: f64 = substream(7, 2).random();
        let b: f64 = substream(7, 3).random();
        assert_eq!(a, b);
        assert_ne!(a, substream(7, 4).random::<f64>());
    }

    #[test]
    fn nan_residual_fails() {
        assert!(!ReportEntry::new("x", "", f64::NAN, 1.0).passed);
        assert!(!ReportEntry::new("x", "", 1.0, 1.0).passed);
        assert!(ReportEntry::new("x", "", 0.5, 1.0).passed);
    }

    #[test]
    fn json_round_trip() {
        let mut r = VerificationReport::new();
        r.push(ReportEntry::new("b", "x = y", 1e-12, 1e-9).with_samples(10, 7));
        r.push(ReportEntry::failed("a", "z", 1e-9));
        r.sort();
        assert_eq!(r.entries[0].check_name, "a");
        assert_eq!(VerificationReport::from_json(&r.to_json()).unwrap(), r);
    }
}
