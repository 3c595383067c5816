//! Run configuration. Precedence, lowest first: built-in defaults, the JSON
//! config file, `AQBENCH_*` environment variables, command-line flags.
//!
//! The manifest written next to every run's outputs has the same shape as a
//! config file, so `--config out/manifest.json` repeats the run.

use std::fmt;
use std::path::Path;

use aqbench::analysis::{Aggregate, TimingTable, AQ_THRESHOLD};
use aqbench::appsuite::SuiteConfig;
use aqbench::pipeline::BenchConfig;
use aqbench::simulator::DEFAULT_MAX_WIDTH;
use aqbench::NoiseModel;
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

/// Bad user input; reported with exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Informational in manifests; ignored on input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_table: Option<TimingTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drb: Option<DrbSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<ScoreSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vote: Option<VoteSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingSection>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("config {}: {e}", path.display())).into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DrbSection {
    /// Device qubits `0..width`.
    pub width: usize,
    /// `all` or a comma-separated list such as `0-1,2-5`.
    pub pairs: String,
    pub circuits_per_depth: usize,
    pub shots_per_circuit: u64,
    pub bootstrap: usize,
    pub write_datasets: bool,
}

impl Default for DrbSection {
    fn default() -> Self {
        Self {
            width: 2,
            pairs: "all".into(),
            circuits_per_depth: 4,
            shots_per_circuit: 100,
            bootstrap: aqbench::drb::DEFAULT_BOOTSTRAP,
            write_datasets: true,
        }
    }
}

impl DrbSection {
    pub fn pair_list(&self) -> Result<Vec<(usize, usize)>> {
        if self.width < 2 {
            return usage(format!("drb.width: need at least 2 qubits, got {}", self.width));
        }
        let spec = self.pairs.trim();
        if spec == "all" {
            return Ok((0..self.width)
                .flat_map(|i| (i + 1..self.width).map(move |j| (i, j)))
                .collect());
        }
        let mut out = Vec::new();
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let parsed = item
                .split_once('-')
                .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
            let Some((a, b)): Option<(usize, usize)> = parsed else {
                return usage(format!("drb.pairs: cannot parse `{item}`, expected i-j"));
            };
            if a == b || a >= self.width || b >= self.width {
                return usage(format!(
                    "drb.pairs: `{item}` must name two distinct qubits below width {}",
                    self.width
                ));
            }
            let p = (a.min(b), a.max(b));
            if !out.contains(&p) {
                out.push(p);
            }
        }
        if out.is_empty() {
            return usage("drb.pairs: empty pair list");
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSpec {
    pub circuit: String,
    pub ideal: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub use_suite: bool,
    pub suite: SuiteConfig,
    pub instances: Vec<IngestSpec>,
    pub run: BenchConfig,
    /// Wider instances are skipped with a warning.
    pub sim_max_width: usize,
    pub write_histograms: bool,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            use_suite: true,
            suite: SuiteConfig::default(),
            instances: Vec::new(),
            run: BenchConfig::default(),
            sim_max_width: DEFAULT_MAX_WIDTH,
            write_histograms: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreSection {
    pub records: String,
    pub threshold: f64,
    pub aggregate: Aggregate,
}

impl Default for ScoreSection {
    fn default() -> Self {
        Self {
            records: String::new(),
            threshold: AQ_THRESHOLD,
            aggregate: Aggregate::Mean,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Simple,
    Vote,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoteSection {
    pub histograms: Vec<String>,
    /// JSON file `{"variant_maps": [[...], ...]}` with `map[logical] = physical`.
    pub maps: Option<String>,
    pub method: Method,
    pub t_start: usize,
}

impl Default for VoteSection {
    fn default() -> Self {
        Self {
            histograms: Vec::new(),
            maps: None,
            method: Method::Vote,
            t_start: aqbench::mitigation::DEFAULT_T_START,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingSection {
    pub circuit: String,
    pub shots: u64,
}

impl Default for TimingSection {
    fn default() -> Self {
        Self {
            circuit: String::new(),
            shots: 100,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn section(width: usize, pairs: &str) -> DrbSection {
        DrbSection {
            width,
            pairs: pairs.into(),
            ..Default::default()
        }
    }

    #[test]
    fn all_pairs_of_eight() {
        assert_eq!(section(8, "all").pair_list().unwrap().len(), 28);
    }

    #[test]
    fn explicit_pairs_are_sorted_and_deduplicated() {
        let p = section(4, "3-1, 0-2,1-3").pair_list().unwrap();
        assert_eq!(p, vec![(1, 3), (0, 2)]);
    }

    #[test]
    fn bad_pair_lists_are_usage_errors() {
        for spec in ["", " , ", "0-0", "0-4", "a-b", "1"] {
            let err = section(4, spec).pair_list().unwrap_err();
            assert!(err.downcast_ref::<UsageError>().is_some(), "{spec}");
        }
    }

    #[test]
    fn manifest_round_trips() {
        let cfg = RunConfig {
            command: Some("drb".into()),
            seed: Some(3),
            drb: Some(section(3, "0-2")),
            ..Default::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.drb, cfg.drb);
        assert_eq!(back.seed, Some(3));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 1}"#).is_err());
    }
}
