//! Measurement outcomes: integer-count histograms and normalized distributions.
//!
//! Outcomes are stored by basis index (bit `q` = qubit `q`). Files use
//! bitstrings whose leftmost character is qubit 0.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OutcomeError {
    #[error("bitstring `{bits}` has length {len}, expected width {width}")]
    WidthMismatch {
        bits: String,
        len: usize,
        width: usize,
    },
    #[error("invalid bitstring `{0}`")]
    InvalidBitstring(String),
    #[error("widths differ: {0} vs {1}")]
    IncompatibleWidths(usize, usize),
    #[error("probabilities sum to {sum}, not 1")]
    Unnormalized { sum: f64 },
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("histogram has no shots")]
    Empty,
    #[error("width {0} exceeds 64 qubits")]
    TooWide(usize),
    #[error("shot total {declared} does not match counts sum {actual}")]
    ShotMismatch { declared: u64, actual: u64 },
    #[error("json: {0}")]
    Json(String),
}

pub fn index_to_bits(index: u64, width: usize) -> String {
    (0..width)
        .map(|q| if index >> q & 1 == 1 { '1' } else { '0' })
        .collect()
}

pub fn bits_to_index(bits: &str, width: usize) -> Result<u64, OutcomeError> {
    if width > 64 {
        return Err(OutcomeError::TooWide(width));
    }
    if bits.len() != width {
        return Err(OutcomeError::WidthMismatch {
            bits: bits.to_string(),
            len: bits.len(),
            width,
        });
    }
    bits.bytes().enumerate().try_fold(0u64, |acc, (q, b)| match b {
        b'0' => Ok(acc),
        b'1' => Ok(acc | 1 << q),
        _ => Err(OutcomeError::InvalidBitstring(bits.to_string())),
    })
}

/// Map every outcome index through a qubit relabeling: bit `q` of the input
/// lands on bit `map[q]` of the output.
pub fn permute_index(index: u64, map: &[usize]) -> u64 {
    map.iter()
        .enumerate()
        .fold(0, |acc, (q, &dest)| acc | (index >> q & 1) << dest)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    width: usize,
    counts: BTreeMap<u64, u64>,
}

impl Histogram {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            counts: BTreeMap::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn add(&mut self, index: u64, count: u64) {
        if count > 0 {
            *self.counts.entry(index).or_insert(0) += count;
        }
    }

    pub fn merge(&mut self, other: &Histogram) -> Result<(), OutcomeError> {
        if other.width != self.width {
            return Err(OutcomeError::IncompatibleWidths(self.width, other.width));
        }
        for (&k, &v) in &other.counts {
            self.add(k, v);
        }
        Ok(())
    }

    pub fn count(&self, index: u64) -> u64 {
        self.counts.get(&index).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }

    pub fn shots(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn to_distribution(&self) -> Result<Distribution, OutcomeError> {
        let total = self.shots();
        if total == 0 {
            return Err(OutcomeError::Empty);
        }
        Ok(Distribution {
            width: self.width,
            probs: self
                .counts
                .iter()
                .map(|(&k, &v)| (k, v as f64 / total as f64))
                .collect(),
        })
    }

    pub fn to_json(&self) -> String {
        let repr = HistogramRepr {
            width: self.width,
            shots: self.shots(),
            counts: self
                .counts
                .iter()
                .map(|(&k, &v)| (index_to_bits(k, self.width), v))
                .collect(),
        };
        serde_json::to_string_pretty(&repr).expect("histogram serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, OutcomeError> {
        let repr: HistogramRepr =
            serde_json::from_str(text).map_err(|e| OutcomeError::Json(e.to_string()))?;
        let mut h = Histogram::new(repr.width);
        for (bits, v) in &repr.counts {
            h.add(bits_to_index(bits, repr.width)?, *v);
        }
        if h.shots() != repr.shots {
            return Err(OutcomeError::ShotMismatch {
                declared: repr.shots,
                actual: h.shots(),
            });
        }
        Ok(h)
    }
}

#[derive(Serialize, Deserialize)]
struct HistogramRepr {
    width: usize,
    shots: u64,
    counts: BTreeMap<String, u64>,
}

/// Outcome probabilities; absent outcomes have probability zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    width: usize,
    probs: BTreeMap<u64, f64>,
}

impl Distribution {
    /// Tolerance on `|Σp − 1|` accepted from files and callers.
    pub const NORMALIZATION_TOL: f64 = 1e-6;

    /// Build from raw probabilities; rejects values outside [0, 1] and sums
    /// further than [`Self::NORMALIZATION_TOL`] from one.
    pub fn new(width: usize, probs: BTreeMap<u64, f64>) -> Result<Self, OutcomeError> {
        if let Some(&p) = probs.values().find(|p| !(0.0..=1.0 + 1e-12).contains(*p)) {
            return Err(OutcomeError::InvalidProbability(p));
        }
        let sum: f64 = probs.values().sum();
        if (sum - 1.0).abs() > Self::NORMALIZATION_TOL {
            return Err(OutcomeError::Unnormalized { sum });
        }
        Ok(Self { width, probs })
    }

    /// Normalize nonnegative weights, dropping zero entries.
    pub fn from_weights(
        width: usize,
        weights: impl IntoIterator<Item = (u64, f64)>,
    ) -> Result<Self, OutcomeError> {
        let probs: BTreeMap<u64, f64> = weights.into_iter().filter(|&(_, w)| w > 0.0).collect();
        let total: f64 = probs.values().sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(OutcomeError::Empty);
        }
        Ok(Self {
            width,
            probs: probs.into_iter().map(|(k, w)| (k, w / total)).collect(),
        })
    }

    pub fn point(width: usize, index: u64) -> Self {
        Self {
            width,
            probs: BTreeMap::from([(index, 1.0)]),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn prob(&self, index: u64) -> f64 {
        self.probs.get(&index).copied().unwrap_or(0.0)
    }

    pub fn probs(&self) -> &BTreeMap<u64, f64> {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn support_len(&self) -> usize {
        self.probs.len()
    }

    /// Most likely outcome (lowest index on ties).
    pub fn mode(&self) -> Option<(u64, f64)> {
        self.probs
            .iter()
            .fold(None, |best: Option<(u64, f64)>, (&k, &p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((k, p)),
            })
    }

    pub fn total_variation(&self, other: &Distribution) -> f64 {
        let mut keys: Vec<u64> = self.probs.keys().chain(other.probs.keys()).copied().collect();
        keys.sort_unstable();
        keys.dedup();
        0.5 * keys
            .iter()
            .map(|&k| (self.prob(k) - other.prob(k)).abs())
            .sum::<f64>()
    }

    /// Marginal over the listed qubits, in the listed order.
    pub fn marginal(&self, qubits: &[usize]) -> Distribution {
        let mut probs = BTreeMap::new();
        for (&k, &p) in &self.probs {
            let idx = qubits
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, &q)| acc | (k >> q & 1) << i);
            *probs.entry(idx).or_insert(0.0) += p;
        }
        Distribution {
            width: qubits.len(),
            probs,
        }
    }

    pub fn to_json(&self) -> String {
        let repr = DistributionRepr {
            width: self.width,
            probs: self
                .probs
                .iter()
                .map(|(&k, &p)| (index_to_bits(k, self.width), p))
                .collect(),
        };
        serde_json::to_string_pretty(&repr).expect("distribution serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, OutcomeError> {
        let repr: DistributionRepr =
            serde_json::from_str(text).map_err(|e| OutcomeError::Json(e.to_string()))?;
        let mut probs = BTreeMap::new();
        for (bits, &p) in &repr.probs {
            probs.insert(bits_to_index(bits, repr.width)?, p);
        }
        Self::new(repr.width, probs)
    }
}

#[derive(Serialize, Deserialize)]
struct DistributionRepr {
    width: usize,
    probs: BTreeMap<String, f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_order_is_qubit_zero_first() {
        assert_eq!(index_to_bits(0b001, 3), "100");
        assert_eq!(bits_to_index("100", 3).unwrap(), 1);
        assert_eq!(bits_to_index("011", 3).unwrap(), 0b110);
        assert!(matches!(
            bits_to_index("01", 3),
            Err(OutcomeError::WidthMismatch { .. })
        ));
        assert!(matches!(
            bits_to_index("0a1", 3),
            Err(OutcomeError::InvalidBitstring(_))
        ));
    }

    #[test]
    fn permutation_moves_bits() {
        // qubit 0 -> 2, qubit 1 -> 0
        assert_eq!(permute_index(0b01, &[2, 0]), 0b100);
        assert_eq!(permute_index(0b10, &[2, 0]), 0b001);
    }

    #[test]
    fn histogram_json_round_trip() {
        let mut h = Histogram::new(3);
        h.add(0b101, 40);
        h.add(0, 60);
        let back = Histogram::from_json(&h.to_json()).unwrap();
        assert_eq!(back, h);
        assert_eq!(back.shots(), 100);
        let bad = r#"{"width": 2, "shots": 5, "counts": {"01": 4}}"#;
        assert!(matches!(
            Histogram::from_json(bad),
            Err(OutcomeError::ShotMismatch { .. })
        ));
    }

    #[test]
    fn distribution_normalization_enforced() {
        let probs = BTreeMap::from([(0, 0.5), (1, 0.3)]);
        assert!(matches!(
            Distribution::new(1, probs),
            Err(OutcomeError::Unnormalized { .. })
        ));
        let d = Distribution::from_weights(2, [(0, 2.0), (3, 6.0), (1, 0.0)]).unwrap();
        assert_eq!(d.support_len(), 2);
        assert!((d.prob(3) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn marginal_and_tv() {
        let d = Distribution::from_weights(2, [(0b00, 1.0), (0b11, 1.0)]).unwrap();
        let m = d.marginal(&[1]);
        assert!((m.prob(0) - 0.5).abs() < 1e-15);
        let p = Distribution::point(2, 0);
        assert!((d.total_variation(&p) - 0.5).abs() < 1e-15);
    }
}
