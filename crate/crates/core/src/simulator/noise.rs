use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::circuit::{Gate, GateKind};

/// Median single-qubit DRB error rate used as the model default.
pub const MEDIAN_EPS_1Q: f64 = 2.0e-4;
/// Median two-qubit DRB error rate used as the model default.
pub const MEDIAN_EPS_2Q: f64 = 46.4e-4;
/// Per-qubit SPAM error reported for the device.
pub const DEVICE_SPAM: f64 = 0.005;

/// Where depolarizing noise attaches in a circuit. Implemented by
/// [`NoiseModel`]; tests implement it to inject time-dependent noise.
pub trait GateNoise: Sync {
    /// Depolarizing probability applied after the `index`-th gate.
    fn gate_error(&self, index: usize, gate: &Gate) -> f64;
    /// Probability that the readout of `qubit` is flipped.
    fn readout_flip(&self, qubit: usize) -> f64;
}

/// Per-qubit and per-pair depolarizing rates with global fallbacks.
///
/// Physical single-qubit pulses (`X90`, `Y90`) draw `eps_1q`, entanglers (`XX`,
/// `ZZ`) draw `eps_2q`, and virtual `RZ` gates are noiseless.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub eps_1q: f64,
    pub eps_2q: f64,
    #[serde(default)]
    pub spam: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub eps_1q_per_qubit: BTreeMap<usize, f64>,
    /// Unordered pairs stored as `(min, max)`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps_2q_per_pair: Vec<((usize, usize), f64)>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub spam_per_qubit: BTreeMap<usize, f64>,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::uniform(MEDIAN_EPS_1Q, MEDIAN_EPS_2Q, 0.0)
    }
}

impl NoiseModel {
    pub fn uniform(eps_1q: f64, eps_2q: f64, spam: f64) -> Self {
        Self {
            eps_1q,
            eps_2q,
            spam,
            eps_1q_per_qubit: BTreeMap::new(),
            eps_2q_per_pair: Vec::new(),
            spam_per_qubit: BTreeMap::new(),
        }
    }

    pub fn noiseless() -> Self {
        Self::uniform(0.0, 0.0, 0.0)
    }

    pub fn with_pair_rate(mut self, a: usize, b: usize, eps: f64) -> Self {
        let key = (a.min(b), a.max(b));
        self.eps_2q_per_pair.retain(|(k, _)| *k != key);
        self.eps_2q_per_pair.push((key, eps));
        self.eps_2q_per_pair.sort_by_key(|x| x.0);
        self
    }

    pub fn with_qubit_rate(mut self, q: usize, eps: f64) -> Self {
        self.eps_1q_per_qubit.insert(q, eps);
        self
    }

    pub fn with_qubit_spam(mut self, q: usize, flip: f64) -> Self {
        self.spam_per_qubit.insert(q, flip);
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let all = [self.eps_1q, self.eps_2q, self.spam]
            .into_iter()
            .chain(self.eps_1q_per_qubit.values().copied())
            .chain(self.eps_2q_per_pair.iter().map(|(_, e)| *e))
            .chain(self.spam_per_qubit.values().copied());
        for r in all {
            if !(0.0..=1.0).contains(&r) {
                return Err(SimError::InvalidRate(r));
            }
        }
        Ok(())
    }

    pub fn one_qubit_rate(&self, q: usize) -> f64 {
        self.eps_1q_per_qubit.get(&q).copied().unwrap_or(self.eps_1q)
    }

    pub fn two_qubit_rate(&self, a: usize, b: usize) -> f64 {
        let key = (a.min(b), a.max(b));
        self.eps_2q_per_pair
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, e)| *e)
            .unwrap_or(self.eps_2q)
    }

    pub fn spam_rate(&self, q: usize) -> f64 {
        self.spam_per_qubit.get(&q).copied().unwrap_or(self.spam)
    }

    /// Noise as seen by logical qubits placed at `map[logical]`.
    pub fn pulled_back(&self, map: &[usize]) -> NoiseModel {
        let mut out = NoiseModel::uniform(self.eps_1q, self.eps_2q, self.spam);
        for (l, &p) in map.iter().enumerate() {
            if let Some(&e) = self.eps_1q_per_qubit.get(&p) {
                out.eps_1q_per_qubit.insert(l, e);
            }
            if let Some(&s) = self.spam_per_qubit.get(&p) {
                out.spam_per_qubit.insert(l, s);
            }
        }
        for (la, &pa) in map.iter().enumerate() {
            for (lb, &pb) in map.iter().enumerate().skip(la + 1) {
                let key = (pa.min(pb), pa.max(pb));
                if let Some((_, e)) = self.eps_2q_per_pair.iter().find(|(k, _)| *k == key) {
                    out = out.with_pair_rate(la, lb, *e);
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("noise model serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let m: NoiseModel =
            serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }
}

impl GateNoise for NoiseModel {
    fn gate_error(&self, _index: usize, gate: &Gate) -> f64 {
        let q = gate.qubits();
        match gate.kind() {
            GateKind::Rz(_) => 0.0,
            _ if gate.arity() == 1 => self.one_qubit_rate(q[0]),
            _ => self.two_qubit_rate(q[0], q[1]),
        }
    }

    fn readout_flip(&self, qubit: usize) -> f64 {
        self.spam_rate(qubit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_component_medians() {
        let m = NoiseModel::default();
        assert_eq!(m.eps_1q, 2.0e-4);
        assert_eq!(m.eps_2q, 46.4e-4);
        assert_eq!(m.spam, 0.0);
    }

    #[test]
    fn lookups_fall_back_to_globals() {
        let m = NoiseModel::uniform(1e-3, 1e-2, 0.0)
            .with_pair_rate(3, 1, 0.2)
            .with_qubit_rate(2, 0.05);
        assert_eq!(m.two_qubit_rate(1, 3), 0.2);
        assert_eq!(m.two_qubit_rate(3, 1), 0.2);
        assert_eq!(m.two_qubit_rate(0, 1), 1e-2);
        assert_eq!(m.one_qubit_rate(2), 0.05);
        assert_eq!(m.one_qubit_rate(0), 1e-3);
        assert_eq!(m.gate_error(0, &Gate::rz(2, 0.1)), 0.0);
        assert_eq!(m.gate_error(0, &Gate::xx(3, 1, 0.1)), 0.2);
    }

    #[test]
    fn pull_back_follows_placement() {
        let m = NoiseModel::uniform(0.0, 0.01, 0.0)
            .with_pair_rate(5, 9, 0.3)
            .with_qubit_spam(9, 0.1);
        let p = m.pulled_back(&[9, 2, 5]);
        assert_eq!(p.two_qubit_rate(0, 2), 0.3);
        assert_eq!(p.two_qubit_rate(0, 1), 0.01);
        assert_eq!(p.spam_rate(0), 0.1);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let m = NoiseModel::uniform(1e-4, 2e-3, 0.005).with_pair_rate(0, 1, 0.5);
        assert_eq!(NoiseModel::from_json(&m.to_json()).unwrap(), m);
        assert!(matches!(
            NoiseModel::from_json(r#"{"eps_1q": 1.5, "eps_2q": 0.0}"#),
            Err(SimError::InvalidRate(_))
        ));
    }
}
