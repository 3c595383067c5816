//! Direct randomized benchmarking on one or two qubits.
//!
//! Circuits are a random single-qubit Clifford on each qubit, `depth` random
//! core layers, and an inversion found by tableau lookup so that the noiseless
//! outcome is always all zeros. Success probabilities are fitted to
//! `a + b·p^d` and converted to error rates.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;

use rand::Rng;
use rand_distr::{Binomial, Distribution as _};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, Gate};
use crate::clifford::{one_qubit_cliffords, two_qubit_cliffords, Tableau};
use crate::par;
use crate::rng::SeedStream;
use crate::simulator::{run_shots, GateNoise, SimError};

/// Asymptote of two-qubit success curves.
pub const TWO_QUBIT_ASYMPTOTE: f64 = 0.25;
/// Depth cut of the truncated fit in the deep-DRB comparison.
pub const TRUNCATION_DEPTH: usize = 112;
pub const DEFAULT_BOOTSTRAP: usize = 200;

const SCAN_POINTS: usize = 10_000;
const SCAN_MIN_Q: f64 = 1e-7;
const GOLDEN_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DrbError {
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("dataset: {0}")]
    Json(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrbDesign {
    pub n_qubits: usize,
    pub depths: Vec<usize>,
    pub circuits_per_depth: usize,
    pub shots_per_circuit: u64,
    #[serde(default)]
    pub p_2q: f64,
}

impl DrbDesign {
    /// 1Q design: depths {1, 10, 100, 1000}, 4 circuits, 100 shots.
    pub fn standard_1q() -> Self {
        Self {
            n_qubits: 1,
            depths: vec![1, 10, 100, 1000],
            circuits_per_depth: 4,
            shots_per_circuit: 100,
            p_2q: 0.0,
        }
    }

    /// 2Q design: depths {1, 5, 22, 100}, 4 circuits, 100 shots.
    pub fn standard_2q(p_2q: f64) -> Self {
        Self {
            n_qubits: 2,
            depths: vec![1, 5, 22, 100],
            circuits_per_depth: 4,
            shots_per_circuit: 100,
            p_2q,
        }
    }

    /// Deep 2Q design: depths {1, 112, 223, …, 1000}, 4 circuits.
    pub fn deep_2q(p_2q: f64, shots_per_circuit: u64) -> Self {
        Self {
            n_qubits: 2,
            depths: (0..10).map(|k| 1 + 111 * k).collect(),
            circuits_per_depth: 4,
            shots_per_circuit,
            p_2q,
        }
    }

    pub fn validate(&self) -> Result<(), DrbError> {
        let bad = |m: &str| Err(DrbError::InvalidDesign(m.to_string()));
        if !(1..=2).contains(&self.n_qubits) {
            return bad("n_qubits must be 1 or 2");
        }
        if self.depths.is_empty() || self.depths[0] == 0 {
            return bad("depths must be positive and nonempty");
        }
        if self.depths.windows(2).any(|w| w[0] >= w[1]) {
            return bad("depths must be strictly increasing");
        }
        if self.circuits_per_depth == 0 || self.shots_per_circuit == 0 {
            return bad("circuits_per_depth and shots_per_circuit must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.p_2q) {
            return bad("p_2q must lie in [0, 1]");
        }
        Ok(())
    }

    /// Fixed asymptote used when fitting this design, if any.
    pub fn asymptote(&self) -> Option<f64> {
        (self.n_qubits == 2).then_some(TWO_QUBIT_ASYMPTOTE)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DrbCircuit {
    pub circuit: Circuit,
    pub ideal_outcome: u64,
    /// Gates in the preparation layer.
    pub prep_len: usize,
    /// Gate index where each core layer starts.
    pub layer_offsets: Vec<usize>,
    /// Gate index where the inversion layer starts.
    pub inversion_start: usize,
}

impl DrbCircuit {
    /// Core layer containing gate `index`, if it is a core gate.
    pub fn layer_of(&self, index: usize) -> Option<usize> {
        if index < self.prep_len || index >= self.inversion_start {
            return None;
        }
        Some(self.layer_offsets.partition_point(|&o| o <= index) - 1)
    }
}

fn random_pi2(q: usize, rng: &mut impl Rng) -> Gate {
    if rng.random_bool(0.5) {
        Gate::x90(q)
    } else {
        Gate::y90(q)
    }
}

/// Sample one DRB circuit of `depth` core layers. Deterministic in `seed`.
pub fn sample_drb_circuit(design: &DrbDesign, depth: usize, seed: u64) -> Result<DrbCircuit, DrbError> {
    // depth lists do not matter here, only the layer distribution
    if !(1..=2).contains(&design.n_qubits) || !(0.0..=1.0).contains(&design.p_2q) {
        return Err(DrbError::InvalidDesign(
            "need n_qubits in {1, 2} and p_2q in [0, 1]".into(),
        ));
    }
    let n = design.n_qubits;
    let mut rng = SeedStream::new(seed, "drb-circuit").rng(0);
    let table = one_qubit_cliffords();
    let mut c = Circuit::new(n);
    for q in 0..n {
        c.extend(table.gates(rng.random_range(0..table.len()), q))
            .expect("qubit in range");
    }
    let prep_len = c.gate_count();
    let mut layer_offsets = Vec::with_capacity(depth);
    for _ in 0..depth {
        layer_offsets.push(c.gate_count());
        if n == 2 && rng.random::<f64>() < design.p_2q {
            c.push(Gate::xx(0, 1, FRAC_PI_4)).expect("qubits in range");
        } else {
            for q in 0..n {
                let g = random_pi2(q, &mut rng);
                c.push(g).expect("qubit in range");
            }
        }
    }
    let inversion_start = c.gate_count();
    let tableau = Tableau::from_circuit(&c).expect("DRB circuits are Clifford");
    let inversion = if n == 1 {
        table.gates(table.inverse_of(&tableau).expect("one qubit"), 0)
    } else {
        two_qubit_cliffords()
            .inverse_of(&tableau)
            .expect("two qubits")
            .gates(0, 1)
    };
    c.extend(inversion).expect("qubits in range");
    Ok(DrbCircuit {
        circuit: c,
        ideal_outcome: 0,
        prep_len,
        layer_offsets,
        inversion_start,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrbRecord {
    pub depth: usize,
    pub circuit_index: usize,
    pub successes: u64,
    pub shots: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrbDataset {
    pub design: DrbDesign,
    pub records: Vec<DrbRecord>,
}

impl DrbDataset {
    /// Distinct depths and the mean success fraction at each.
    pub fn mean_success(&self) -> (Vec<usize>, Vec<f64>) {
        let mut by_depth: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for r in &self.records {
            let e = by_depth.entry(r.depth).or_default();
            e.0 += r.successes as f64 / r.shots as f64;
            e.1 += 1;
        }
        by_depth.into_iter().map(|(d, (s, k))| (d, s / k as f64)).unzip()
    }

    /// Records at depths `≤ max_depth`.
    pub fn truncated(&self, max_depth: usize) -> DrbDataset {
        DrbDataset {
            design: DrbDesign {
                depths: self.design.depths.iter().copied().filter(|&d| d <= max_depth).collect(),
                ..self.design.clone()
            },
            records: self.records.iter().filter(|r| r.depth <= max_depth).cloned().collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dataset serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, DrbError> {
        let ds: DrbDataset = serde_json::from_str(text).map_err(|e| DrbError::Json(e.to_string()))?;
        ds.design.validate()?;
        if ds.records.iter().any(|r| r.shots == 0 || r.successes > r.shots) {
            return Err(DrbError::Json("records need 0 ≤ successes ≤ shots and shots > 0".into()));
        }
        Ok(ds)
    }
}

/// Run a DRB experiment where each circuit gets its own noise, e.g. to make
/// the error rate depend on the layer a gate belongs to.
pub fn run_drb_with<N, F>(design: &DrbDesign, seed: u64, noise_for: F) -> Result<DrbDataset, DrbError>
where
    N: GateNoise,
    F: Fn(&DrbCircuit) -> N + Sync + Send,
{
    design.validate()?;
    let root = SeedStream::new(seed, "drb");
    let tasks: Vec<(usize, usize)> = design
        .depths
        .iter()
        .flat_map(|&d| (0..design.circuits_per_depth).map(move |k| (d, k)))
        .collect();
    let records = par::map_slice(&tasks, |&(depth, k)| -> Result<DrbRecord, DrbError> {
        let circuit_seed = root.child("circuit", depth as u64).seed(k as u64);
        let shot_seed = root.child("shots", depth as u64).seed(k as u64);
        let drb = sample_drb_circuit(design, depth, circuit_seed)?;
        let noise = noise_for(&drb);
        let hist = run_shots(&drb.circuit, &noise, design.shots_per_circuit, shot_seed)?;
        Ok(DrbRecord {
            depth,
            circuit_index: k,
            successes: hist.count(drb.ideal_outcome),
            shots: design.shots_per_circuit,
        })
    });
    Ok(DrbDataset {
        design: design.clone(),
        records: records.into_iter().collect::<Result<_, _>>()?,
    })
}

/// Run a DRB experiment with one noise model for every circuit.
pub fn run_drb<N: GateNoise>(design: &DrbDesign, noise: &N, seed: u64) -> Result<DrbDataset, DrbError> {
    run_drb_with(design, seed, |_| NoiseRef(noise))
}

struct NoiseRef<'a, N: ?Sized>(&'a N);

impl<N: GateNoise + ?Sized> GateNoise for NoiseRef<'_, N> {
    fn gate_error(&self, index: usize, gate: &Gate) -> f64 {
        self.0.gate_error(index, gate)
    }
    fn readout_flip(&self, qubit: usize) -> f64 {
        self.0.readout_flip(qubit)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub a_fixed: bool,
    pub n_qubits: usize,
    pub error_rate: f64,
    /// Sum of squared residuals.
    pub residual: f64,
    /// All successes were equal; `p` is set to 1.
    pub degenerate: bool,
    pub bootstrap_std: Option<f64>,
}

impl FitResult {
    pub fn curve(&self, depth: f64) -> f64 {
        self.a + self.b * self.p.powf(depth)
    }
}

/// `r = (1 − p)(4^n − 1)/4^n`.
pub fn decay_to_error_rate(p: f64, n_qubits: usize) -> f64 {
    let dim2 = 4f64.powi(n_qubits as i32);
    (1.0 - p) * (dim2 - 1.0) / dim2
}

/// Best `(a, b)` for fixed `p`, with `a` clamped to [0, 1].
fn linear_fit(depths: &[f64], s: &[f64], p: f64, a_fixed: Option<f64>) -> (f64, f64, f64) {
    let x: Vec<f64> = depths.iter().map(|&d| p.powf(d)).collect();
    let b_given = |a: f64| {
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        if sxx == 0.0 {
            0.0
        } else {
            x.iter().zip(s).map(|(xi, si)| xi * (si - a)).sum::<f64>() / sxx
        }
    };
    let (a, b) = match a_fixed {
        Some(a) => (a, b_given(a)),
        None => {
            let n = x.len() as f64;
            let xm = x.iter().sum::<f64>() / n;
            let sm = s.iter().sum::<f64>() / n;
            let sxx: f64 = x.iter().map(|v| (v - xm) * (v - xm)).sum();
            let (a, b) = if sxx > 1e-300 {
                let b = x.iter().zip(s).map(|(xi, si)| (xi - xm) * (si - sm)).sum::<f64>() / sxx;
                (sm - b * xm, b)
            } else {
                (sm, 0.0)
            };
            if (0.0..=1.0).contains(&a) {
                (a, b)
            } else {
                let a = a.clamp(0.0, 1.0);
                (a, b_given(a))
            }
        }
    };
    let sse = x
        .iter()
        .zip(s)
        .map(|(xi, si)| (a + b * xi - si).powi(2))
        .sum();
    (a, b, sse)
}

/// Least-squares fit of `a + b·p^d` to per-depth mean successes.
///
/// `p` is found by scanning 10⁴ values of `1 − p` log-spaced in [10⁻⁷, 1],
/// solving for `(a, b)` (or `b` alone) at each, and refining the best bracket
/// by golden-section search.
pub fn fit_decay(depths: &[f64], success: &[f64], a_fixed: Option<f64>, n_qubits: usize) -> Result<FitResult, DrbError> {
    if depths.len() != success.len() {
        return Err(DrbError::InsufficientData("depths and successes differ in length".into()));
    }
    let mut distinct = depths.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let need = if a_fixed.is_some() { 2 } else { 3 };
    if distinct.len() < need {
        return Err(DrbError::InsufficientData(format!(
            "{} distinct depths, need at least {need}",
            distinct.len()
        )));
    }
    if success.iter().chain(depths).any(|v| !v.is_finite()) {
        return Err(DrbError::InsufficientData("non-finite input".into()));
    }

    let first = success[0];
    if success.iter().all(|&v| v == first) {
        let (a, b) = match a_fixed {
            Some(a) => (a, first - a),
            None => (first, 0.0),
        };
        return Ok(FitResult {
            a,
            b,
            p: 1.0,
            a_fixed: a_fixed.is_some(),
            n_qubits,
            error_rate: 0.0,
            residual: 0.0,
            degenerate: true,
            bootstrap_std: None,
        });
    }

    let sse = |p: f64| linear_fit(depths, success, p, a_fixed).2;
    let step = (1.0 / SCAN_MIN_Q).log10() / (SCAN_POINTS - 1) as f64;
    let ps: Vec<f64> = (0..SCAN_POINTS)
        .map(|k| 1.0 - 10f64.powf(SCAN_MIN_Q.log10() + step * k as f64))
        .collect();
    let (best, _) = ps
        .iter()
        .map(|&p| sse(p))
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, v)| if v < acc.1 { (k, v) } else { acc });
    // ps decreases with k
    let mut hi = if best == 0 { 1.0 } else { ps[best - 1] };
    let mut lo = if best + 1 == SCAN_POINTS { 0.0 } else { ps[best + 1] };
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (sse(x1), sse(x2));
    while hi - lo > GOLDEN_TOL {
        // x1 < x2
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = sse(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = sse(x2);
        }
    }
    let mut p = 0.5 * (lo + hi);
    if sse(ps[best]) < sse(p) {
        p = ps[best];
    }
    let (a, b, residual) = linear_fit(depths, success, p, a_fixed);
    Ok(FitResult {
        a,
        b,
        p,
        a_fixed: a_fixed.is_some(),
        n_qubits,
        error_rate: decay_to_error_rate(p, n_qubits),
        residual,
        degenerate: false,
        bootstrap_std: None,
    })
}

/// Fit a dataset with the asymptote its design prescribes.
pub fn fit_dataset(ds: &DrbDataset) -> Result<FitResult, DrbError> {
    let (depths, means) = ds.mean_success();
    let depths: Vec<f64> = depths.into_iter().map(|d| d as f64).collect();
    fit_decay(&depths, &means, ds.design.asymptote(), ds.design.n_qubits)
}

/// Parametric resample: each circuit's count drawn from the fitted curve.
fn resample(ds: &DrbDataset, fit: &FitResult, rng: &mut impl Rng) -> DrbDataset {
    let records = ds
        .records
        .iter()
        .map(|r| {
            let q = fit.curve(r.depth as f64).clamp(0.0, 1.0);
            let successes = Binomial::new(r.shots, q).expect("valid binomial").sample(rng);
            DrbRecord { successes, ..r.clone() }
        })
        .collect();
    DrbDataset {
        design: ds.design.clone(),
        records,
    }
}

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let m = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Standard deviation of the error rate over `n_resamples` parametric
/// bootstrap replicates. Deterministic in `seed`.
pub fn bootstrap_fit(ds: &DrbDataset, fit: &FitResult, n_resamples: usize, seed: u64) -> Result<f64, DrbError> {
    let stream = SeedStream::new(seed, "bootstrap");
    let rates = par::try_map_range(n_resamples, |i| {
        let replica = resample(ds, fit, &mut stream.rng(i as u64));
        fit_dataset(&replica).map(|f| f.error_rate)
    })?;
    Ok(sample_std(&rates))
}

/// Rates solved from the two-instance mixing model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateExtraction {
    /// Error of a layer of two single-qubit gates.
    pub e_pair: f64,
    pub r_2q: f64,
    pub r_1q: f64,
    /// False when any solved quantity left [0, 1]; the values are kept.
    pub in_range: bool,
}

/// Solve `e(p_2q) = (1 − p_2q)·e_pair + p_2q·r_2q` from the layer errors at
/// `p_2q = 0.25` and `0.75`, then `r_1q` from `e_pair = 1 − (1 − r_1q)²`.
pub fn extract_rates(e_low: f64, e_high: f64) -> RateExtraction {
    let e_pair = 1.5 * e_low - 0.5 * e_high;
    let r_2q = -0.5 * e_low + 1.5 * e_high;
    let r_1q = 1.0 - (1.0 - e_pair).max(0.0).sqrt();
    let unit = 0.0..=1.0;
    let in_range = unit.contains(&e_pair) && unit.contains(&r_2q) && unit.contains(&r_1q);
    if !in_range {
        log::debug!("rate extraction out of range: e_pair={e_pair}, r_2q={r_2q}");
    }
    RateExtraction {
        e_pair,
        r_2q,
        r_1q,
        in_range,
    }
}

/// Bootstrap standard deviations of `(r_2q, r_1q)` resampling both instances.
pub fn bootstrap_rates(
    low: (&DrbDataset, &FitResult),
    high: (&DrbDataset, &FitResult),
    n_resamples: usize,
    seed: u64,
) -> Result<(f64, f64), DrbError> {
    let s_low = SeedStream::new(seed, "bootstrap-low");
    let s_high = SeedStream::new(seed, "bootstrap-high");
    let pairs = par::try_map_range(n_resamples, |i| -> Result<(f64, f64), DrbError> {
        let fl = fit_dataset(&resample(low.0, low.1, &mut s_low.rng(i as u64)))?;
        let fh = fit_dataset(&resample(high.0, high.1, &mut s_high.rng(i as u64)))?;
        let r = extract_rates(fl.error_rate, fh.error_rate);
        Ok((r.r_2q, r.r_1q))
    })?;
    let (r2, r1): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok((sample_std(&r2), sample_std(&r1)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationComparison {
    pub p_full: f64,
    pub p_truncated: f64,
    /// `|p_full − p_truncated| / (1 − p_full)`
    pub relative_difference: f64,
}

/// Compare the fit on all depths with the fit on depths `≤ max_depth`.
pub fn truncation_comparison(ds: &DrbDataset, max_depth: usize) -> Result<TruncationComparison, DrbError> {
    let full = fit_dataset(ds)?;
    let short = fit_dataset(&ds.truncated(max_depth))?;
    let gap = (full.p - short.p).abs();
    let relative_difference = if full.p < 1.0 {
        gap / (1.0 - full.p)
    } else if gap == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(TruncationComparison {
        p_full: full.p,
        p_truncated: short.p,
        relative_difference,
    })
}
