//! Fidelity metrics, #AQ scoring, volumetric tables, error-vs-distance
//! regression and execution-time estimates.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, GateKind};
use crate::outcome::Distribution;

/// `1/e` at full precision.
pub const AQ_THRESHOLD: f64 = 0.36787944117144233;

const NORM_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("distribution widths differ: {0} vs {1}")]
    WidthMismatch(usize, usize),
    #[error("distribution sums to {0}, not 1")]
    Unnormalized(f64),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("all x values are equal")]
    DegenerateX,
    #[error("bin edges must be strictly increasing with at least two entries")]
    InvalidBins,
    #[error("{axis} value {value} outside bin range [{lo}, {hi})")]
    OutOfBins {
        axis: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("tables use different bin edges")]
    BinMismatch,
    #[error("record {index}: {field} missing")]
    MissingFidelity { index: usize, field: &'static str },
    #[error("record {index}: {msg}")]
    InvalidRecord { index: usize, msg: String },
    #[error("row {row}: {msg}")]
    Csv { row: usize, msg: String },
    #[error("invalid timing table: {0}")]
    InvalidTiming(String),
    #[error("gate {0} is not native")]
    NonNative(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `(Σ √(p_i q_i))²`.
pub fn hellinger_fidelity(p: &Distribution, q: &Distribution) -> Result<f64, AnalysisError> {
    if p.width() != q.width() {
        return Err(AnalysisError::WidthMismatch(p.width(), q.width()));
    }
    for d in [p, q] {
        let t = d.total();
        if (t - 1.0).abs() > NORM_TOL {
            return Err(AnalysisError::Unnormalized(t));
        }
    }
    // iterate the smaller support
    let (small, large) = if p.support_len() <= q.support_len() {
        (p, q)
    } else {
        (q, p)
    };
    let bc: f64 = small
        .probs()
        .iter()
        .map(|(&i, &a)| (a * large.prob(i)).sqrt())
        .sum();
    Ok((bc * bc).clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub family: String,
    pub w_c: usize,
    pub d_c: usize,
    pub compiled_2q: f64,
    pub f_simple: f64,
    pub f_voted: f64,
    pub f_predicted: Option<f64>,
}

impl BenchmarkRecord {
    pub fn validate(&self, index: usize) -> Result<(), AnalysisError> {
        let bad = |msg: String| AnalysisError::InvalidRecord { index, msg };
        for (name, v) in [("f_simple", self.f_simple), ("f_voted", self.f_voted)]
            .into_iter()
            .chain(self.f_predicted.map(|v| ("f_predicted", v)))
        {
            if !(0.0..=1.0).contains(&v) {
                return Err(bad(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if !(self.compiled_2q >= 0.0) {
            return Err(bad(format!("compiled_2q = {}", self.compiled_2q)));
        }
        if self.family.is_empty() {
            return Err(bad("empty family".into()));
        }
        Ok(())
    }

    pub fn fidelity(&self, kind: FidelityKind) -> Option<f64> {
        match kind {
            FidelityKind::Simple => Some(self.f_simple),
            FidelityKind::Voted => Some(self.f_voted),
            FidelityKind::Predicted => self.f_predicted,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FidelityKind {
    Simple,
    Voted,
    Predicted,
}

impl FidelityKind {
    pub fn name(self) -> &'static str {
        match self {
            FidelityKind::Simple => "simple",
            FidelityKind::Voted => "voted",
            FidelityKind::Predicted => "predicted",
        }
    }
}

/// Largest `n` such that every record with `w_c ≤ n` and `d_c ≤ n²` has
/// fidelity above `threshold`; 0 if none.
///
/// The included set only grows with `n`, so the predicate is monotone and a
/// forward scan that stops at the first failure finds the largest `n`.
pub fn aq_score(records: &[BenchmarkRecord], use_voted: bool, threshold: f64) -> usize {
    let max_w = records.iter().map(|r| r.w_c).max().unwrap_or(0);
    let fid = |r: &BenchmarkRecord| if use_voted { r.f_voted } else { r.f_simple };
    let mut score = 0;
    for n in 1..=max_w {
        let ok = records
            .iter()
            .filter(|r| r.w_c <= n && r.d_c <= n * n)
            .all(|r| fid(r) > threshold);
        if !ok {
            break;
        }
        score = n;
    }
    score
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AqReport {
    pub score: usize,
    pub use_voted: bool,
    /// `(family, width)` cells up to the score that have no record.
    pub missing: Vec<(String, usize)>,
}

pub fn aq_report(records: &[BenchmarkRecord], use_voted: bool, threshold: f64) -> AqReport {
    let score = aq_score(records, use_voted, threshold);
    let mut widths: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
    for r in records {
        widths.entry(&r.family).or_default().insert(r.w_c);
    }
    let mut missing = Vec::new();
    for (fam, ws) in &widths {
        let lo = *ws.iter().next().unwrap();
        for w in lo..=score {
            if !ws.contains(&w) {
                missing.push((fam.to_string(), w));
            }
        }
    }
    if !missing.is_empty() {
        log::warn!(
            "#AQ {score} computed over a partial suite; {} (family, width) cells missing",
            missing.len()
        );
    }
    AqReport {
        score,
        use_voted,
        missing,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    Mean,
    Min,
}

/// Half-open bins `[edges[i], edges[i+1])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bins {
    pub edges: Vec<f64>,
}

impl Bins {
    pub fn new(edges: Vec<f64>) -> Result<Self, AnalysisError> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(AnalysisError::InvalidBins);
        }
        Ok(Self { edges })
    }

    /// `1, 2, 4, …, 2^k`.
    pub fn powers_of_two(k: u32) -> Self {
        Self {
            edges: (0..=k).map(|i| (1u64 << i) as f64).collect(),
        }
    }

    /// `0, 1, 2, 4, …, 2^k`, so zero-depth circuits have a home.
    pub fn powers_of_two_from_zero(k: u32) -> Self {
        let mut edges = vec![0.0];
        edges.extend((0..=k).map(|i| (1u64 << i) as f64));
        Self { edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn locate(&self, axis: &'static str, v: f64) -> Result<usize, AnalysisError> {
        let (lo, hi) = (self.edges[0], *self.edges.last().unwrap());
        if !(v >= lo && v < hi) {
            return Err(AnalysisError::OutOfBins {
                axis,
                value: v,
                lo,
                hi,
            });
        }
        Ok(self.edges.partition_point(|&e| e <= v) - 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub value: f64,
    pub count: usize,
}

/// Fidelity aggregated over (width, reference depth) bins. Empty bins are
/// absent rather than zero.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VolumetricTable {
    pub width_bins: Bins,
    pub depth_bins: Bins,
    pub cells: BTreeMap<(usize, usize), Cell>,
}

pub fn volumetric_table(
    records: &[BenchmarkRecord],
    width_bins: &Bins,
    depth_bins: &Bins,
    aggregate: Aggregate,
    kind: FidelityKind,
) -> Result<VolumetricTable, AnalysisError> {
    let mut groups: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for (index, r) in records.iter().enumerate() {
        let f = r.fidelity(kind).ok_or(AnalysisError::MissingFidelity {
            index,
            field: kind.name(),
        })?;
        let wi = width_bins.locate("width", r.w_c as f64)?;
        let di = depth_bins.locate("depth", r.d_c as f64)?;
        groups.entry((wi, di)).or_default().push(f);
    }
    let cells = groups
        .into_iter()
        .map(|(k, v)| {
            let value = match aggregate {
                Aggregate::Mean => v.iter().sum::<f64>() / v.len() as f64,
                Aggregate::Min => v.iter().copied().fold(f64::INFINITY, f64::min),
            };
            (
                k,
                Cell {
                    value,
                    count: v.len(),
                },
            )
        })
        .collect();
    Ok(VolumetricTable {
        width_bins: width_bins.clone(),
        depth_bins: depth_bins.clone(),
        cells,
    })
}

impl VolumetricTable {
    /// `self − other` on cells present in both.
    pub fn difference(&self, other: &VolumetricTable) -> Result<VolumetricTable, AnalysisError> {
        if self.width_bins != other.width_bins || self.depth_bins != other.depth_bins {
            return Err(AnalysisError::BinMismatch);
        }
        let cells = self
            .cells
            .iter()
            .filter_map(|(k, a)| {
                other.cells.get(k).map(|b| {
                    (
                        *k,
                        Cell {
                            value: a.value - b.value,
                            count: a.count.min(b.count),
                        },
                    )
                })
            })
            .collect();
        Ok(VolumetricTable {
            width_bins: self.width_bins.clone(),
            depth_bins: self.depth_bins.clone(),
            cells,
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), AnalysisError> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| AnalysisError::Io(e.into());
        w.write_record(["width_lo", "width_hi", "depth_lo", "depth_hi", "value", "count"])
            .map_err(io)?;
        for (&(wi, di), c) in &self.cells {
            let we = &self.width_bins.edges;
            let de = &self.depth_bins.edges;
            w.write_record([
                we[wi].to_string(),
                we[wi + 1].to_string(),
                de[di].to_string(),
                de[di + 1].to_string(),
                format!("{:.6}", c.value),
                c.count.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<BenchmarkRecord>, AnalysisError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<BenchmarkRecord>().enumerate() {
        // header is row 1
        let row_no = i + 2;
        let r = row.map_err(|e| AnalysisError::Csv {
            row: row_no,
            msg: e.to_string(),
        })?;
        r.validate(i).map_err(|e| AnalysisError::Csv {
            row: row_no,
            msg: e.to_string(),
        })?;
        out.push(r);
    }
    Ok(out)
}

pub fn write_records<W: Write>(records: &[BenchmarkRecord], out: W) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| AnalysisError::Io(e.into());
    w.write_record([
        "family",
        "w_c",
        "d_c",
        "compiled_2q",
        "f_simple",
        "f_voted",
        "f_predicted",
    ])
    .map_err(io)?;
    for r in records {
        w.write_record([
            r.family.clone(),
            r.w_c.to_string(),
            r.d_c.to_string(),
            format!("{}", r.compiled_2q),
            format!("{:.6}", r.f_simple),
            format!("{:.6}", r.f_voted),
            r.f_predicted.map(|v| format!("{v:.6}")).unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// `slope ± 2σ`.
    pub slope_interval: (f64, f64),
    pub no_correlation: bool,
}

/// Ordinary least squares with a 2σ slope interval.
pub fn linear_regression_with_ci(x: &[f64], y: &[f64]) -> Result<Regression, AnalysisError> {
    let n = x.len().min(y.len());
    if n < 3 || x.len() != y.len() {
        return Err(AnalysisError::TooFewPoints { needed: 3, got: n });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= f64::EPSILON * nf * mx.abs().max(1.0) {
        return Err(AnalysisError::DegenerateX);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let slope_stderr = (ssr / (nf - 2.0) / sxx).sqrt();
    let slope_interval = (slope - 2.0 * slope_stderr, slope + 2.0 * slope_stderr);
    Ok(Regression {
        slope,
        intercept,
        slope_stderr,
        slope_interval,
        no_correlation: slope_interval.0 <= 0.0 && 0.0 <= slope_interval.1,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecaySlope {
    /// Fitted `−ln F` per compiled two-qubit gate.
    pub rate: f64,
    pub used: usize,
    pub excluded: usize,
}

/// Least-squares fit of `−ln F = rate · n₂` through the origin over
/// `(compiled 2Q count, fidelity)` points. Points with `F ≤ 0` are dropped.
pub fn decay_slope(points: &[(f64, f64)]) -> Result<DecaySlope, AnalysisError> {
    if points.len() < 3 {
        return Err(AnalysisError::TooFewPoints {
            needed: 3,
            got: points.len(),
        });
    }
    let (mut sxy, mut sxx, mut used) = (0.0, 0.0, 0);
    for &(n2, f) in points {
        if !(f > 0.0) {
            continue;
        }
        sxy += n2 * -f.ln();
        sxx += n2 * n2;
        used += 1;
    }
    let excluded = points.len() - used;
    if excluded > 0 {
        log::warn!("decay slope: {excluded} record(s) with F <= 0 excluded");
    }
    if used < 3 {
        return Err(AnalysisError::TooFewPoints {
            needed: 3,
            got: used,
        });
    }
    if sxx == 0.0 {
        return Err(AnalysisError::DegenerateX);
    }
    Ok(DecaySlope {
        rate: sxy / sxx,
        used,
        excluded,
    })
}

/// Gate and overhead durations in microseconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingTable {
    pub sq_gate_us: f64,
    pub zz_us: f64,
    /// Per-pair overrides, keyed by the sorted pair.
    pub zz_pair_us: BTreeMap<String, f64>,
    pub cooling_us: f64,
    pub prep_us: f64,
    pub readout_us: f64,
    /// Switching gap charged after every physical gate.
    pub padding_us: f64,
}

impl Default for TimingTable {
    fn default() -> Self {
        Self {
            sq_gate_us: 110.0,
            zz_us: 900.0,
            zz_pair_us: BTreeMap::new(),
            cooling_us: 3000.0,
            prep_us: 50.0,
            readout_us: 300.0,
            padding_us: 10.0,
        }
    }
}

pub fn pair_key(a: usize, b: usize) -> String {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    format!("{lo}-{hi}")
}

impl TimingTable {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let named = [
            ("sq_gate_us", self.sq_gate_us),
            ("zz_us", self.zz_us),
            ("cooling_us", self.cooling_us),
            ("prep_us", self.prep_us),
            ("readout_us", self.readout_us),
            ("padding_us", self.padding_us),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(AnalysisError::InvalidTiming(format!("{name} = {v}")));
            }
        }
        for (k, &v) in &self.zz_pair_us {
            if !(v > 0.0 && v.is_finite()) {
                return Err(AnalysisError::InvalidTiming(format!("zz_pair_us[{k}] = {v}")));
            }
        }
        Ok(())
    }

    pub fn zz_duration(&self, a: usize, b: usize) -> f64 {
        self.zz_pair_us
            .get(&pair_key(a, b))
            .copied()
            .unwrap_or(self.zz_us)
    }

    /// Per-shot overhead outside the circuit body.
    pub fn shot_overhead(&self) -> f64 {
        self.cooling_us + self.prep_us + self.readout_us
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExecutionEstimate {
    pub total_us: f64,
    pub gate_us: f64,
    pub padding_us: f64,
    pub gate_time_fraction: f64,
}

/// `RZ` is a frame update and costs nothing; every other native gate is
/// charged its duration plus one padding interval.
pub fn estimate_execution(
    circuit: &Circuit,
    timing: &TimingTable,
    n_shots: u64,
) -> Result<ExecutionEstimate, AnalysisError> {
    let (mut gate, mut pad) = (0.0, 0.0);
    for g in circuit.gates() {
        let d = match g.kind() {
            GateKind::Rz(_) => continue,
            GateKind::X90 | GateKind::Y90 => timing.sq_gate_us,
            GateKind::Zz(_) | GateKind::Xx(_) => timing.zz_duration(g.qubits()[0], g.qubits()[1]),
            _ => return Err(AnalysisError::NonNative(g.to_string())),
        };
        gate += d;
        pad += timing.padding_us;
    }
    let shots = n_shots as f64;
    let total_us = shots * (timing.shot_overhead() + gate + pad);
    let gate_us = shots * gate;
    Ok(ExecutionEstimate {
        total_us,
        gate_us,
        padding_us: shots * pad,
        gate_time_fraction: if total_us > 0.0 { gate_us / total_us } else { 0.0 },
    })
}
