//! Application-benchmark generators (QFT, phase estimation, transverse-field
//! Ising Trotter circuits) and ingestion of externally generated instances.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, Gate};
use crate::compiler::reference_dims;
use crate::outcome::{Distribution, OutcomeError};
use crate::rng::SeedStream;
use crate::simulator::{ideal_distribution, SimError};

/// Largest width accepted by the QFT generator.
pub const QFT_MAX_WIDTH: usize = 24;

pub const CONCENTRATED_PEAK: f64 = 0.9;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{family} width {width} outside [{min}, {max}]")]
    WidthOutOfRange {
        family: Family,
        width: usize,
        min: usize,
        max: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("circuit width {circuit} does not match distribution width {distribution}")]
    WidthMismatch { circuit: usize, distribution: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Outcome(#[from] OutcomeError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    Qft,
    PhaseEstimation,
    HamiltonianSimulation,
    Ingested,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Qft => "qft",
            Family::PhaseEstimation => "phase_estimation",
            Family::HamiltonianSimulation => "hamiltonian_simulation",
            Family::Ingested => "ingested",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IdealSource {
    Exact,
    File,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApplicationInstance {
    pub family: Family,
    pub width: usize,
    pub params: BTreeMap<String, f64>,
    pub reference: Circuit,
    pub ideal: Distribution,
    pub ideal_source: IdealSource,
}

impl ApplicationInstance {
    fn generated(
        family: Family,
        reference: Circuit,
        params: BTreeMap<String, f64>,
    ) -> Result<Self, AppError> {
        let ideal = ideal_distribution(&reference)?;
        Ok(Self {
            family,
            width: reference.width(),
            params,
            reference,
            ideal,
            ideal_source: IdealSource::Exact,
        })
    }

    /// `(w_c, d_c)` of the reference circuit.
    pub fn dims(&self) -> (usize, usize) {
        reference_dims(&self.reference)
    }

    /// Largest ideal outcome probability.
    pub fn peak_probability(&self) -> f64 {
        self.ideal.mode().map_or(0.0, |(_, p)| p)
    }

    /// Ideal output dominated by one bitstring (peak ≥ [`CONCENTRATED_PEAK`]).
    pub fn is_concentrated(&self) -> bool {
        self.peak_probability() >= CONCENTRATED_PEAK
    }

    /// Short stable identifier such as `qft-w5`.
    pub fn label(&self) -> String {
        let mut s = format!("{}-w{}", self.family, self.width);
        for (k, v) in &self.params {
            s.push_str(&format!("-{k}{v}"));
        }
        s
    }
}

fn check_width(family: Family, width: usize, min: usize, max: usize) -> Result<(), AppError> {
    if width < min || width > max {
        return Err(AppError::WidthOutOfRange {
            family,
            width,
            min,
            max,
        });
    }
    Ok(())
}

fn not_gate(q: usize) -> [Gate; 2] {
    [Gate::x90(q), Gate::x90(q)]
}

/// QFT without the final swaps: qubit 0 acts as the most significant bit of the
/// input register and ends up carrying the finest phase.
fn qft_gates(qubits: &[usize]) -> Vec<Gate> {
    let mut out = Vec::new();
    for (j, &a) in qubits.iter().enumerate() {
        out.push(Gate::h(a));
        for (k, &b) in qubits.iter().enumerate().skip(j + 1) {
            out.push(Gate::cphase(a, b, PI / (1u64 << (k - j)) as f64));
        }
    }
    out
}

fn inverse_qft_gates(qubits: &[usize]) -> Vec<Gate> {
    qft_gates(qubits)
        .into_iter()
        .rev()
        .map(|g| match g.kind() {
            crate::circuit::GateKind::Cphase(t) => Gate::cphase(g.qubits()[0], g.qubits()[1], -t),
            _ => g,
        })
        .collect()
}

/// Quantum Fourier transform of the basis state `input` (bit `q` = qubit `q`).
///
/// With `round_trip` each output qubit is rotated back by its known phase and
/// returned to the computational basis, so the ideal output is `input` itself.
/// Either way the reference holds `width·(width−1)/2` controlled phases.
pub fn gen_qft(width: usize, input: u64, round_trip: bool) -> Result<ApplicationInstance, AppError> {
    check_width(Family::Qft, width, 1, QFT_MAX_WIDTH)?;
    if input >> width != 0 {
        return Err(AppError::InvalidParameter(format!(
            "input {input} does not fit in {width} qubits"
        )));
    }
    let bits: Vec<u64> = (0..width).map(|q| input >> q & 1).collect();
    let mut c = Circuit::new(width);
    for q in 0..width {
        if bits[q] == 1 {
            c.extend(not_gate(q))?;
        }
    }
    c.barrier();
    let qubits: Vec<usize> = (0..width).collect();
    c.extend(qft_gates(&qubits))?;
    if round_trip {
        c.barrier();
        for j in 0..width {
            // qubit j carries 2π·0.x_j x_{j+1}…; strip everything past x_j
            let rest: f64 = (j + 1..width)
                .map(|k| bits[k] as f64 / (1u64 << (k - j + 1)) as f64)
                .sum();
            c.push(Gate::rz(j, -2.0 * PI * rest))?;
            c.push(Gate::h(j))?;
        }
    }
    let params = BTreeMap::from([
        ("input".to_string(), input as f64),
        ("round_trip".to_string(), if round_trip { 1.0 } else { 0.0 }),
    ]);
    ApplicationInstance::generated(Family::Qft, c, params)
}

/// Phase estimation of `RZ`-type phase `e^{2πi·hidden_phase}` on `|1⟩`.
///
/// Counting qubits are `0..width−1` with qubit 0 the most significant bit of
/// the estimate; the eigenstate qubit is `width−1`.
pub fn gen_phase_estimation(width: usize, hidden_phase: f64) -> Result<ApplicationInstance, AppError> {
    check_width(Family::PhaseEstimation, width, 2, QFT_MAX_WIDTH)?;
    if !hidden_phase.is_finite() {
        return Err(AppError::InvalidParameter("hidden phase must be finite".into()));
    }
    let counting: Vec<usize> = (0..width - 1).collect();
    let eigen = width - 1;
    let mut c = Circuit::new(width);
    c.extend(not_gate(eigen))?;
    for &q in &counting {
        c.push(Gate::h(q))?;
    }
    for &q in &counting {
        let angle = 2.0 * PI * (hidden_phase * (1u64 << q) as f64).rem_euclid(1.0);
        c.push(Gate::cphase(q, eigen, angle))?;
    }
    c.barrier();
    c.extend(inverse_qft_gates(&counting))?;
    let params = BTreeMap::from([("phase".to_string(), hidden_phase)]);
    ApplicationInstance::generated(Family::PhaseEstimation, c, params)
}

/// `exp(−iαX)` from π/2 pulses: `Y90⁻¹ · RZ(2α) · Y90` in time order.
fn x_rotation(q: usize, alpha: f64) -> [Gate; 5] {
    [
        Gate::rz(q, -PI),
        Gate::y90(q),
        Gate::rz(q, PI),
        Gate::rz(q, 2.0 * alpha),
        Gate::y90(q),
    ]
}

/// First-order Trotter evolution of the open chain
/// `H = J Σ Z_i Z_{i+1} + h Σ X_i` from `|0…0⟩`: each step applies
/// `ZZ(J·dt)` on neighbours and then `exp(−i h dt X)` on every qubit.
pub fn gen_hamiltonian_sim(
    width: usize,
    trotter_steps: usize,
    coupling: f64,
    field: f64,
    dt: f64,
) -> Result<ApplicationInstance, AppError> {
    check_width(Family::HamiltonianSimulation, width, 2, QFT_MAX_WIDTH)?;
    if ![coupling, field, dt].iter().all(|x| x.is_finite()) {
        return Err(AppError::InvalidParameter("coupling, field and dt must be finite".into()));
    }
    let mut c = Circuit::new(width);
    for _ in 0..trotter_steps {
        for q in 0..width - 1 {
            c.push(Gate::zz(q, q + 1, coupling * dt))?;
        }
        for q in 0..width {
            c.extend(x_rotation(q, field * dt))?;
        }
        c.barrier();
    }
    let params = BTreeMap::from([
        ("steps".to_string(), trotter_steps as f64),
        ("coupling".to_string(), coupling),
        ("field".to_string(), field),
        ("dt".to_string(), dt),
    ]);
    ApplicationInstance::generated(Family::HamiltonianSimulation, c, params)
}

/// Instance from a circuit JSON document and an ideal-distribution JSON document.
pub fn ingest_instance_str(circuit_json: &str, ideal_json: &str) -> Result<ApplicationInstance, AppError> {
    let reference = Circuit::from_json_str(circuit_json)?;
    let ideal = Distribution::from_json(ideal_json)?;
    if ideal.width() != reference.width() {
        return Err(AppError::WidthMismatch {
            circuit: reference.width(),
            distribution: ideal.width(),
        });
    }
    Ok(ApplicationInstance {
        family: Family::Ingested,
        width: reference.width(),
        params: BTreeMap::new(),
        reference,
        ideal,
        ideal_source: IdealSource::File,
    })
}

fn read(path: &Path) -> Result<String, AppError> {
    std::fs::read_to_string(path).map_err(|source| AppError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn ingest_instance(circuit_file: &Path, ideal_file: &Path) -> Result<ApplicationInstance, AppError> {
    ingest_instance_str(&read(circuit_file)?, &read(ideal_file)?)
}

/// Parameters of the built-in desk-scale suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    pub min_width: usize,
    pub max_width: usize,
    pub families: Vec<Family>,
    pub trotter_steps: usize,
    pub coupling: f64,
    pub field: f64,
    pub dt: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            min_width: 4,
            max_width: 10,
            families: vec![Family::Qft, Family::PhaseEstimation, Family::HamiltonianSimulation],
            trotter_steps: 3,
            coupling: 1.0,
            field: 0.1,
            dt: 0.2,
        }
    }
}

/// One instance per (family, width). QFT inputs and QPE phases are drawn from
/// `seed`; phases are exact binary fractions so QPE outputs are deterministic.
pub fn desk_suite(config: &SuiteConfig, seed: u64) -> Result<Vec<ApplicationInstance>, AppError> {
    let stream = SeedStream::new(seed, "suite");
    let mut out = Vec::new();
    for &family in &config.families {
        for w in config.min_width..=config.max_width {
            let mut rng = stream.child(family.name(), w as u64).rng(0);
            let inst = match family {
                Family::Qft => gen_qft(w, rng.random_range(0..1u64 << w), true)?,
                Family::PhaseEstimation => {
                    let bits = w - 1;
                    let k = rng.random_range(0..1u64 << bits);
                    gen_phase_estimation(w, k as f64 / (1u64 << bits) as f64)?
                }
                Family::HamiltonianSimulation => gen_hamiltonian_sim(
                    w,
                    config.trotter_steps,
                    config.coupling,
                    config.field,
                    config.dt,
                )?,
                Family::Ingested => {
                    return Err(AppError::InvalidParameter(
                        "ingested instances are loaded from files, not generated".into(),
                    ))
                }
            };
            out.push(inst);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{two_qubit_gate_count, unitary};
    use crate::outcome::bits_to_index;

    #[test]
    fn qft_dims_and_single_qubit_case() {
        let one = gen_qft(1, 0, false).unwrap();
        assert_eq!(one.reference.gate_count(), 1);
        assert!((one.ideal.prob(0) - 0.5).abs() < 1e-12);
        assert!((one.ideal.prob(1) - 0.5).abs() < 1e-12);
        for w in 1..=8 {
            assert_eq!(gen_qft(w, 0, true).unwrap().dims(), (w, w * (w - 1) / 2));
        }
        assert!(gen_qft(0, 0, false).is_err());
        assert!(gen_qft(25, 0, false).is_err());
    }

    #[test]
    fn qft_round_trip_returns_input() {
        let inst = gen_qft(3, 0b101, true).unwrap();
        assert!((inst.ideal.prob(0b101) - 1.0).abs() < 1e-12);
        for x in 0..32 {
            let inst = gen_qft(5, x, true).unwrap();
            assert!((inst.ideal.prob(x) - 1.0).abs() < 1e-9, "input {x}");
        }
    }

    #[test]
    fn qft_matches_fourier_matrix() {
        // without swaps, output qubit j holds phase 2π·X·2^j/N where X reads the
        // input with qubit 0 as most significant bit
        let n = 3;
        let c = gen_qft(n, 0, false).unwrap().reference;
        let u = unitary(&crate::compiler::decompose_to_native(&c).unwrap()).unwrap();
        let dim = 1usize << n;
        let msb = |i: usize| (0..n).fold(0, |acc, q| acc << 1 | (i >> q & 1));
        for x in 0..dim {
            let col: Vec<_> = (0..dim).map(|i| u[(i, x)]).collect();
            let phase = col[0] / col[0].norm();
            for (i, a) in col.iter().enumerate() {
                let want = num_complex::Complex64::from_polar(
                    1.0 / (dim as f64).sqrt(),
                    2.0 * PI * (msb(x) * i) as f64 / dim as f64,
                ) * phase;
                assert!((a - want).norm() < 1e-10, "x = {x}, i = {i}");
            }
        }
    }

    #[test]
    fn phase_estimation_examples() {
        let zero = gen_phase_estimation(4, 0.0).unwrap();
        let m = zero.ideal.marginal(&[0, 1, 2]);
        assert!((m.prob(0) - 1.0).abs() < 1e-12);

        let half = gen_phase_estimation(3, 0.5).unwrap();
        let m = half.ideal.marginal(&[0, 1]);
        assert!((m.prob(bits_to_index("10", 2).unwrap()) - 1.0).abs() < 1e-12);

        let third = gen_phase_estimation(4, 1.0 / 3.0).unwrap();
        let m = third.ideal.marginal(&[0, 1, 2]);
        let (mode, p) = m.mode().unwrap();
        assert_eq!(mode, bits_to_index("011", 3).unwrap());
        assert!(p > 0.5);
        let runner_up = m.prob(bits_to_index("010", 3).unwrap());
        assert!(runner_up > 0.1);
        assert!(m.probs().iter().all(|(&k, &q)| k == mode || q <= runner_up + 1e-12));
    }

    #[test]
    fn phase_estimation_exact_fractions_are_deterministic() {
        for k in 0..16u64 {
            let inst = gen_phase_estimation(5, k as f64 / 16.0).unwrap();
            assert!(inst.peak_probability() > 1.0 - 1e-9, "k = {k}");
        }
        assert_eq!(gen_phase_estimation(5, 0.25).unwrap().dims().1, 4 + 6);
    }

    #[test]
    fn hamiltonian_sim_examples() {
        let idle = gen_hamiltonian_sim(4, 0, 1.0, 1.0, 0.2).unwrap();
        assert_eq!(idle.reference.gate_count(), 0);
        assert!((idle.ideal.prob(0) - 1.0).abs() < 1e-15);
        let inst = gen_hamiltonian_sim(4, 3, 1.0, 1.0, 0.2).unwrap();
        assert_eq!(two_qubit_gate_count(&inst.reference), 9);
        assert!(gen_hamiltonian_sim(1, 1, 1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn x_rotation_is_exp_minus_i_alpha_x() {
        let alpha = 0.37;
        let c = Circuit::from_gates(1, x_rotation(0, alpha)).unwrap();
        let u = unitary(&c).unwrap();
        let (cs, sn) = (alpha.cos(), alpha.sin());
        let i = num_complex::Complex64::i();
        let want = crate::linalg::CMatrix::from_rows(&[
            &[cs.into(), -i * sn],
            &[-i * sn, cs.into()],
        ]);
        assert!(u.approx_eq_up_to_phase(&want, 1e-12));
    }

    #[test]
    fn ingestion_errors() {
        let circuit = r#"{"width": 2, "ops": [["h", [0]], ["cnot", [0, 1]]]}"#;
        let good = r#"{"width": 2, "probs": {"00": 0.5, "11": 0.5}}"#;
        let inst = ingest_instance_str(circuit, good).unwrap();
        assert_eq!(inst.family, Family::Ingested);
        assert_eq!(inst.dims(), (2, 1));
        let short = r#"{"width": 2, "probs": {"00": 0.5, "11": 0.3}}"#;
        assert!(matches!(ingest_instance_str(circuit, short), Err(AppError::Outcome(_))));
        let wrong_len = r#"{"width": 2, "probs": {"000": 1.0}}"#;
        assert!(ingest_instance_str(circuit, wrong_len).is_err());
        let other_width = r#"{"width": 3, "probs": {"000": 1.0}}"#;
        assert!(matches!(
            ingest_instance_str(circuit, other_width),
            Err(AppError::WidthMismatch { .. })
        ));
    }

    #[test]
    fn suite_is_deterministic() {
        let cfg = SuiteConfig {
            max_width: 6,
            ..SuiteConfig::default()
        };
        let a = desk_suite(&cfg, 5).unwrap();
        let b = desk_suite(&cfg, 5).unwrap();
        assert_eq!(a.len(), 9);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.reference.to_canonical_string(), y.reference.to_canonical_string());
        }
    }
}
