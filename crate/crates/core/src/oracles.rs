//! Brute-force references. Nothing here shares numerics with the main path
//! beyond the local gate unitaries in [`Gate::matrix`]; agreement between the
//! two is the evidence the tests and `--self-check` rely on.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::circuit::{Circuit, Gate};
use crate::clifford::{one_qubit_cliffords, two_qubit_cliffords, Tableau};
use crate::rng::SeedStream;
use crate::simulator::GateNoise;

pub const SUBSET_MAX_VARIANTS: usize = 12;
pub const CHANNEL_MAX_QUBITS: usize = 3;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{what} {got} exceeds oracle guard {limit}")]
    TooLarge {
        what: &'static str,
        got: usize,
        limit: usize,
    },
    #[error("gate {0} does not fit the register")]
    BadGate(String),
    #[error("{0}")]
    Other(String),
}

/// `Σ_{S ⊆ [N_v], |S| = m} Π_{v∈S} f_v Π_{v∉S} (1 − f_v)`, evaluated literally.
pub fn subset_enumeration_pmf(freqs: &[f64], m: usize) -> Result<f64, OracleError> {
    let n = freqs.len();
    if n > SUBSET_MAX_VARIANTS {
        return Err(OracleError::TooLarge {
            what: "variant count",
            got: n,
            limit: SUBSET_MAX_VARIANTS,
        });
    }
    let mut total = 0.0;
    for mask in 0u32..1 << n {
        if mask.count_ones() as usize != m {
            continue;
        }
        let mut p = 1.0;
        for (v, &f) in freqs.iter().enumerate() {
            p *= if mask >> v & 1 == 1 { f } else { 1.0 - f };
        }
        total += p;
    }
    Ok(total)
}

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Dense row-major operator on `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub n: usize,
    pub data: Vec<C>,
}

impl Dense {
    fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn identity(n: usize) -> Self {
        let d = 1 << n;
        let mut data = vec![ZERO; d * d];
        for i in 0..d {
            data[i * d + i] = ONE;
        }
        Self { n, data }
    }

    /// `|0…0⟩⟨0…0|`.
    pub fn ground(n: usize) -> Self {
        let d = 1 << n;
        let mut data = vec![ZERO; d * d];
        data[0] = ONE;
        Self { n, data }
    }

    pub fn at(&self, r: usize, c: usize) -> C {
        self.data[r * self.dim() + c]
    }

    pub fn mul(&self, o: &Dense) -> Dense {
        let d = self.dim();
        let mut data = vec![ZERO; d * d];
        for r in 0..d {
            for k in 0..d {
                let a = self.data[r * d + k];
                if a == ZERO {
                    continue;
                }
                for c in 0..d {
                    data[r * d + c] += a * o.data[k * d + c];
                }
            }
        }
        Dense { n: self.n, data }
    }

    pub fn adjoint(&self) -> Dense {
        let d = self.dim();
        let mut data = vec![ZERO; d * d];
        for r in 0..d {
            for c in 0..d {
                data[c * d + r] = self.data[r * d + c].conj();
            }
        }
        Dense { n: self.n, data }
    }

    pub fn trace(&self) -> C {
        (0..self.dim()).map(|i| self.at(i, i)).sum()
    }

    /// Distance to `other` after removing the best global phase.
    pub fn phase_distance(&self, other: &Dense) -> f64 {
        let overlap: C = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum();
        let phase = if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            ONE
        };
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a * phase - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Gate embedded into the full `n`-qubit space.
fn embed(n: usize, local: &[C], dim_local: usize, qubits: &[usize]) -> Dense {
    let d = 1usize << n;
    let mask: usize = qubits.iter().map(|q| 1 << q).sum();
    let sub = |i: usize| -> usize {
        qubits
            .iter()
            .enumerate()
            .map(|(j, &q)| (i >> q & 1) << j)
            .sum()
    };
    let mut data = vec![ZERO; d * d];
    for r in 0..d {
        for c in 0..d {
            if r & !mask == c & !mask {
                data[r * d + c] = local[sub(r) * dim_local + sub(c)];
            }
        }
    }
    Dense { n, data }
}

pub fn gate_operator(n: usize, gate: &Gate) -> Result<Dense, OracleError> {
    if gate.qubits().iter().any(|&q| q >= n) {
        return Err(OracleError::BadGate(gate.to_string()));
    }
    let m = gate.matrix();
    Ok(embed(n, m.as_slice(), m.dim(), gate.qubits()))
}

fn pauli_local(kind: u8) -> [C; 4] {
    let i = C::new(0.0, 1.0);
    match kind {
        0 => [ONE, ZERO, ZERO, ONE],
        1 => [ZERO, ONE, ONE, ZERO],
        2 => [ZERO, -i, i, ZERO],
        _ => [ONE, ZERO, ZERO, -ONE],
    }
}

/// Pauli string on `qubits`, one base-4 digit per qubit.
fn pauli_operator(n: usize, qubits: &[usize], code: usize) -> Dense {
    let mut op = Dense::identity(n);
    for (j, &q) in qubits.iter().enumerate() {
        let p = pauli_local((code >> (2 * j) & 3) as u8);
        op = embed(n, &p, 2, &[q]).mul(&op);
    }
    op
}

/// `ρ ↦ (1−ε) UρU† + ε/(4^k−1) Σ_{P≠I} P UρU† P`, summed branch by branch.
pub fn density_channel_step(rho: &Dense, gate: &Gate, eps: f64) -> Result<Dense, OracleError> {
    let n = rho.n;
    if n > CHANNEL_MAX_QUBITS {
        return Err(OracleError::TooLarge {
            what: "qubit count",
            got: n,
            limit: CHANNEL_MAX_QUBITS,
        });
    }
    let u = gate_operator(n, gate)?;
    let evolved = u.mul(rho).mul(&u.adjoint());
    if eps == 0.0 {
        return Ok(evolved);
    }
    let k = gate.arity();
    let terms = (1usize << (2 * k)) - 1;
    let mut out: Vec<C> = evolved.data.iter().map(|v| v * (1.0 - eps)).collect();
    for code in 1..=terms {
        let p = pauli_operator(n, gate.qubits(), code);
        let branch = p.mul(&evolved).mul(&p);
        for (o, b) in out.iter_mut().zip(&branch.data) {
            *o += b * (eps / terms as f64);
        }
    }
    Ok(Dense { n, data: out })
}

/// Outcome probabilities of `circuit` under `noise`, readout flips included.
pub fn channel_distribution<N: GateNoise + ?Sized>(
    circuit: &Circuit,
    noise: &N,
) -> Result<Vec<f64>, OracleError> {
    let n = circuit.width();
    let mut rho = Dense::ground(n);
    for (i, g) in circuit.gates().enumerate() {
        rho = density_channel_step(&rho, g, noise.gate_error(i, g))?;
    }
    let d = 1usize << n;
    let diag: Vec<f64> = (0..d).map(|i| rho.at(i, i).re).collect();
    // classical flip channel, outcome by outcome
    let mut probs = vec![0.0; d];
    for (true_out, &p) in diag.iter().enumerate() {
        for seen in 0..d {
            let mut w = p;
            for q in 0..n {
                let f = noise.readout_flip(q);
                w *= if (true_out ^ seen) >> q & 1 == 1 { f } else { 1.0 - f };
            }
            probs[seen] += w;
        }
    }
    Ok(probs)
}

fn circuit_operator(n: usize, gates: &[Gate]) -> Result<Dense, OracleError> {
    gates
        .iter()
        .try_fold(Dense::identity(n), |acc, g| Ok(gate_operator(n, g)?.mul(&acc)))
}

/// The 24 single-qubit Cliffords found by breadth-first search over
/// `{X90, Y90, RZ(π/2)}` unitaries.
#[derive(Clone, Debug)]
pub struct CliffordTables {
    pub words: Vec<Vec<Gate>>,
    pub unitaries: Vec<Dense>,
}

const TABLE_TOL: f64 = 1e-9;

impl CliffordTables {
    pub fn find(&self, u: &Dense) -> Option<usize> {
        self.unitaries
            .iter()
            .position(|v| v.phase_distance(u) < TABLE_TOL)
    }

    /// Every product of two entries is an entry.
    pub fn is_closed(&self) -> bool {
        self.unitaries
            .iter()
            .all(|a| self.unitaries.iter().all(|b| self.find(&a.mul(b)).is_some()))
    }
}

pub fn clifford_tables() -> CliffordTables {
    let gens = [Gate::x90(0), Gate::y90(0), Gate::rz(0, FRAC_PI_2)];
    let mut t = CliffordTables {
        words: vec![vec![]],
        unitaries: vec![Dense::identity(1)],
    };
    let mut frontier = 0;
    while frontier < t.words.len() {
        for g in &gens {
            let u = gate_operator(1, g).expect("1q").mul(&t.unitaries[frontier]);
            if t.find(&u).is_none() {
                let mut w = t.words[frontier].clone();
                w.push(*g);
                t.words.push(w);
                t.unitaries.push(u);
            }
        }
        frontier += 1;
    }
    t
}

/// Residual of `inverse · circuit` from the identity, up to phase.
pub fn inverse_residual(n: usize, circuit: &[Gate], inverse: &[Gate]) -> Result<f64, OracleError> {
    let all: Vec<Gate> = circuit.iter().chain(inverse).cloned().collect();
    Ok(circuit_operator(n, &all)?.phase_distance(&Dense::identity(n)))
}

/// Random two-qubit Clifford circuits in the DRB gate set.
pub fn random_two_qubit_clifford(rng: &mut impl Rng, layers: usize) -> Vec<Gate> {
    let mut gates = Vec::new();
    for _ in 0..layers {
        match rng.random_range(0..4) {
            0 => gates.push(Gate::xx(0, 1, std::f64::consts::FRAC_PI_4)),
            1 => gates.push(Gate::x90(rng.random_range(0..2))),
            2 => gates.push(Gate::y90(rng.random_range(0..2))),
            _ => gates.push(Gate::rz(rng.random_range(0..2), FRAC_PI_2)),
        }
    }
    gates
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SelfCheckReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl SelfCheckReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// Runs every oracle against the main path.
pub fn self_check(seed: u64) -> SelfCheckReport {
    let root = SeedStream::new(seed, "self-check");
    let mut checks = Vec::new();

    // Poisson-binomial DP against subset enumeration
    let mut rng = root.rng(0);
    let mut worst = 0.0f64;
    for nv in 1..=SUBSET_MAX_VARIANTS {
        for _ in 0..5 {
            let f: Vec<f64> = (0..nv).map(|_| rng.random::<f64>()).collect();
            let dp = crate::mitigation::poisson_binomial(&f);
            for (m, &v) in dp.iter().enumerate() {
                let o = subset_enumeration_pmf(&f, m).expect("guarded");
                worst = worst.max((o - v).abs());
            }
        }
    }
    checks.push(check(
        "poisson_binomial_vs_subsets",
        worst <= 1e-12,
        format!("max abs diff {worst:.3e}"),
    ));

    // depolarizing example: fully mixed single qubit
    let mut r = Dense::ground(1);
    r = density_channel_step(&r, &Gate::rz(0, 0.0), 1.0).expect("1q");
    let ok = (r.at(0, 0).re - 1.0 / 3.0).abs() < 1e-14 && (r.at(1, 1).re - 2.0 / 3.0).abs() < 1e-14;
    checks.push(check(
        "full_depolarization_ground_state",
        ok,
        format!("diag = ({:.6}, {:.6})", r.at(0, 0).re, r.at(1, 1).re),
    ));

    // density oracle against the simulator's channel
    let mut rng = root.rng(1);
    let mut worst = 0.0f64;
    for k in 0..20 {
        let n = 1 + k % 2;
        let gates = random_native_circuit(&mut rng, n, 8);
        let c = Circuit::from_gates(n, gates).expect("valid");
        let noise = crate::simulator::NoiseModel::uniform(
            rng.random_range(0.0..0.3),
            rng.random_range(0.0..0.3),
            rng.random_range(0.0..0.1),
        );
        let o = channel_distribution(&c, &noise).expect("small");
        match crate::simulator::exact_channel(&c, &noise) {
            Ok(d) => {
                for (i, p) in o.iter().enumerate() {
                    worst = worst.max((d.prob(i as u64) - p).abs());
                }
            }
            Err(_) => worst = f64::INFINITY,
        }
    }
    checks.push(check(
        "density_oracle_vs_exact_channel",
        worst < 1e-10,
        format!("max abs diff {worst:.3e}"),
    ));

    // single-qubit Clifford table
    let t = clifford_tables();
    let main = one_qubit_cliffords();
    let mut seen = vec![false; t.words.len()];
    let mut matched = true;
    for i in 0..main.len() {
        let u = circuit_operator(1, &main.gates(i, 0)).expect("1q");
        match t.find(&u) {
            Some(j) if !seen[j] => seen[j] = true,
            _ => matched = false,
        }
    }
    checks.push(check(
        "one_qubit_clifford_table",
        t.words.len() == 24 && t.words[0].is_empty() && t.is_closed() && main.len() == 24 && matched,
        format!("oracle {} elements, main path {}", t.words.len(), main.len()),
    ));

    // two-qubit inverse synthesis
    let mut rng = root.rng(2);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..1000 {
        let layers = rng.random_range(1..12);
        let gates = random_two_qubit_clifford(&mut rng, layers);
        let c = Circuit::from_gates(2, gates.clone()).expect("valid");
        let inv = Tableau::from_circuit(&c)
            .ok()
            .and_then(|tab| two_qubit_cliffords().inverse_of(&tab).ok().map(|w| w.gates(0, 1)));
        match inv {
            Some(inv) => worst = worst.max(inverse_residual(2, &gates, &inv).expect("2q")),
            None => failures += 1,
        }
    }
    checks.push(check(
        "two_qubit_inverse_synthesis",
        failures == 0 && worst < 1e-10,
        format!("1000 random tableaus, {failures} lookup failures, max residual {worst:.3e}"),
    ));

    SelfCheckReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

/// Random native circuit on `n ≤ 2` qubits.
pub fn random_native_circuit(rng: &mut impl Rng, n: usize, len: usize) -> Vec<Gate> {
    (0..len)
        .map(|_| {
            let q = rng.random_range(0..n);
            match rng.random_range(0..if n > 1 { 5 } else { 3 }) {
                0 => Gate::x90(q),
                1 => Gate::y90(q),
                2 => Gate::rz(q, rng.random_range(-3.0..3.0)),
                3 => Gate::zz(0, 1, rng.random_range(-1.5..1.5)),
                _ => Gate::xx(1, 0, rng.random_range(-1.5..1.5)),
            }
        })
        .collect()
}
