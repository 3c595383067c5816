//! Noisy and noiseless simulation of native circuits.
//!
//! Noisy runs unravel the depolarizing channel into Pauli trajectories: after
//! every physical gate a non-identity Pauli on the gate's support is inserted
//! with the gate's error probability. Shots that draw the same error pattern
//! share one state-vector evolution, and patterns sharing an error-free prefix
//! share that prefix.

mod density;
mod noise;
mod state;

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError};
use crate::compiler::{decompose_to_native, CompileError};
use crate::outcome::{Distribution, Histogram};
use crate::par;
use crate::rng::SeedStream;

pub use density::DensityMatrix;
pub use noise::{GateNoise, NoiseModel, DEVICE_SPAM, MEDIAN_EPS_1Q, MEDIAN_EPS_2Q};
pub use state::StateVector;
use state::Kernel;

/// Widths above this are refused unless the limit is raised.
pub const DEFAULT_MAX_WIDTH: usize = 26;
/// Width guard of the density-matrix channel.
pub const EXACT_MAX_WIDTH: usize = 6;
/// Ideal probabilities below this are dropped.
pub const PRUNE_BELOW: f64 = 1e-15;

// Above this width only one full state (plus a prefix copy) is alive at a time.
const PARALLEL_STATE_WIDTH: usize = 22;
const TILE_PARALLEL_MIN_WIDTH: usize = 16;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("rate {0} is outside [0, 1]")]
    InvalidRate(f64),
    #[error("noise model: {0}")]
    Config(String),
    #[error("gate {0} is not native; compile the circuit first")]
    NonNative(String),
    #[error("width {width} exceeds the simulator limit of {limit}")]
    TooWide { width: usize, limit: usize },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Compile(#[from] CompileError),
}

/// Simulator configuration. The free functions use [`Simulator::default`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Simulator {
    pub max_width: usize,
}

impl Default for Simulator {
    fn default() -> Self {
        Self {
            max_width: DEFAULT_MAX_WIDTH,
        }
    }
}

struct Op {
    kernel: Kernel,
    qubits: [usize; 2],
    arity: usize,
    eps: f64,
}

/// One inserted Pauli: operation index and Pauli code. Codes 1..=3 are X, Y, Z
/// on a single qubit; for two-qubit gates the low two bits act on the first
/// qubit and the high two bits on the second.
type ErrorPattern = Vec<(u32, u8)>;

fn compile_ops<N: GateNoise + ?Sized>(circuit: &Circuit, noise: &N) -> Result<Vec<Op>, SimError> {
    circuit
        .gates()
        .enumerate()
        .map(|(i, g)| {
            let kernel = Kernel::for_gate(g).ok_or_else(|| SimError::NonNative(g.to_string()))?;
            let eps = noise.gate_error(i, g);
            if !(0.0..=1.0).contains(&eps) {
                return Err(SimError::InvalidRate(eps));
            }
            let q = g.qubits();
            Ok(Op {
                kernel,
                qubits: [q[0], if q.len() > 1 { q[1] } else { q[0] }],
                arity: q.len(),
                eps,
            })
        })
        .collect()
}

fn draw_pattern(ops: &[Op], rng: &mut impl Rng) -> ErrorPattern {
    let mut pattern = Vec::new();
    for (i, op) in ops.iter().enumerate() {
        if op.eps > 0.0 && rng.random::<f64>() < op.eps {
            let code = if op.arity == 1 {
                rng.random_range(1..=3u8)
            } else {
                rng.random_range(1..=15u8)
            };
            pattern.push((i as u32, code));
        }
    }
    pattern
}

fn push_error(kernels: &mut Vec<Kernel>, op: &Op, code: u8) {
    kernels.extend(Kernel::pauli(op.qubits[0], code & 3));
    if op.arity == 2 {
        kernels.extend(Kernel::pauli(op.qubits[1], code >> 2));
    }
}

/// Evolve `state` through `ops[from..]`, inserting the pattern's Paulis.
fn evolve_from(
    state: &mut StateVector,
    ops: &[Op],
    from: usize,
    pattern: &[(u32, u8)],
    parallel: bool,
) {
    let mut kernels = Vec::with_capacity(ops.len() - from + 2 * pattern.len());
    let mut errs = pattern.iter().peekable();
    for (i, op) in ops.iter().enumerate().skip(from) {
        kernels.push(op.kernel);
        while let Some(&&(at, code)) = errs.peek() {
            if at as usize != i {
                break;
            }
            push_error(&mut kernels, op, code);
            errs.next();
        }
    }
    state.apply_all(&kernels, parallel);
}

/// Final states for a run of patterns sorted lexicographically. A shared
/// error-free prefix state is advanced monotonically through the run.
fn simulate_chunk(
    width: usize,
    ops: &[Op],
    patterns: &[&ErrorPattern],
    parallel: bool,
    mut each: impl FnMut(usize, &StateVector),
) {
    let mut prefix = StateVector::zero(width);
    let mut done = 0usize;
    for (k, pattern) in patterns.iter().enumerate() {
        let first = pattern.first().map_or(ops.len(), |&(i, _)| i as usize);
        if first > done {
            evolve_from_range(&mut prefix, &ops[done..first], parallel);
        }
        done = first;
        if pattern.is_empty() {
            each(k, &prefix);
        } else {
            let mut s = prefix.clone();
            evolve_from(&mut s, ops, first, pattern, parallel);
            each(k, &s);
        }
    }
}

fn evolve_from_range(state: &mut StateVector, ops: &[Op], parallel: bool) {
    let kernels: Vec<Kernel> = ops.iter().map(|op| op.kernel).collect();
    state.apply_all(&kernels, parallel);
}

/// Sample outcomes for `shots` from the measurement distribution of `state`.
/// Each shot's uniform variate and readout flips come from its own stream.
fn sample_shots<N: GateNoise + ?Sized>(
    state: &StateVector,
    shots: &[u64],
    readout: &SeedStream,
    noise: &N,
    width: usize,
) -> Vec<u64> {
    let total = state.norm_sqr();
    let flips: Vec<f64> = (0..width).map(|q| noise.readout_flip(q)).collect();
    let mut draws: Vec<(f64, usize, rand_chacha::ChaCha8Rng)> = shots
        .iter()
        .enumerate()
        .map(|(k, &shot)| {
            let mut rng = readout.rng(shot);
            let u = rng.random::<f64>() * total;
            (u, k, rng)
        })
        .collect();
    draws.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let amps = state.amplitudes();
    let mut out = vec![0u64; shots.len()];
    let mut idx = 0usize;
    let mut acc = amps[0].norm_sqr();
    let last_nonzero = amps.iter().rposition(|a| a.norm_sqr() > 0.0).unwrap_or(0);
    for (u, k, mut rng) in draws {
        while acc <= u && idx < last_nonzero {
            idx += 1;
            acc += amps[idx].norm_sqr();
        }
        let mut outcome = idx as u64;
        for (q, &f) in flips.iter().enumerate() {
            if f > 0.0 && rng.random::<f64>() < f {
                outcome ^= 1 << q;
            }
        }
        out[k] = outcome;
    }
    out
}

impl Simulator {
    pub fn new(max_width: usize) -> Self {
        Self { max_width }
    }

    fn check_width(&self, width: usize) -> Result<(), SimError> {
        if width > self.max_width || width > 63 {
            return Err(SimError::TooWide {
                width,
                limit: self.max_width.min(63),
            });
        }
        Ok(())
    }

    /// Noisy shots of a native circuit. Shot `k` depends only on `(seed, k)`.
    pub fn run_shots<N: GateNoise + ?Sized>(
        &self,
        circuit: &Circuit,
        noise: &N,
        shots: u64,
        seed: u64,
    ) -> Result<Histogram, SimError> {
        let width = circuit.width();
        self.check_width(width)?;
        let ops = compile_ops(circuit, noise)?;
        for q in 0..width {
            let f = noise.readout_flip(q);
            if !(0.0..=1.0).contains(&f) {
                return Err(SimError::InvalidRate(f));
            }
        }
        let noise_stream = SeedStream::new(seed, "noise");
        let readout = SeedStream::new(seed, "readout");

        let patterns = par::map_range(shots as usize, |shot| {
            draw_pattern(&ops, &mut noise_stream.rng(shot as u64))
        });
        let mut groups: BTreeMap<ErrorPattern, Vec<u64>> = BTreeMap::new();
        for (shot, p) in patterns.into_iter().enumerate() {
            groups.entry(p).or_default().push(shot as u64);
        }
        // error-free shots last, so first-error indices are nondecreasing
        let (clean, noisy): (Vec<_>, Vec<_>) = groups.iter().partition(|(p, _)| p.is_empty());
        let (keys, members): (Vec<&ErrorPattern>, Vec<&Vec<u64>>) =
            noisy.into_iter().chain(clean).unzip();

        let chunks = if width >= PARALLEL_STATE_WIDTH {
            1
        } else {
            par::current_threads().max(1).min(keys.len().max(1))
        };
        // a lone state in flight gets the workers through its tiles instead
        let tile_parallel = chunks == 1 && width >= TILE_PARALLEL_MIN_WIDTH;
        let bounds: Vec<(usize, usize)> = (0..chunks)
            .map(|c| (c * keys.len() / chunks, (c + 1) * keys.len() / chunks))
            .collect();
        let sampled = par::map_slice(&bounds, |&(lo, hi)| {
            let mut out = Vec::new();
            simulate_chunk(width, &ops, &keys[lo..hi], tile_parallel, |k, state| {
                let shots = members[lo + k];
                out.extend(sample_shots(state, shots, &readout, noise, width));
            });
            out
        });

        let mut hist = Histogram::new(width);
        for outcome in sampled.into_iter().flatten() {
            hist.add(outcome, 1);
        }
        Ok(hist)
    }

    /// Exact noiseless outcome distribution. Composite gates are lowered first.
    pub fn ideal_distribution(&self, circuit: &Circuit) -> Result<Distribution, SimError> {
        self.check_width(circuit.width())?;
        let native;
        let circuit = if circuit.is_native() {
            circuit
        } else {
            native = decompose_to_native(circuit)?;
            &native
        };
        let state = self.final_state(circuit)?;
        let probs = state.probabilities();
        let mut kept = BTreeMap::new();
        let mut total = 0.0;
        for (i, p) in probs.into_iter().enumerate() {
            if p >= PRUNE_BELOW {
                kept.insert(i as u64, p);
                total += p;
            }
        }
        for p in kept.values_mut() {
            *p /= total;
        }
        Ok(Distribution::new(circuit.width(), kept).expect("normalized by construction"))
    }

    /// Noiseless final state of a native circuit.
    pub fn final_state(&self, circuit: &Circuit) -> Result<StateVector, SimError> {
        self.check_width(circuit.width())?;
        let mut s = StateVector::zero(circuit.width());
        for g in circuit.gates() {
            s.apply(&Kernel::for_gate(g).ok_or_else(|| SimError::NonNative(g.to_string()))?);
        }
        Ok(s)
    }

    /// Exact outcome distribution under the channel, including readout flips.
    pub fn exact_channel<N: GateNoise + ?Sized>(
        &self,
        circuit: &Circuit,
        noise: &N,
    ) -> Result<Distribution, SimError> {
        if circuit.width() > EXACT_MAX_WIDTH {
            return Err(SimError::TooWide {
                width: circuit.width(),
                limit: EXACT_MAX_WIDTH,
            });
        }
        let ops = compile_ops(circuit, noise)?;
        let mut rho = DensityMatrix::zero(circuit.width());
        for op in &ops {
            rho.apply_kernel(&op.kernel);
            if op.eps > 0.0 {
                rho.depolarize(&op.qubits[..op.arity], op.eps);
            }
        }
        let flips: Vec<f64> = (0..circuit.width()).map(|q| noise.readout_flip(q)).collect();
        let probs = rho.diagonal_with_flips(&flips);
        let map = probs
            .into_iter()
            .enumerate()
            .filter(|(_, p)| *p > 0.0)
            .map(|(i, p)| (i as u64, p))
            .collect();
        Ok(Distribution::new(circuit.width(), map)?)
    }
}

impl From<crate::outcome::OutcomeError> for SimError {
    fn from(e: crate::outcome::OutcomeError) -> Self {
        SimError::Config(e.to_string())
    }
}

/// [`Simulator::run_shots`] with the default width limit.
pub fn run_shots<N: GateNoise + ?Sized>(
    circuit: &Circuit,
    noise: &N,
    shots: u64,
    seed: u64,
) -> Result<Histogram, SimError> {
    Simulator::default().run_shots(circuit, noise, shots, seed)
}

/// [`Simulator::ideal_distribution`] with the default width limit.
pub fn ideal_distribution(circuit: &Circuit) -> Result<Distribution, SimError> {
    Simulator::default().ideal_distribution(circuit)
}

/// [`Simulator::exact_channel`].
pub fn exact_channel<N: GateNoise + ?Sized>(
    circuit: &Circuit,
    noise: &N,
) -> Result<Distribution, SimError> {
    Simulator::default().exact_channel(circuit, noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;
    use std::f64::consts::FRAC_PI_4;

    fn bell() -> Circuit {
        Circuit::from_gates(
            2,
            [Gate::y90(0), Gate::y90(1), Gate::zz(0, 1, FRAC_PI_4), Gate::rz(0, -std::f64::consts::FRAC_PI_2)],
        )
        .unwrap()
    }

    #[test]
    fn noiseless_identity_is_all_zero() {
        let c = Circuit::new(3);
        let h = run_shots(&c, &NoiseModel::noiseless(), 100, 1).unwrap();
        assert_eq!(h.count(0), 100);
    }

    #[test]
    fn fully_depolarized_x90_stays_balanced() {
        // X90|0> is a Y eigenstate, so every Pauli branch measures 0 with probability 1/2
        let c = Circuit::from_gates(1, [Gate::x90(0)]).unwrap();
        let d = exact_channel(&c, &NoiseModel::uniform(1.0, 0.0, 0.0)).unwrap();
        assert!((d.prob(0) - 0.5).abs() < 1e-12);
        let h = run_shots(&c, &NoiseModel::uniform(1.0, 0.0, 0.0), 40_000, 3).unwrap();
        let p0 = h.count(0) as f64 / 40_000.0;
        assert!((p0 - 0.5).abs() < 5.0 * (0.25f64 / 40_000.0).sqrt());
    }

    #[test]
    fn fully_depolarized_ground_state() {
        // X90 followed by its inverse pulse sequence: the final error sees |0>
        let c = Circuit::from_gates(1, [Gate::x90(0), Gate::x90(0), Gate::x90(0), Gate::x90(0)])
            .unwrap();
        let last_only = |i: usize, _: &Gate| if i == 3 { 1.0 } else { 0.0 };
        let n = FnNoise(last_only);
        let d = exact_channel(&c, &n).unwrap();
        assert!((d.prob(0) - 1.0 / 3.0).abs() < 1e-12);
        let h = run_shots(&c, &n, 60_000, 4).unwrap();
        let p0 = h.count(0) as f64 / 60_000.0;
        assert!((p0 - 1.0 / 3.0).abs() < 5.0 * (2.0f64 / 9.0 / 60_000.0).sqrt());
    }

    struct FnNoise<F>(F);
    impl<F: Fn(usize, &Gate) -> f64 + Sync> GateNoise for FnNoise<F> {
        fn gate_error(&self, index: usize, gate: &Gate) -> f64 {
            (self.0)(index, gate)
        }
        fn readout_flip(&self, _: usize) -> f64 {
            0.0
        }
    }

    #[test]
    fn exact_channel_without_noise_matches_ideal() {
        let c = bell();
        let ideal = ideal_distribution(&c).unwrap();
        let exact = exact_channel(&c, &NoiseModel::noiseless()).unwrap();
        for i in 0..4 {
            assert!((ideal.prob(i) - exact.prob(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn single_gate_channel_expansion() {
        let c = Circuit::from_gates(1, [Gate::y90(0)]).unwrap();
        let eps = 0.2;
        let d = exact_channel(&c, &NoiseModel::uniform(eps, 0.0, 0.0)).unwrap();
        // Y90|0> is an X eigenstate; every Pauli branch keeps P(0) = 1/2
        assert!((d.prob(0) - 0.5).abs() < 1e-12);

        let c = Circuit::from_gates(1, [Gate::x90(0), Gate::x90(0)]).unwrap();
        let d = exact_channel(&c, &NoiseModel::uniform(eps, 0.0, 0.0)).unwrap();
        // after the first pulse the state is a Y eigenstate: only a Y error
        // leaves it alone, so the second pulse yields |1> with probability q
        let q = (1.0 - eps) + eps / 3.0;
        // the final error flips the bit for X and Y
        let p1 = (1.0 - eps) * q + eps * (q / 3.0 + 2.0 / 3.0 * (1.0 - q));
        assert!((d.prob(1) - p1).abs() < 1e-12);
    }

    #[test]
    fn spam_flips_are_applied() {
        let c = Circuit::new(2);
        let n = NoiseModel::uniform(0.0, 0.0, 0.1);
        let d = exact_channel(&c, &n).unwrap();
        assert!((d.prob(0) - 0.81).abs() < 1e-12);
        assert!((d.prob(3) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn shots_are_worker_independent() {
        let c = bell();
        let n = NoiseModel::uniform(0.05, 0.2, 0.02);
        let a = par::with_workers(1, || run_shots(&c, &n, 3000, 9).unwrap());
        let b = par::with_workers(4, || run_shots(&c, &n, 3000, 9).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.shots(), 3000);
    }

    #[test]
    fn rejects_composites_and_wide_circuits() {
        let c = Circuit::from_gates(2, [Gate::cnot(0, 1)]).unwrap();
        assert!(matches!(
            run_shots(&c, &NoiseModel::noiseless(), 1, 0),
            Err(SimError::NonNative(_))
        ));
        let wide = Circuit::new(7);
        assert!(matches!(
            exact_channel(&wide, &NoiseModel::noiseless()),
            Err(SimError::TooWide { .. })
        ));
        assert!(matches!(
            Simulator::new(4).ideal_distribution(&Circuit::new(5)),
            Err(SimError::TooWide { .. })
        ));
    }

    #[test]
    fn bell_ideal() {
        let mut c = Circuit::new(2);
        c.push(Gate::h(0)).unwrap();
        c.push(Gate::cnot(0, 1)).unwrap();
        let d = ideal_distribution(&c).unwrap();
        assert_eq!(d.support_len(), 2);
        assert!((d.prob(0) - 0.5).abs() < 1e-12 && (d.prob(3) - 0.5).abs() < 1e-12);
    }
}
