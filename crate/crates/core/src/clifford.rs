//! Stabilizer tableaus for Clifford circuits built from Pauli rotations, plus
//! precomputed synthesis tables: the 24 single-qubit Cliffords as native gate
//! words and every two-qubit Clifford as a word with at most three `XX(π/4)`
//! entanglers.
//!
//! Every supported gate is (up to phase) a product of rotations
//! `exp(−i k π/4 A)` about Pauli axes `A`. Conjugating a Pauli `P` by such a
//! rotation leaves it alone when `[A, P] = 0` and otherwise maps it to
//! `(−i)^k A P` for odd `k`, or `−P` for `k = 2`.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::sync::OnceLock;

use thiserror::Error;

use crate::circuit::{Circuit, Gate, GateKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliffordError {
    #[error("gate {0} is not a Clifford operation")]
    NotClifford(String),
    #[error("tableau has {got} qubits, table expects {expected}")]
    WrongSize { expected: usize, got: usize },
}

/// `i^phase · Π_q X_q^{x_q} Z_q^{z_q}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Pauli {
    x: u64,
    z: u64,
    phase: u8,
}

impl Pauli {
    pub const IDENTITY: Pauli = Pauli {
        x: 0,
        z: 0,
        phase: 0,
    };

    /// Hermitian single-qubit Pauli: `kind` 1 = X, 2 = Y, 3 = Z.
    pub fn single(qubit: usize, kind: u8) -> Self {
        let bit = 1u64 << qubit;
        match kind {
            0 => Self::IDENTITY,
            1 => Self {
                x: bit,
                z: 0,
                phase: 0,
            },
            // Y = i X Z
            2 => Self {
                x: bit,
                z: bit,
                phase: 1,
            },
            3 => Self {
                x: 0,
                z: bit,
                phase: 0,
            },
            _ => panic!("pauli kind {kind} out of range"),
        }
    }

    pub fn x_bits(&self) -> u64 {
        self.x
    }

    pub fn z_bits(&self) -> u64 {
        self.z
    }

    /// Power of `i` in front of the X/Z product.
    pub fn phase(&self) -> u8 {
        self.phase
    }

    pub fn mul(&self, other: &Pauli) -> Pauli {
        // Z^{z1} X^{x2} = (−1)^{|z1 ∧ x2|} X^{x2} Z^{z1}
        let swaps = (self.z & other.x).count_ones() as u8;
        Pauli {
            x: self.x ^ other.x,
            z: self.z ^ other.z,
            phase: (self.phase + other.phase + 2 * swaps) % 4,
        }
    }

    pub fn commutes(&self, other: &Pauli) -> bool {
        ((self.x & other.z) ^ (self.z & other.x)).count_ones().is_multiple_of(2)
    }

    fn times_phase(mut self, k: u8) -> Self {
        self.phase = (self.phase + k) % 4;
        self
    }

    /// `R P R†` with `R = exp(−i k π/4 A)`.
    pub fn conjugated_by_rotation(&self, axis: &Pauli, quarter: u8) -> Pauli {
        let k = quarter % 4;
        if k == 0 || self.commutes(axis) {
            return *self;
        }
        match k {
            2 => self.times_phase(2),
            1 => axis.mul(self).times_phase(3),
            _ => axis.mul(self).times_phase(1),
        }
    }
}

/// Pauli rotation `exp(−i quarter·π/4 · axis)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rotation {
    pub axis: Pauli,
    pub quarter: u8,
}

impl Rotation {
    pub fn inverse(&self) -> Rotation {
        Rotation {
            axis: self.axis,
            quarter: (4 - self.quarter % 4) % 4,
        }
    }
}

fn quarter_turns(angle: f64, unit: f64, gate: &Gate) -> Result<u8, CliffordError> {
    let k = (angle / unit).round();
    if (angle - k * unit).abs() > 1e-9 {
        return Err(CliffordError::NotClifford(gate.to_string()));
    }
    Ok(k.rem_euclid(4.0) as u8)
}

/// Rotation sequence (time order) realizing `gate` up to global phase.
pub fn gate_rotations(gate: &Gate) -> Result<Vec<Rotation>, CliffordError> {
    let q = gate.qubits();
    let rot = |axis: Pauli, quarter: u8| Rotation { axis, quarter };
    let pair = |kind: u8| Pauli::single(q[0], kind).mul(&Pauli::single(q[1], kind));
    let hadamard = |t: usize| {
        // H ∝ Y90 · RZ(π): Z-flip first, then the Y quarter turn
        [rot(Pauli::single(t, 3), 2), rot(Pauli::single(t, 2), 1)]
    };
    let cz = |a: usize, b: usize| {
        // CZ ∝ RZ_a(π/2) RZ_b(π/2) ZZ(−π/4)
        [
            rot(Pauli::single(a, 3), 1),
            rot(Pauli::single(b, 3), 1),
            rot(Pauli::single(a, 3).mul(&Pauli::single(b, 3)), 3),
        ]
    };
    let cnot = |c: usize, t: usize| {
        let mut v = hadamard(t).to_vec();
        v.extend(cz(c, t));
        v.extend(hadamard(t));
        v
    };
    Ok(match gate.kind() {
        GateKind::X90 => vec![rot(Pauli::single(q[0], 1), 1)],
        GateKind::Y90 => vec![rot(Pauli::single(q[0], 2), 1)],
        GateKind::Rz(t) => vec![rot(Pauli::single(q[0], 3), quarter_turns(t, FRAC_PI_2, gate)?)],
        GateKind::Xx(chi) => vec![rot(pair(1), quarter_turns(chi, FRAC_PI_4, gate)?)],
        GateKind::Zz(chi) => vec![rot(pair(3), quarter_turns(chi, FRAC_PI_4, gate)?)],
        GateKind::H => hadamard(q[0]).to_vec(),
        GateKind::Cz => cz(q[0], q[1]).to_vec(),
        GateKind::Cnot => cnot(q[0], q[1]),
        GateKind::Swap => {
            let mut v = cnot(q[0], q[1]);
            v.extend(cnot(q[1], q[0]));
            v.extend(cnot(q[0], q[1]));
            v
        }
        GateKind::Cphase(t) => match quarter_turns(t, FRAC_PI_2, gate)? {
            0 => vec![],
            2 => cz(q[0], q[1]).to_vec(),
            _ => return Err(CliffordError::NotClifford(gate.to_string())),
        },
    })
}

/// Images of `X_q` and `Z_q` under conjugation by the tracked Clifford `U`:
/// `rows[2q] = U X_q U†`, `rows[2q+1] = U Z_q U†`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Tableau {
    n: usize,
    rows: Vec<Pauli>,
}

impl Tableau {
    pub fn identity(n: usize) -> Self {
        assert!(n <= 64, "tableau supports at most 64 qubits");
        let rows = (0..n)
            .flat_map(|q| [Pauli::single(q, 1), Pauli::single(q, 3)])
            .collect();
        Self { n, rows }
    }

    pub fn from_circuit(circuit: &Circuit) -> Result<Self, CliffordError> {
        let mut t = Self::identity(circuit.width());
        for g in circuit.gates() {
            t.apply_gate(g)?;
        }
        Ok(t)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[Pauli] {
        &self.rows
    }

    pub fn apply_rotation(&mut self, r: &Rotation) {
        for row in &mut self.rows {
            *row = row.conjugated_by_rotation(&r.axis, r.quarter);
        }
    }

    /// Append `gate` after everything tracked so far.
    pub fn apply_gate(&mut self, gate: &Gate) -> Result<(), CliffordError> {
        for r in gate_rotations(gate)? {
            self.apply_rotation(&r);
        }
        Ok(())
    }

    /// Append the inverse of `gate`.
    pub fn apply_gate_inverse(&mut self, gate: &Gate) -> Result<(), CliffordError> {
        for r in gate_rotations(gate)?.iter().rev() {
            self.apply_rotation(&r.inverse());
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.n)
    }

    /// Compact key; equal keys ⇔ equal Cliffords up to global phase.
    pub fn key(&self) -> Vec<u64> {
        self.rows
            .iter()
            .flat_map(|p| [p.x, p.z, p.phase as u64])
            .collect()
    }
}

/// A single-qubit native gate used in Clifford words, independent of qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LocalGate {
    X90,
    Y90,
    /// `RZ(k·π/2)`, virtual.
    Rz(i8),
}

impl LocalGate {
    pub fn on(&self, qubit: usize) -> Gate {
        match *self {
            LocalGate::X90 => Gate::x90(qubit),
            LocalGate::Y90 => Gate::y90(qubit),
            LocalGate::Rz(k) => Gate::rz(qubit, k as f64 * FRAC_PI_2),
        }
    }

    fn is_physical(&self) -> bool {
        !matches!(self, LocalGate::Rz(_))
    }
}

/// The 24 single-qubit Cliffords, each as a shortest word (fewest physical
/// π/2 pulses, then fewest gates) over `{X90, Y90, RZ(±π/2), RZ(π)}`.
#[derive(Debug)]
pub struct OneQubitCliffords {
    words: Vec<Vec<LocalGate>>,
    /// key of the element's *inverse* tableau → index
    by_inverse_key: HashMap<Vec<u64>, usize>,
    by_key: HashMap<Vec<u64>, usize>,
}

impl OneQubitCliffords {
    fn build() -> Self {
        let generators = [
            LocalGate::X90,
            LocalGate::Y90,
            LocalGate::Rz(1),
            LocalGate::Rz(-1),
            LocalGate::Rz(2),
        ];
        // Dijkstra over (physical pulses, length)
        let mut best: BTreeMap<Vec<u64>, ((usize, usize), Vec<LocalGate>)> = BTreeMap::new();
        let mut queue: VecDeque<Vec<LocalGate>> = VecDeque::from([vec![]]);
        let cost =
            |w: &[LocalGate]| (w.iter().filter(|g| g.is_physical()).count(), w.len());
        while let Some(word) = queue.pop_front() {
            let key = word_tableau(&word).key();
            let c = cost(&word);
            match best.get(&key) {
                Some((bc, _)) if *bc <= c => continue,
                _ => {}
            }
            best.insert(key, (c, word.clone()));
            if word.len() < 6 {
                for g in generators {
                    let mut next = word.clone();
                    next.push(g);
                    queue.push_back(next);
                }
            }
        }
        let mut entries: Vec<((usize, usize), Vec<u64>, Vec<LocalGate>)> =
            best.into_iter().map(|(k, (c, w))| (c, k, w)).collect();
        entries.sort();
        let mut words = Vec::new();
        let mut by_key = HashMap::new();
        let mut by_inverse_key = HashMap::new();
        for (i, (_, key, word)) in entries.into_iter().enumerate() {
            let mut inv = Tableau::identity(1);
            for g in word.iter().rev() {
                inv.apply_gate_inverse(&g.on(0)).expect("clifford");
            }
            by_inverse_key.insert(inv.key(), i);
            by_key.insert(key, i);
            words.push(word);
        }
        Self {
            words,
            by_inverse_key,
            by_key,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, index: usize) -> &[LocalGate] {
        &self.words[index]
    }

    pub fn gates(&self, index: usize, qubit: usize) -> Vec<Gate> {
        self.words[index].iter().map(|g| g.on(qubit)).collect()
    }

    /// Index of the element implemented by a one-qubit tableau.
    pub fn index_of(&self, t: &Tableau) -> Option<usize> {
        self.by_key.get(&t.key()).copied()
    }

    /// Index of the element that undoes `t`.
    pub fn inverse_of(&self, t: &Tableau) -> Result<usize, CliffordError> {
        if t.n != 1 {
            return Err(CliffordError::WrongSize {
                expected: 1,
                got: t.n,
            });
        }
        Ok(self.by_inverse_key[&t.key()])
    }

    /// Index of "`a` then `b`".
    pub fn compose(&self, a: usize, b: usize) -> usize {
        let mut w = self.words[a].clone();
        w.extend_from_slice(&self.words[b]);
        self.by_key[&word_tableau(&w).key()]
    }
}

fn word_tableau(word: &[LocalGate]) -> Tableau {
    let mut t = Tableau::identity(1);
    for g in word {
        t.apply_gate(&g.on(0)).expect("local gates are Clifford");
    }
    t
}

pub fn one_qubit_cliffords() -> &'static OneQubitCliffords {
    static TABLE: OnceLock<OneQubitCliffords> = OnceLock::new();
    TABLE.get_or_init(OneQubitCliffords::build)
}

/// Two-qubit Clifford word: `locals[0]`, XX(π/4), `locals[1]`, …, XX(π/4),
/// `locals[k]`. Each local is a pair of single-qubit Clifford indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwoQubitWord {
    pub locals: Vec<(u8, u8)>,
}

impl TwoQubitWord {
    pub fn entanglers(&self) -> usize {
        self.locals.len() - 1
    }

    pub fn gates(&self, a: usize, b: usize) -> Vec<Gate> {
        let table = one_qubit_cliffords();
        let mut out = Vec::new();
        for (i, &(la, lb)) in self.locals.iter().enumerate() {
            if i > 0 {
                out.push(Gate::xx(a, b, FRAC_PI_4));
            }
            out.extend(table.gates(la as usize, a));
            out.extend(table.gates(lb as usize, b));
        }
        out
    }
}

/// All 11520 two-qubit Cliffords (mod phase), keyed for inversion.
#[derive(Debug)]
pub struct TwoQubitCliffords {
    by_inverse_key: HashMap<Vec<u64>, TwoQubitWord>,
}

impl TwoQubitCliffords {
    fn build() -> Self {
        let one = one_qubit_cliffords();
        let n1 = one.len();
        let local_inverse = |t: &mut Tableau, la: usize, lb: usize| {
            for (idx, q) in [(la, 0usize), (lb, 1usize)] {
                for g in one.word(idx).iter().rev() {
                    t.apply_gate_inverse(&g.on(q)).expect("clifford");
                }
            }
        };
        let xx_inverse = Rotation {
            axis: Pauli::single(0, 1).mul(&Pauli::single(1, 1)),
            quarter: 3,
        };

        let mut by_inverse_key = HashMap::new();
        let mut frontier: Vec<(TwoQubitWord, Tableau)> = Vec::new();
        for la in 0..n1 {
            for lb in 0..n1 {
                let mut t = Tableau::identity(2);
                local_inverse(&mut t, la, lb);
                let word = TwoQubitWord {
                    locals: vec![(la as u8, lb as u8)],
                };
                if by_inverse_key.insert(t.key(), word.clone()).is_none() {
                    frontier.push((word, t));
                }
            }
        }
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for (word, inv) in &frontier {
                // new word: L, XX, word…  ⇒ inverse: word⁻¹, XX⁻¹, L⁻¹
                let mut base = inv.clone();
                base.apply_rotation(&xx_inverse);
                for la in 0..n1 {
                    for lb in 0..n1 {
                        let mut t = base.clone();
                        local_inverse(&mut t, la, lb);
                        let key = t.key();
                        if by_inverse_key.contains_key(&key) {
                            continue;
                        }
                        let mut locals = vec![(la as u8, lb as u8)];
                        locals.extend_from_slice(&word.locals);
                        let w = TwoQubitWord { locals };
                        by_inverse_key.insert(key, w.clone());
                        next.push((w, t));
                    }
                }
            }
            frontier = next;
        }
        Self { by_inverse_key }
    }

    pub fn len(&self) -> usize {
        self.by_inverse_key.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_inverse_key.is_empty()
    }

    /// Word that, appended after the Clifford tracked by `t`, yields the identity.
    pub fn inverse_of(&self, t: &Tableau) -> Result<&TwoQubitWord, CliffordError> {
        if t.n != 2 {
            return Err(CliffordError::WrongSize {
                expected: 2,
                got: t.n,
            });
        }
        Ok(&self.by_inverse_key[&t.key()])
    }

    pub fn max_entanglers(&self) -> usize {
        self.by_inverse_key
            .values()
            .map(TwoQubitWord::entanglers)
            .max()
            .unwrap_or(0)
    }
}

pub fn two_qubit_cliffords() -> &'static TwoQubitCliffords {
    static TABLE: OnceLock<TwoQubitCliffords> = OnceLock::new();
    TABLE.get_or_init(TwoQubitCliffords::build)
}
