//! Circuit intermediate representation over the trapped-ion native gate set
//! (`X90`, `Y90`, `RZ`, `XX`, `ZZ`) plus the composite gates reference circuits
//! are written in.
//!
//! Conventions:
//! * `XX(χ) = exp(−iχ X⊗X)`, `ZZ(χ) = exp(−iχ Z⊗Z)`.
//! * `X90 = exp(−iπ/4 X)`, `Y90 = exp(−iπ/4 Y)`, `RZ(θ) = exp(−iθ Z/2)`.
//! * `CNOT` uses `qubits[0]` as control, `CPHASE(θ) = diag(1, 1, 1, e^{iθ})`.
//! * Basis index bit `q` is the state of qubit `q`; in bitstrings the leftmost
//!   character is qubit 0.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::fmt;

use num_complex::Complex64;
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{CMatrix, I, ONE, ZERO};

/// Largest width accepted by [`unitary`].
pub const UNITARY_MAX_WIDTH: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("qubit {qubit} out of range for width {width}")]
    QubitOutOfRange { qubit: usize, width: usize },
    #[error("gate {gate} acts twice on qubit {qubit}")]
    DuplicateQubit { gate: &'static str, qubit: usize },
    #[error("gate {gate} takes {expected} qubit(s), got {got}")]
    WrongArity {
        gate: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("gate angle must be finite, got {0}")]
    NonFiniteAngle(f64),
    #[error("circuit width {width} exceeds limit {limit}")]
    TooWide { width: usize, limit: usize },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

/// Map an angle into `(−π, π]`.
pub fn canonical_angle(theta: f64) -> f64 {
    let mut r = theta.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    if r == 0.0 {
        // collapse -0.0
        0.0
    } else {
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GateKind {
    X90,
    Y90,
    Rz(f64),
    Xx(f64),
    Zz(f64),
    H,
    Cnot,
    Cz,
    Cphase(f64),
    Swap,
}

impl GateKind {
    pub fn arity(&self) -> usize {
        match self {
            GateKind::X90 | GateKind::Y90 | GateKind::Rz(_) | GateKind::H => 1,
            _ => 2,
        }
    }

    pub fn is_native(&self) -> bool {
        matches!(
            self,
            GateKind::X90 | GateKind::Y90 | GateKind::Rz(_) | GateKind::Xx(_) | GateKind::Zz(_)
        )
    }

    pub fn token(&self) -> &'static str {
        match self {
            GateKind::X90 => "x90",
            GateKind::Y90 => "y90",
            GateKind::Rz(_) => "rz",
            GateKind::Xx(_) => "xx",
            GateKind::Zz(_) => "zz",
            GateKind::H => "h",
            GateKind::Cnot => "cnot",
            GateKind::Cz => "cz",
            GateKind::Cphase(_) => "cphase",
            GateKind::Swap => "swap",
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            GateKind::Rz(a) | GateKind::Xx(a) | GateKind::Zz(a) | GateKind::Cphase(a) => Some(a),
            _ => None,
        }
    }

    fn from_token(token: &str, angle: Option<f64>) -> Result<Self, String> {
        let need = |a: Option<f64>| a.ok_or_else(|| format!("gate `{token}` requires an angle"));
        let kind = match token {
            "x90" => GateKind::X90,
            "y90" => GateKind::Y90,
            "h" => GateKind::H,
            "cnot" => GateKind::Cnot,
            "cz" => GateKind::Cz,
            "swap" => GateKind::Swap,
            "rz" => GateKind::Rz(need(angle)?),
            "xx" => GateKind::Xx(need(angle)?),
            "zz" => GateKind::Zz(need(angle)?),
            "cphase" => GateKind::Cphase(need(angle)?),
            other => return Err(format!("unknown gate `{other}`")),
        };
        if kind.angle().is_none() && angle.is_some() {
            return Err(format!("gate `{token}` takes no angle"));
        }
        Ok(kind)
    }

    fn canonicalized(self) -> Result<Self, CircuitError> {
        let fix = |a: f64| {
            if a.is_finite() {
                Ok(canonical_angle(a))
            } else {
                Err(CircuitError::NonFiniteAngle(a))
            }
        };
        Ok(match self {
            GateKind::Rz(a) => GateKind::Rz(fix(a)?),
            GateKind::Xx(a) => GateKind::Xx(fix(a)?),
            GateKind::Zz(a) => GateKind::Zz(fix(a)?),
            GateKind::Cphase(a) => GateKind::Cphase(fix(a)?),
            other => other,
        })
    }
}

/// A gate applied to one or two distinct qubits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gate {
    kind: GateKind,
    qubits: [usize; 2],
}

impl Gate {
    pub fn new(kind: GateKind, qubits: &[usize]) -> Result<Self, CircuitError> {
        let kind = kind.canonicalized()?;
        if qubits.len() != kind.arity() {
            return Err(CircuitError::WrongArity {
                gate: kind.token(),
                expected: kind.arity(),
                got: qubits.len(),
            });
        }
        if kind.arity() == 2 && qubits[0] == qubits[1] {
            return Err(CircuitError::DuplicateQubit {
                gate: kind.token(),
                qubit: qubits[0],
            });
        }
        let q1 = if kind.arity() == 2 { qubits[1] } else { qubits[0] };
        Ok(Self {
            kind,
            qubits: [qubits[0], q1],
        })
    }

    fn one(kind: GateKind, q: usize) -> Self {
        Self::new(kind, &[q]).expect("valid single-qubit gate")
    }

    fn two(kind: GateKind, a: usize, b: usize) -> Self {
        Self::new(kind, &[a, b]).expect("two-qubit gate on equal qubits")
    }

    pub fn x90(q: usize) -> Self {
        Self::one(GateKind::X90, q)
    }
    pub fn y90(q: usize) -> Self {
        Self::one(GateKind::Y90, q)
    }
    pub fn rz(q: usize, theta: f64) -> Self {
        Self::one(GateKind::Rz(theta), q)
    }
    pub fn h(q: usize) -> Self {
        Self::one(GateKind::H, q)
    }
    /// Panics if `a == b`.
    pub fn xx(a: usize, b: usize, chi: f64) -> Self {
        Self::two(GateKind::Xx(chi), a, b)
    }
    pub fn zz(a: usize, b: usize, chi: f64) -> Self {
        Self::two(GateKind::Zz(chi), a, b)
    }
    pub fn cnot(control: usize, target: usize) -> Self {
        Self::two(GateKind::Cnot, control, target)
    }
    pub fn cz(a: usize, b: usize) -> Self {
        Self::two(GateKind::Cz, a, b)
    }
    pub fn cphase(a: usize, b: usize, theta: f64) -> Self {
        Self::two(GateKind::Cphase(theta), a, b)
    }
    pub fn swap(a: usize, b: usize) -> Self {
        Self::two(GateKind::Swap, a, b)
    }

    pub fn kind(&self) -> GateKind {
        self.kind
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits[..self.kind.arity()]
    }

    pub fn arity(&self) -> usize {
        self.kind.arity()
    }

    pub fn is_native(&self) -> bool {
        self.kind.is_native()
    }

    /// Same gate with its qubits relabeled through `map`.
    pub fn relabeled(&self, map: impl Fn(usize) -> usize) -> Self {
        let q: Vec<usize> = self.qubits().iter().map(|&q| map(q)).collect();
        Self::new(self.kind, &q).expect("relabeling must stay injective")
    }

    /// Local unitary. For two-qubit gates the local basis index is
    /// `b0 + 2·b1` with `b0` the bit of `qubits()[0]`.
    pub fn matrix(&self) -> CMatrix {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        match self.kind {
            GateKind::X90 => CMatrix::from_rows(&[&[h, -I * h], &[-I * h, h]]),
            GateKind::Y90 => CMatrix::from_rows(&[&[h, -h], &[h, h]]),
            GateKind::Rz(t) => CMatrix::diagonal(&[
                Complex64::from_polar(1.0, -t / 2.0),
                Complex64::from_polar(1.0, t / 2.0),
            ]),
            GateKind::H => CMatrix::from_rows(&[&[h, h], &[h, -h]]),
            GateKind::Xx(chi) => {
                let c = Complex64::new(chi.cos(), 0.0);
                let s = Complex64::new(0.0, -chi.sin());
                let mut m = CMatrix::zeros(4);
                for i in 0..4 {
                    m[(i, i)] = c;
                    m[(i, 3 - i)] = s;
                }
                m
            }
            GateKind::Zz(chi) => {
                let even = Complex64::from_polar(1.0, -chi);
                let odd = Complex64::from_polar(1.0, chi);
                CMatrix::diagonal(&[even, odd, odd, even])
            }
            GateKind::Cnot => {
                // control = b0 (bit 0 of the local index), target = b1
                let mut m = CMatrix::zeros(4);
                m[(0, 0)] = ONE;
                m[(2, 2)] = ONE;
                m[(3, 1)] = ONE;
                m[(1, 3)] = ONE;
                m
            }
            GateKind::Cz => CMatrix::diagonal(&[ONE, ONE, ONE, -ONE]),
            GateKind::Cphase(t) => {
                CMatrix::diagonal(&[ONE, ONE, ONE, Complex64::from_polar(1.0, t)])
            }
            GateKind::Swap => {
                let mut m = CMatrix::zeros(4);
                m[(0, 0)] = ONE;
                m[(1, 2)] = ONE;
                m[(2, 1)] = ONE;
                m[(3, 3)] = ONE;
                m
            }
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:?}", self.kind.token(), self.qubits())?;
        if let Some(a) = self.kind.angle() {
            write!(f, "({a})")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Element {
    Gate(Gate),
    Barrier,
}

/// Ordered gate sequence over `width` qubits. Immutable once built except
/// through validated appends.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    width: usize,
    elements: Vec<Element>,
}

impl Circuit {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            elements: Vec::new(),
        }
    }

    pub fn from_gates(
        width: usize,
        gates: impl IntoIterator<Item = Gate>,
    ) -> Result<Self, CircuitError> {
        let mut c = Self::new(width);
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn push(&mut self, gate: Gate) -> Result<(), CircuitError> {
        if let Some(&q) = gate.qubits().iter().find(|&&q| q >= self.width) {
            return Err(CircuitError::QubitOutOfRange {
                qubit: q,
                width: self.width,
            });
        }
        self.elements.push(Element::Gate(gate));
        Ok(())
    }

    pub fn barrier(&mut self) {
        self.elements.push(Element::Barrier);
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) -> Result<(), CircuitError> {
        for g in gates {
            self.push(g)?;
        }
        Ok(())
    }

    pub fn gates(&self) -> impl Iterator<Item = &Gate> + '_ {
        self.elements.iter().filter_map(|e| match e {
            Element::Gate(g) => Some(g),
            Element::Barrier => None,
        })
    }

    pub fn gate_count(&self) -> usize {
        self.gates().count()
    }

    pub fn is_native(&self) -> bool {
        self.gates().all(Gate::is_native)
    }

    pub fn without_barriers(&self) -> Self {
        Self {
            width: self.width,
            elements: self
                .elements
                .iter()
                .filter(|e| matches!(e, Element::Gate(_)))
                .copied()
                .collect(),
        }
    }

    /// Canonical text form: one op per line, angles with 17 significant digits.
    pub fn to_canonical_string(&self) -> String {
        let mut out = format!("{{\"width\": {}, \"ops\": [", self.width);
        for (i, e) in self.elements.iter().enumerate() {
            out.push_str(if i == 0 { "\n  " } else { ",\n  " });
            match e {
                Element::Barrier => out.push_str("[\"barrier\"]"),
                Element::Gate(g) => {
                    out.push_str(&format!("[\"{}\", [", g.kind.token()));
                    let qs: Vec<String> = g.qubits().iter().map(usize::to_string).collect();
                    out.push_str(&qs.join(", "));
                    out.push(']');
                    if let Some(a) = g.kind.angle() {
                        out.push_str(&format!(", {a:.16e}"));
                    }
                    out.push(']');
                }
            }
        }
        if !self.elements.is_empty() {
            out.push('\n');
        }
        out.push_str("]}\n");
        out
    }

    pub fn from_json_str(text: &str) -> Result<Self, CircuitError> {
        serde_json::from_str(text).map_err(|e| json_error(&e))
    }
}

pub(crate) fn json_error(e: &serde_json::Error) -> CircuitError {
    let msg = e.to_string();
    // serde_json appends " at line L column C"; keep the bare message
    let message = match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg,
    };
    CircuitError::Parse {
        line: e.line(),
        column: e.column(),
        message,
    }
}

/// Number of two-qubit gates.
pub fn two_qubit_gate_count(circuit: &Circuit) -> usize {
    circuit.gates().filter(|g| g.arity() == 2).count()
}

/// Full `2^n × 2^n` unitary of the circuit, barriers ignored.
pub fn unitary(circuit: &Circuit) -> Result<CMatrix, CircuitError> {
    let n = circuit.width;
    if n > UNITARY_MAX_WIDTH {
        return Err(CircuitError::TooWide {
            width: n,
            limit: UNITARY_MAX_WIDTH,
        });
    }
    let dim = 1usize << n;
    let mut u = CMatrix::identity(dim);
    for g in circuit.gates() {
        left_multiply(&mut u, g);
    }
    Ok(u)
}

/// `u ← G·u` where `G` is `gate` embedded into the full space.
fn left_multiply(u: &mut CMatrix, gate: &Gate) {
    let dim = u.dim();
    let m = gate.matrix();
    let qs = gate.qubits();
    let mut rows = vec![Vec::new(); m.dim()];
    match qs {
        [q] => {
            let bit = 1 << q;
            for r0 in (0..dim).filter(|r| r & bit == 0) {
                let idx = [r0, r0 | bit];
                combine_rows(u, &m, &idx, &mut rows);
            }
        }
        [a, b] => {
            let (ba, bb) = (1 << a, 1 << b);
            for r0 in (0..dim).filter(|r| r & (ba | bb) == 0) {
                let idx = [r0, r0 | ba, r0 | bb, r0 | ba | bb];
                combine_rows(u, &m, &idx, &mut rows);
            }
        }
        _ => unreachable!(),
    }
}

fn combine_rows(u: &mut CMatrix, m: &CMatrix, idx: &[usize], scratch: &mut [Vec<Complex64>]) {
    let dim = u.dim();
    for (k, &r) in idx.iter().enumerate() {
        scratch[k].clear();
        scratch[k].extend((0..dim).map(|c| u[(r, c)]));
    }
    for (i, &r) in idx.iter().enumerate() {
        for c in 0..dim {
            let mut acc = ZERO;
            for (k, row) in scratch.iter().enumerate() {
                acc += m[(i, k)] * row[c];
            }
            u[(r, c)] = acc;
        }
    }
}

impl Serialize for Element {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Element::Barrier => {
                let mut seq = s.serialize_seq(Some(1))?;
                seq.serialize_element("barrier")?;
                seq.end()
            }
            Element::Gate(g) => {
                let angle = g.kind.angle();
                let mut seq = s.serialize_seq(Some(2 + angle.is_some() as usize))?;
                seq.serialize_element(g.kind.token())?;
                seq.serialize_element(g.qubits())?;
                if let Some(a) = angle {
                    seq.serialize_element(&a)?;
                }
                seq.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for Element {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct OpVisitor;
        impl<'de> Visitor<'de> for OpVisitor {
            type Value = Element;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an op array [name, [qubits], angle?]")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Element, A::Error> {
                let name: String = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(0, &self))?;
                if name == "barrier" {
                    if seq.next_element::<de::IgnoredAny>()?.is_some() {
                        return Err(de::Error::custom("barrier takes no operands"));
                    }
                    return Ok(Element::Barrier);
                }
                let qubits: Vec<usize> = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::custom(format!("gate `{name}` is missing qubits")))?;
                let angle: Option<f64> = seq.next_element()?;
                if seq.next_element::<de::IgnoredAny>()?.is_some() {
                    return Err(de::Error::custom(format!(
                        "gate `{name}` has trailing operands"
                    )));
                }
                let kind = GateKind::from_token(&name, angle).map_err(de::Error::custom)?;
                Gate::new(kind, &qubits)
                    .map(Element::Gate)
                    .map_err(de::Error::custom)
            }
        }
        d.deserialize_seq(OpVisitor)
    }
}

#[derive(Serialize, Deserialize)]
struct CircuitRepr {
    width: usize,
    ops: Vec<Element>,
}

impl Serialize for Circuit {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CircuitRepr {
            width: self.width,
            ops: self.elements.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Circuit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = CircuitRepr::deserialize(d)?;
        let mut c = Circuit::new(repr.width);
        for (i, op) in repr.ops.into_iter().enumerate() {
            match op {
                Element::Barrier => c.barrier(),
                Element::Gate(g) => c
                    .push(g)
                    .map_err(|e| de::Error::custom(format!("op {i}: {e}")))?,
            }
        }
        Ok(c)
    }
}
