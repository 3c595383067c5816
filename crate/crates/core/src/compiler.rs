//! Lowering to the native gate set and randomized variant generation.
//!
//! Composite gates map onto one `ZZ` entangler each (three for `SWAP`) plus
//! single-qubit gates. Variants re-place the logical qubits on the device and
//! wrap every `ZZ` in a random Pauli frame that commutes with it.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{two_qubit_gate_count, Circuit, CircuitError, Element, Gate, GateKind};
use crate::par;
use crate::rng::SeedStream;

/// Number of variants per logical circuit unless configured otherwise.
pub const DEFAULT_VARIANTS: usize = 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompileError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// `Y90⁻¹` as `RZ(−π) · Y90 · RZ(π)` in time order; one physical pulse.
fn y90_inverse(q: usize) -> [Gate; 3] {
    [Gate::rz(q, -PI), Gate::y90(q), Gate::rz(q, PI)]
}

/// `XX(χ)` realized with a `ZZ(χ)` entangler conjugated by π/2 pulses:
/// `Y90` on both qubits, `ZZ(χ)`, then `Y90⁻¹` on both.
pub fn wrap_xx_as_zz(xx: &Gate) -> Result<Vec<Gate>, CompileError> {
    let GateKind::Xx(chi) = xx.kind() else {
        return Err(CompileError::Contract(format!("expected an XX gate, got {xx}")));
    };
    let (a, b) = (xx.qubits()[0], xx.qubits()[1]);
    let mut out = vec![Gate::y90(a), Gate::y90(b), Gate::zz(a, b, chi)];
    out.extend(y90_inverse(a));
    out.extend(y90_inverse(b));
    Ok(out)
}

/// The hardware construction of the phase-insensitive `ZZ(χ)` from an `XX(χ)`
/// pulse: `Y90⁻¹` on both qubits, `XX(χ)`, then `Y90` on both.
pub fn zz_from_xx(zz: &Gate) -> Result<Vec<Gate>, CompileError> {
    let GateKind::Zz(chi) = zz.kind() else {
        return Err(CompileError::Contract(format!("expected a ZZ gate, got {zz}")));
    };
    let (a, b) = (zz.qubits()[0], zz.qubits()[1]);
    let mut out = Vec::new();
    out.extend(y90_inverse(a));
    out.extend(y90_inverse(b));
    out.extend([Gate::xx(a, b, chi), Gate::y90(a), Gate::y90(b)]);
    Ok(out)
}

fn hadamard(q: usize) -> [Gate; 2] {
    [Gate::rz(q, PI), Gate::y90(q)]
}

fn controlled_z(a: usize, b: usize) -> [Gate; 3] {
    [
        Gate::zz(a, b, FRAC_PI_4),
        Gate::rz(a, -FRAC_PI_2),
        Gate::rz(b, -FRAC_PI_2),
    ]
}

fn cnot(c: usize, t: usize) -> Vec<Gate> {
    let mut v = hadamard(t).to_vec();
    v.extend(controlled_z(c, t));
    v.extend(hadamard(t));
    v
}

fn expand(gate: &Gate) -> Vec<Gate> {
    let q = gate.qubits();
    match gate.kind() {
        GateKind::X90 | GateKind::Y90 | GateKind::Rz(_) | GateKind::Zz(_) => vec![*gate],
        GateKind::Xx(_) => wrap_xx_as_zz(gate).expect("kind checked"),
        GateKind::H => hadamard(q[0]).to_vec(),
        GateKind::Cz => controlled_z(q[0], q[1]).to_vec(),
        GateKind::Cnot => cnot(q[0], q[1]),
        GateKind::Cphase(theta) => vec![
            Gate::zz(q[0], q[1], -theta / 4.0),
            Gate::rz(q[0], theta / 2.0),
            Gate::rz(q[1], theta / 2.0),
        ],
        GateKind::Swap => {
            let mut v = cnot(q[0], q[1]);
            v.extend(cnot(q[1], q[0]));
            v.extend(cnot(q[0], q[1]));
            v
        }
    }
}

fn is_identity_gate(g: &Gate) -> bool {
    matches!(g.kind(), GateKind::Rz(a) | GateKind::Zz(a) | GateKind::Xx(a) | GateKind::Cphase(a) if a == 0.0)
}

/// Merge runs of `RZ` on the same qubit and drop zero-angle rotations.
/// Barriers stop merging and are kept.
fn merge_rotations(width: usize, elements: &[Element]) -> Vec<Element> {
    let mut pending: Vec<Option<f64>> = vec![None; width];
    let mut out = Vec::with_capacity(elements.len());
    let flush = |q: usize, pending: &mut Vec<Option<f64>>, out: &mut Vec<Element>| {
        if let Some(theta) = pending[q].take() {
            let g = Gate::rz(q, theta);
            if !is_identity_gate(&g) {
                out.push(Element::Gate(g));
            }
        }
    };
    for e in elements {
        match e {
            Element::Barrier => {
                for q in 0..width {
                    flush(q, &mut pending, &mut out);
                }
                out.push(Element::Barrier);
            }
            Element::Gate(g) => match g.kind() {
                GateKind::Rz(theta) => {
                    let q = g.qubits()[0];
                    *pending[q].get_or_insert(0.0) += theta;
                }
                _ if is_identity_gate(g) => {}
                _ => {
                    for &q in g.qubits() {
                        flush(q, &mut pending, &mut out);
                    }
                    out.push(Element::Gate(*g));
                }
            },
        }
    }
    for q in 0..width {
        flush(q, &mut pending, &mut out);
    }
    out
}

fn rebuild(width: usize, elements: Vec<Element>, keep_barriers: bool) -> Circuit {
    let mut c = Circuit::new(width);
    for e in elements {
        match e {
            Element::Gate(g) => c.push(g).expect("qubits already validated"),
            Element::Barrier if keep_barriers => c.barrier(),
            Element::Barrier => {}
        }
    }
    c
}

/// Lower to `{X90, Y90, RZ, ZZ}`, unitary-equivalent up to global phase.
pub fn decompose_to_native(circuit: &Circuit) -> Result<Circuit, CompileError> {
    let mut lowered = Vec::with_capacity(circuit.elements().len() * 2);
    for e in circuit.elements() {
        match e {
            Element::Barrier => lowered.push(Element::Barrier),
            Element::Gate(g) => lowered.extend(expand(g).into_iter().map(Element::Gate)),
        }
    }
    let merged = merge_rotations(circuit.width(), &lowered);
    Ok(rebuild(circuit.width(), merged, false))
}

/// `(w_c, d_c)`: width and two-qubit gate count of a reference circuit,
/// counted before any compilation.
pub fn reference_dims(circuit: &Circuit) -> (usize, usize) {
    (circuit.width(), two_qubit_gate_count(circuit))
}

/// Pauli pairs commuting with `Z⊗Z` (0 = I, 1 = X, 2 = Y, 3 = Z).
const ZZ_FRAMES: [(u8, u8); 8] = [
    (0, 0),
    (3, 3),
    (3, 0),
    (0, 3),
    (1, 1),
    (2, 2),
    (1, 2),
    (2, 1),
];

fn pauli_gates(q: usize, kind: u8) -> Vec<Gate> {
    match kind {
        0 => vec![],
        1 => vec![Gate::x90(q), Gate::x90(q)],
        2 => vec![Gate::y90(q), Gate::y90(q)],
        _ => vec![Gate::rz(q, PI)],
    }
}

/// One physical realization of a logical circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    /// `map[logical] = physical`
    pub map: Vec<usize>,
    /// Native circuit over physical qubits.
    pub circuit: Circuit,
}

impl Variant {
    /// The variant expressed back on logical qubit labels; simulating this
    /// circuit gives histograms with the qubit map already undone.
    pub fn logical_circuit(&self) -> Circuit {
        let mut inverse = vec![usize::MAX; self.circuit.width()];
        for (logical, &physical) in self.map.iter().enumerate() {
            inverse[physical] = logical;
        }
        let mut c = Circuit::new(self.map.len());
        for g in self.circuit.gates() {
            c.push(g.relabeled(|q| inverse[q]))
                .expect("variant gates only touch mapped qubits");
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantSet {
    pub reference: Circuit,
    pub variants: Vec<Variant>,
    pub seed: u64,
}

impl VariantSet {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("variant set serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, CircuitError> {
        serde_json::from_str(text).map_err(|e| crate::circuit::json_error(&e))
    }
}

fn randomize_frames<R: Rng>(native: &Circuit, rng: &mut R) -> Circuit {
    let mut elements = Vec::new();
    for g in native.gates() {
        if let GateKind::Zz(_) = g.kind() {
            let (a, b) = (g.qubits()[0], g.qubits()[1]);
            let (pa, pb) = ZZ_FRAMES[rng.random_range(0..ZZ_FRAMES.len())];
            let frame: Vec<Gate> = pauli_gates(a, pa).into_iter().chain(pauli_gates(b, pb)).collect();
            elements.extend(frame.iter().copied().map(Element::Gate));
            elements.push(Element::Gate(*g));
            elements.extend(frame.into_iter().map(Element::Gate));
        } else {
            elements.push(Element::Gate(*g));
        }
    }
    rebuild(native.width(), merge_rotations(native.width(), &elements), false)
}

/// `n_variants` equivalent native circuits, each with an independent random
/// injective placement onto `physical_width` qubits and random Pauli frames
/// around the entanglers. Deterministic in `seed`.
pub fn generate_variants(
    circuit: &Circuit,
    n_variants: usize,
    physical_width: usize,
    seed: u64,
) -> Result<VariantSet, CompileError> {
    if n_variants < 1 {
        return Err(CompileError::Contract("n_variants must be at least 1".into()));
    }
    if physical_width < circuit.width() {
        return Err(CompileError::Contract(format!(
            "physical width {physical_width} is smaller than circuit width {}",
            circuit.width()
        )));
    }
    let native = decompose_to_native(circuit)?;
    let stream = SeedStream::new(seed, "variant");
    let variants = par::map_range(n_variants, |v| {
        let mut rng = stream.rng(v as u64);
        let map = sample(&mut rng, physical_width, circuit.width()).into_vec();
        let framed = randomize_frames(&native, &mut rng);
        let mut placed = Circuit::new(physical_width);
        for g in framed.gates() {
            placed
                .push(g.relabeled(|q| map[q]))
                .expect("placement is injective and in range");
        }
        Variant {
            map,
            circuit: placed,
        }
    });
    Ok(VariantSet {
        reference: circuit.clone(),
        variants,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::unitary;
    use crate::linalg::CMatrix;

    fn equivalent(a: &Circuit, b: &Circuit, tol: f64) -> bool {
        unitary(a)
            .unwrap()
            .approx_eq_up_to_phase(&unitary(b).unwrap(), tol)
    }

    #[test]
    fn each_composite_gate_lowers_to_one_zz() {
        for g in [
            Gate::cnot(0, 1),
            Gate::cnot(1, 0),
            Gate::cz(0, 1),
            Gate::cphase(1, 0, 0.7),
            Gate::h(1),
            Gate::xx(0, 1, 0.4),
        ] {
            let c = Circuit::from_gates(2, [g]).unwrap();
            let n = decompose_to_native(&c).unwrap();
            assert!(
                n.gates()
                    .all(|g| matches!(g.kind(), GateKind::X90 | GateKind::Y90 | GateKind::Rz(_) | GateKind::Zz(_))),
                "{g}"
            );
            assert!(equivalent(&c, &n, 1e-10), "{g}");
            assert_eq!(two_qubit_gate_count(&n), two_qubit_gate_count(&c), "{g}");
        }
    }

    #[test]
    fn cnot_and_cz_use_quarter_turn_zz() {
        let n = decompose_to_native(&Circuit::from_gates(2, [Gate::cnot(0, 1)]).unwrap()).unwrap();
        let zz: Vec<_> = n.gates().filter(|g| g.arity() == 2).collect();
        assert_eq!(zz.len(), 1);
        assert_eq!(zz[0].kind(), GateKind::Zz(FRAC_PI_4));
    }

    #[test]
    fn swap_costs_three_entanglers() {
        let c = Circuit::from_gates(2, [Gate::swap(0, 1)]).unwrap();
        let n = decompose_to_native(&c).unwrap();
        assert_eq!(two_qubit_gate_count(&n), 3);
        assert!(equivalent(&c, &n, 1e-10));
    }

    #[test]
    fn zero_phase_is_elided() {
        let c = Circuit::from_gates(2, [Gate::cphase(0, 1, 0.0)]).unwrap();
        let n = decompose_to_native(&c).unwrap();
        assert_eq!(n.gate_count(), 0);
    }

    #[test]
    fn adjacent_rz_merge_but_not_across_barriers() {
        let mut c = Circuit::new(1);
        c.extend([Gate::rz(0, 0.25), Gate::rz(0, 0.5)]).unwrap();
        c.barrier();
        c.push(Gate::rz(0, 0.25)).unwrap();
        let n = decompose_to_native(&c).unwrap();
        let angles: Vec<f64> = n.gates().filter_map(|g| g.kind().angle()).collect();
        assert_eq!(angles.len(), 2);
        assert!((angles[0] - 0.75).abs() < 1e-15);
        assert!(n.elements().iter().all(|e| matches!(e, Element::Gate(_))));
    }

    #[test]
    fn xx_wrapper_properties() {
        let xx = Gate::xx(0, 1, FRAC_PI_4);
        let seq = wrap_xx_as_zz(&xx).unwrap();
        let physical = seq
            .iter()
            .filter(|g| matches!(g.kind(), GateKind::X90 | GateKind::Y90))
            .count();
        assert_eq!(physical, 4);
        assert_eq!(seq.iter().filter(|g| g.arity() == 2).count(), 1);
        let wrapped = Circuit::from_gates(2, seq).unwrap();
        assert!(equivalent(&wrapped, &Circuit::from_gates(2, [xx]).unwrap(), 1e-10));

        let zero = Circuit::from_gates(2, wrap_xx_as_zz(&Gate::xx(0, 1, 0.0)).unwrap()).unwrap();
        assert!(unitary(&zero)
            .unwrap()
            .approx_eq_up_to_phase(&CMatrix::identity(4), 1e-10));

        let mut pair = wrap_xx_as_zz(&Gate::xx(0, 1, 0.3)).unwrap();
        pair.extend(wrap_xx_as_zz(&Gate::xx(0, 1, -0.3)).unwrap());
        assert!(unitary(&Circuit::from_gates(2, pair).unwrap())
            .unwrap()
            .approx_eq_up_to_phase(&CMatrix::identity(4), 1e-10));

        assert!(matches!(
            wrap_xx_as_zz(&Gate::zz(0, 1, 0.1)),
            Err(CompileError::Contract(_))
        ));
    }

    #[test]
    fn zz_from_xx_is_equivalent() {
        let zz = Gate::zz(1, 0, 0.37);
        let seq = Circuit::from_gates(2, zz_from_xx(&zz).unwrap()).unwrap();
        assert!(equivalent(&seq, &Circuit::from_gates(2, [zz]).unwrap(), 1e-10));
    }

    #[test]
    fn variant_contract_errors() {
        let c = Circuit::new(3);
        assert!(generate_variants(&c, 0, 3, 1).is_err());
        assert!(generate_variants(&c, 1, 2, 1).is_err());
    }

    #[test]
    fn reference_dims_count_pre_compilation_gates() {
        assert_eq!(reference_dims(&Circuit::new(1)), (1, 0));
        let c = Circuit::from_gates(3, (0..5).map(|i| Gate::cnot(i % 3, (i + 1) % 3))).unwrap();
        assert_eq!(reference_dims(&c), (3, 5));
    }
}
