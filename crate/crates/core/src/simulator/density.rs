//! Density-matrix evolution for small widths. `ρ` is stored as a vector on
//! `2n` qubits: row bits on qubits `0..n`, column bits on `n..2n`, so that
//! `ρ ↦ UρU†` is `U` on the low half and `U*` on the high half.

use num_complex::Complex64;

use super::state::{Kernel, StateVector};

#[derive(Clone, Debug)]
pub struct DensityMatrix {
    n: usize,
    vec: StateVector,
}

impl DensityMatrix {
    /// `|0…0⟩⟨0…0|`.
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            vec: StateVector::zero(2 * n),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// Entry `ρ[row, col]`.
    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.vec.amplitudes()[row | col << self.n]
    }

    pub fn trace(&self) -> f64 {
        (0..1usize << self.n).map(|i| self.entry(i, i).re).sum()
    }

    pub(crate) fn apply_kernel(&mut self, k: &Kernel) {
        self.vec.apply(k);
        self.vec.apply(&k.conjugate_shifted(self.n));
    }

    fn conjugate_by_pauli(&mut self, q: usize, kind: u8) {
        self.vec.apply_pauli(q, kind);
        self.vec.apply_pauli(q + self.n, kind);
        if kind == 2 {
            // Y* = −Y
            self.vec.scale(-1.0);
        }
    }

    /// `ρ ↦ (1−ε)ρ + ε/(4^k−1) Σ_{P≠I} PρP` on the listed qubits.
    pub(crate) fn depolarize(&mut self, qubits: &[usize], eps: f64) {
        let k = qubits.len();
        let terms = (1u32 << (2 * k)) - 1;
        let mut acc = self.vec.clone();
        acc.scale(1.0 - eps);
        let w = eps / terms as f64;
        for code in 1..=terms {
            let mut branch = self.clone();
            for (j, &q) in qubits.iter().enumerate() {
                branch.conjugate_by_pauli(q, ((code >> (2 * j)) & 3) as u8);
            }
            acc.add_scaled(&branch.vec, w);
        }
        self.vec = acc;
    }

    /// Outcome probabilities after independent readout flips per qubit.
    pub(crate) fn diagonal_with_flips(&self, flips: &[f64]) -> Vec<f64> {
        let mut p: Vec<f64> = (0..1usize << self.n)
            .map(|i| self.entry(i, i).re.max(0.0))
            .collect();
        for (q, &f) in flips.iter().enumerate() {
            if f == 0.0 {
                continue;
            }
            let bit = 1 << q;
            for i in 0..p.len() {
                if i & bit == 0 {
                    let (a, b) = (p[i], p[i | bit]);
                    p[i] = (1.0 - f) * a + f * b;
                    p[i | bit] = f * a + (1.0 - f) * b;
                }
            }
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;

    #[test]
    fn full_depolarization_of_ground_state() {
        let mut r = DensityMatrix::zero(1);
        r.depolarize(&[0], 1.0);
        assert!((r.entry(0, 0).re - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.entry(1, 1).re - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn two_qubit_depolarizing_preserves_trace_and_hits_mixture() {
        let mut r = DensityMatrix::zero(2);
        r.apply_kernel(&Kernel::for_gate(&Gate::y90(0)).unwrap());
        r.apply_kernel(&Kernel::for_gate(&Gate::xx(0, 1, 0.4)).unwrap());
        r.depolarize(&[0, 1], 15.0 / 16.0);
        assert!((r.trace() - 1.0).abs() < 1e-14);
        // ε = 15/16 is the fully mixing point of the two-qubit channel
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 0.25 } else { 0.0 };
                assert!((r.entry(i, j) - want).norm() < 1e-14);
            }
        }
    }
}
