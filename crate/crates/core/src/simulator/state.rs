//! State-vector kernels. Basis index bit `q` is qubit `q`.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::circuit::{Gate, GateKind};
use crate::par;


const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Precomputed action of one native gate.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Kernel {
    Dense1 { q: usize, m: [[Complex64; 2]; 2] },
    /// `(I − i·s·X)/√2`; `s = −1` is the complex conjugate.
    X90 { q: usize, s: f64 },
    /// `(I − iY)/√2`, a real matrix.
    Y90 { q: usize },
    Diag1 { q: usize, d0: Complex64, d1: Complex64 },
    /// `cos χ · I − i sin χ · X⊗X`
    Xx { a: usize, b: usize, c: f64, s: f64 },
    /// even parity × `even`, odd parity × `odd`
    Zz { a: usize, b: usize, even: Complex64, odd: Complex64 },
}

impl Kernel {
    /// Pauli `kind` (1 = X, 2 = Y, 3 = Z) on qubit `q`.
    pub(crate) fn pauli(q: usize, kind: u8) -> Option<Kernel> {
        let (o, l, i) = (Complex64::new(1.0, 0.0), ZERO, Complex64::new(0.0, 1.0));
        Some(match kind {
            1 => Kernel::Dense1 { q, m: [[l, o], [o, l]] },
            2 => Kernel::Dense1 { q, m: [[l, -i], [i, l]] },
            3 => Kernel::Diag1 { q, d0: o, d1: -o },
            _ => return None,
        })
    }

    /// Acts within every aligned block of `2^tile_bits` amplitudes.
    fn is_tile_local(&self, tile_bits: usize) -> bool {
        match *self {
            Kernel::Diag1 { .. } | Kernel::Zz { .. } => true,
            Kernel::Dense1 { q, .. } | Kernel::X90 { q, .. } | Kernel::Y90 { q } => q < tile_bits,
            Kernel::Xx { a, b, .. } => a < tile_bits && b < tile_bits,
        }
    }

    /// Kernel for a native gate; `None` for composite gates.
    pub(crate) fn for_gate(gate: &Gate) -> Option<Kernel> {
        let q = gate.qubits();
        Some(match gate.kind() {
            GateKind::X90 => Kernel::X90 { q: q[0], s: 1.0 },
            GateKind::Y90 => Kernel::Y90 { q: q[0] },
            GateKind::Rz(t) => Kernel::Diag1 {
                q: q[0],
                d0: Complex64::from_polar(1.0, -t / 2.0),
                d1: Complex64::from_polar(1.0, t / 2.0),
            },
            GateKind::Xx(chi) => Kernel::Xx {
                a: q[0],
                b: q[1],
                c: chi.cos(),
                s: chi.sin(),
            },
            GateKind::Zz(chi) => Kernel::Zz {
                a: q[0],
                b: q[1],
                even: Complex64::from_polar(1.0, -chi),
                odd: Complex64::from_polar(1.0, chi),
            },
            _ => return None,
        })
    }

    /// Same kernel with every matrix entry conjugated (`U*`), acting on
    /// qubits shifted by `offset`. Used to evolve vectorized density matrices.
    pub(crate) fn conjugate_shifted(&self, offset: usize) -> Kernel {
        match *self {
            Kernel::Dense1 { q, m } => Kernel::Dense1 {
                q: q + offset,
                m: [[m[0][0].conj(), m[0][1].conj()], [m[1][0].conj(), m[1][1].conj()]],
            },
            Kernel::X90 { q, s } => Kernel::X90 { q: q + offset, s: -s },
            Kernel::Y90 { q } => Kernel::Y90 { q: q + offset },
            Kernel::Diag1 { q, d0, d1 } => Kernel::Diag1 {
                q: q + offset,
                d0: d0.conj(),
                d1: d1.conj(),
            },
            // conj(−i sin χ) = +i sin χ
            Kernel::Xx { a, b, c, s } => Kernel::Xx {
                a: a + offset,
                b: b + offset,
                c,
                s: -s,
            },
            Kernel::Zz { a, b, even, odd } => Kernel::Zz {
                a: a + offset,
                b: b + offset,
                even: even.conj(),
                odd: odd.conj(),
            },
        }
    }
}

// 2^14 amplitudes = 256 KiB, comfortably inside L2.
const TILE_BITS: usize = 14;

#[inline]
fn insert_zero_bit(i: usize, q: usize) -> usize {
    let low = i & ((1 << q) - 1);
    ((i >> q) << (q + 1)) | low
}

/// A tile-local kernel ready for repeated application. Diagonal kernels become
/// a phase pattern with the period of their highest in-tile qubit; qubits at
/// or above the tile size only select which of two patterns a tile uses.
enum Prepared {
    Kernel(Kernel),
    Diagonal {
        patterns: [Vec<Complex64>; 2],
        high_mask: usize,
    },
}

impl Prepared {
    fn new(k: &Kernel, tile_bits: usize) -> Self {
        let (bits, values) = match *k {
            Kernel::Diag1 { q, d0, d1 } => (vec![q], [d0, d1]),
            Kernel::Zz { a, b, even, odd } => (vec![a, b], [even, odd]),
            _ => return Prepared::Kernel(*k),
        };
        let low_mask: usize = bits.iter().filter(|&&q| q < tile_bits).map(|q| 1 << q).sum();
        let high_mask: usize = bits.iter().filter(|&&q| q >= tile_bits).map(|q| 1 << q).sum();
        let period = if low_mask == 0 {
            1
        } else {
            2usize << (usize::BITS - 1 - low_mask.leading_zeros())
        };
        let pattern = |flip: usize| -> Vec<Complex64> {
            (0..period)
                .map(|j| values[((j & low_mask).count_ones() as usize + flip) & 1])
                .collect()
        };
        Prepared::Diagonal {
            patterns: [pattern(0), pattern(1)],
            high_mask,
        }
    }

    fn apply(&self, tile: &mut [Complex64], base: usize) {
        match self {
            Prepared::Kernel(k) => apply_slice(tile, base, k),
            Prepared::Diagonal {
                patterns,
                high_mask,
            } => {
                let p = &patterns[(base & high_mask).count_ones() as usize & 1];
                for chunk in tile.chunks_exact_mut(p.len()) {
                    for (a, d) in chunk.iter_mut().zip(p) {
                        *a *= d;
                    }
                }
            }
        }
    }
}

/// Apply `k` to `amps`, whose first element has global index `base`. The
/// caller guarantees `k` does not couple `amps` to amplitudes outside it.
fn apply_slice(amps: &mut [Complex64], base: usize, k: &Kernel) {
    match *k {
        Kernel::Dense1 { q, m } => {
            let half = 1usize << q;
            for block in amps.chunks_exact_mut(2 * half) {
                let (lo, hi) = block.split_at_mut(half);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (a, b) = (*x, *y);
                    *x = m[0][0] * a + m[0][1] * b;
                    *y = m[1][0] * a + m[1][1] * b;
                }
            }
        }
        Kernel::X90 { q, s } => {
            let half = 1usize << q;
            for block in amps.chunks_exact_mut(2 * half) {
                let (lo, hi) = block.split_at_mut(half);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (a, b) = (*x, *y);
                    *x = Complex64::new(a.re + s * b.im, a.im - s * b.re) * FRAC_1_SQRT_2;
                    *y = Complex64::new(b.re + s * a.im, b.im - s * a.re) * FRAC_1_SQRT_2;
                }
            }
        }
        Kernel::Y90 { q } => {
            let half = 1usize << q;
            for block in amps.chunks_exact_mut(2 * half) {
                let (lo, hi) = block.split_at_mut(half);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (a, b) = (*x, *y);
                    *x = (a - b) * FRAC_1_SQRT_2;
                    *y = (a + b) * FRAC_1_SQRT_2;
                }
            }
        }
        Kernel::Diag1 { q, d0, d1 } => {
            let d = [d0, d1];
            for (i, a) in amps.iter_mut().enumerate() {
                *a *= d[(base + i) >> q & 1];
            }
        }
        Kernel::Xx { a, b, c, s } => {
            let mask = (1usize << a) | (1usize << b);
            let ms = Complex64::new(0.0, -s);
            // each {i, i^mask} orbit once, from its member with bit a clear
            for k in 0..amps.len() / 2 {
                let i = insert_zero_bit(k, a);
                let j = i ^ mask;
                let (x, y) = (amps[i], amps[j]);
                amps[i] = x * c + ms * y;
                amps[j] = y * c + ms * x;
            }
        }
        Kernel::Zz { a, b, even, odd } => {
            let d = [even, odd];
            for (i, amp) in amps.iter_mut().enumerate() {
                let g = base + i;
                *amp *= d[(g >> a ^ g >> b) & 1];
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `n` qubits.
    pub fn zero(n: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Self { n, amps }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(Complex64::norm_sqr).collect()
    }

    pub(crate) fn apply(&mut self, k: &Kernel) {
        apply_slice(&mut self.amps, 0, k);
    }

    /// Apply `kernels` in order. Runs of kernels that never couple amplitudes
    /// across cache-sized tiles are applied tile by tile, so the state is
    /// streamed through memory once per run instead of once per gate. Tiles
    /// are processed in parallel when `parallel` is set; the result does not
    /// depend on it.
    pub(crate) fn apply_all(&mut self, kernels: &[Kernel], parallel: bool) {
        let tile_bits = self.n.min(TILE_BITS);
        let mut i = 0;
        while i < kernels.len() {
            let run = kernels[i..]
                .iter()
                .take_while(|k| k.is_tile_local(tile_bits))
                .count();
            if run == 0 {
                apply_slice(&mut self.amps, 0, &kernels[i]);
                i += 1;
                continue;
            }
            let group: Vec<Prepared> = kernels[i..i + run]
                .iter()
                .map(|k| Prepared::new(k, tile_bits))
                .collect();
            par::for_each_chunk_mut(&mut self.amps, 1 << tile_bits, parallel, |t, tile| {
                let base = t << tile_bits;
                for k in &group {
                    k.apply(tile, base);
                }
            });
            i += run;
        }
    }

    /// Apply Pauli `kind` (1 = X, 2 = Y, 3 = Z) to qubit `q`.
    pub(crate) fn apply_pauli(&mut self, q: usize, kind: u8) {
        let bit = 1 << q;
        match kind {
            0 => {}
            1 => {
                for i in 0..self.amps.len() / 2 {
                    let i0 = insert_zero_bit(i, q);
                    self.amps.swap(i0, i0 | bit);
                }
            }
            2 => {
                // Y|0⟩ = i|1⟩, Y|1⟩ = −i|0⟩
                let im = Complex64::new(0.0, 1.0);
                for i in 0..self.amps.len() / 2 {
                    let i0 = insert_zero_bit(i, q);
                    let i1 = i0 | bit;
                    let (x, y) = (self.amps[i0], self.amps[i1]);
                    self.amps[i0] = -im * y;
                    self.amps[i1] = im * x;
                }
            }
            _ => {
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & bit != 0 {
                        *a = -*a;
                    }
                }
            }
        }
    }

    pub(crate) fn scale(&mut self, s: f64) {
        for a in &mut self.amps {
            *a *= s;
        }
    }

    pub(crate) fn add_scaled(&mut self, other: &StateVector, s: f64) {
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += b * s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{unitary, Circuit};

    fn run(c: &Circuit) -> StateVector {
        let mut s = StateVector::zero(c.width());
        for g in c.gates() {
            s.apply(&Kernel::for_gate(g).unwrap());
        }
        s
    }

    #[test]
    fn kernels_match_unitary_columns() {
        let c = Circuit::from_gates(
            3,
            [
                Gate::x90(0),
                Gate::y90(2),
                Gate::xx(2, 0, 0.3),
                Gate::rz(1, 1.1),
                Gate::x90(1),
                Gate::zz(1, 2, -0.8),
                Gate::xx(0, 1, 1.3),
            ],
        )
        .unwrap();
        let s = run(&c);
        let u = unitary(&c).unwrap();
        for (i, a) in s.amplitudes().iter().enumerate() {
            assert!((a - u[(i, 0)]).norm() < 1e-12);
        }
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn paulis_match_matrices() {
        let c = Circuit::from_gates(2, [Gate::x90(0), Gate::y90(1), Gate::xx(0, 1, 0.2)]).unwrap();
        let base = run(&c);
        for kind in 1..=3u8 {
            let mut s = base.clone();
            s.apply_pauli(1, kind);
            let p = crate::linalg::pauli(kind);
            for i in 0..4usize {
                let (b, rest) = (i >> 1 & 1, i & 1);
                let expect: Complex64 = (0..2)
                    .map(|k| p[(b, k)] * base.amplitudes()[rest | k << 1])
                    .sum();
                assert!((s.amplitudes()[i] - expect).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn tiled_batch_matches_gate_by_gate() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let n = 16;
        let mut kernels = Vec::new();
        for _ in 0..120 {
            let a = rng.random_range(0..n);
            let b = (a + rng.random_range(1..n)) % n;
            let g = match rng.random_range(0..5) {
                0 => Gate::x90(a),
                1 => Gate::y90(a),
                2 => Gate::rz(a, rng.random_range(-3.0..3.0)),
                3 => Gate::xx(a, b, rng.random_range(-1.0..1.0)),
                _ => Gate::zz(a, b, rng.random_range(-1.0..1.0)),
            };
            kernels.push(Kernel::for_gate(&g).unwrap());
            if rng.random_bool(0.1) {
                kernels.push(Kernel::pauli(b, rng.random_range(1..=3)).unwrap());
            }
        }
        let mut one = StateVector::zero(n);
        for k in &kernels {
            one.apply(k);
        }
        let mut batch = StateVector::zero(n);
        batch.apply_all(&kernels, false);
        let mut par = StateVector::zero(n);
        par.apply_all(&kernels, true);
        assert_eq!(par, batch);
        for (x, y) in one.amplitudes().iter().zip(batch.amplitudes()) {
            assert!((x - y).norm() < 1e-13);
        }
    }
}

