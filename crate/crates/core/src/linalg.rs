//! Small dense complex matrices used for gate unitaries and test oracles.

use std::ops::{Index, IndexMut, Mul};

use num_complex::Complex64;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Row-major square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[&[Complex64]]) -> Self {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            assert_eq!(row.len(), dim, "matrix must be square");
            data.extend_from_slice(row);
        }
        Self { dim, data }
    }

    pub fn diagonal(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn dagger(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for r in 0..self.dim {
            for c in 0..self.dim {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn kron(&self, other: &Self) -> Self {
        let dim = self.dim * other.dim;
        let mut out = Self::zeros(dim);
        for r1 in 0..self.dim {
            for c1 in 0..self.dim {
                let a = self[(r1, c1)];
                if a == ZERO {
                    continue;
                }
                for r2 in 0..other.dim {
                    for c2 in 0..other.dim {
                        out[(r1 * other.dim + r2, c1 * other.dim + c2)] = a * other[(r2, c2)];
                    }
                }
            }
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Largest elementwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Distance to `other` after removing the best global phase.
    pub fn phase_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        // <other, self> carries the relative phase.
        let overlap: Complex64 = other
            .data
            .iter()
            .zip(&self.data)
            .map(|(b, a)| b.conj() * a)
            .sum();
        if overlap.norm() < 1e-300 {
            return self.max_abs_diff(other).max(1.0);
        }
        let phase = overlap / overlap.norm();
        self.max_abs_diff(&other.scale(phase))
    }

    pub fn approx_eq_up_to_phase(&self, other: &Self, tol: f64) -> bool {
        self.phase_distance(other) <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        (&self.dagger() * self).max_abs_diff(&Self::identity(self.dim)) <= tol
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.dim + c]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = CMatrix::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a == ZERO {
                    continue;
                }
                for c in 0..n {
                    out.data[r * n + c] += a * rhs.data[k * n + c];
                }
            }
        }
        out
    }
}

/// The four single-qubit Pauli matrices indexed I, X, Y, Z.
pub fn pauli(index: u8) -> CMatrix {
    match index {
        0 => CMatrix::identity(2),
        1 => CMatrix::from_rows(&[&[ZERO, ONE], &[ONE, ZERO]]),
        2 => CMatrix::from_rows(&[&[ZERO, -I], &[I, ZERO]]),
        3 => CMatrix::diagonal(&[ONE, -ONE]),
        _ => panic!("pauli index {index} out of range"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_algebra() {
        let x = pauli(1);
        let y = pauli(2);
        let z = pauli(3);
        // XY = iZ
        assert!((&x * &y).max_abs_diff(&z.scale(I)) < 1e-15);
        for p in 0..4 {
            assert!((&pauli(p) * &pauli(p)).max_abs_diff(&CMatrix::identity(2)) < 1e-15);
        }
    }

    #[test]
    fn phase_distance_ignores_global_phase() {
        let z = pauli(3);
        let shifted = z.scale(Complex64::from_polar(1.0, 0.7));
        assert!(z.phase_distance(&shifted) < 1e-14);
        assert!(z.phase_distance(&pauli(1)) > 0.5);
    }

    #[test]
    fn kron_dimensions_and_values() {
        let xz = pauli(1).kron(&pauli(3));
        assert_eq!(xz.dim(), 4);
        assert_eq!(xz[(0, 2)], ONE);
        assert_eq!(xz[(1, 3)], -ONE);
    }
}
