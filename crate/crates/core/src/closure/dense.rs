//! Gram-Schmidt span tracking for dense Hermitian matrices.
//!
//! A `d x d` Hermitian matrix is flattened to `d^2` real coordinates
//! (diagonal entries, then `sqrt(2) Re` and `sqrt(2) Im` of the strict upper
//! triangle) so that the Euclidean product equals the Hilbert-Schmidt product.

use crate::linalg::{CMat, C64};

pub(crate) fn to_coords(m: &CMat) -> Vec<f64> {
    let d = m.nrows();
    let mut v = Vec::with_capacity(d * d);
    for i in 0..d {
        v.push(m[(i, i)].re);
    }
    let s2 = std::f64::consts::SQRT_2;
    for i in 0..d {
        for j in i + 1..d {
            // average the two triangles so tiny non-Hermitian roundoff is symmetrised
            let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            v.push(s2 * z.re);
            v.push(s2 * z.im);
        }
    }
    v
}

pub(crate) fn from_coords(v: &[f64], d: usize) -> CMat {
    let mut m = CMat::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = C64::new(v[i], 0.0);
    }
    let s2 = std::f64::consts::SQRT_2;
    let mut idx = d;
    for i in 0..d {
        for j in i + 1..d {
            let z = C64::new(v[idx] / s2, v[idx + 1] / s2);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            idx += 2;
        }
    }
    m
}

#[derive(Debug)]
pub(crate) struct DenseSpan {
    len: usize,
    basis: Vec<f64>,
    dim: usize,
    tol: f64,
}

impl DenseSpan {
    pub fn new(matrix_dim: usize, tol: f64) -> Self {
        Self { len: matrix_dim * matrix_dim, basis: Vec::new(), dim: 0, tol }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn project_out(&self, v: &mut [f64]) {
        let len = self.len;
        let coefs: Vec<f64> = self
            .basis
            .chunks_exact(len)
            .map(|b| b.iter().zip(v.iter()).map(|(x, y)| x * y).sum())
            .collect();
        for (b, c) in self.basis.chunks_exact(len).zip(coefs) {
            if c != 0.0 {
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= c * bi;
                }
            }
        }
    }

    /// Inserts a unit-norm coordinate vector if it leaves the span by more than
    /// `tol`; returns the orthonormalised new direction.
    pub fn insert(&mut self, mut v: Vec<f64>) -> Option<Vec<f64>> {
        self.project_out(&mut v);
        let n1 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n1 <= self.tol {
            return None;
        }
        // second pass keeps the basis orthogonal to working precision
        self.project_out(&mut v);
        let n2 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n2 <= self.tol {
            return None;
        }
        v.iter_mut().for_each(|x| *x /= n2);
        self.basis.extend_from_slice(&v);
        self.dim += 1;
        Some(v)
    }

    pub fn into_vectors(self) -> Vec<Vec<f64>> {
        self.basis.chunks_exact(self.len.max(1)).map(|c| c.to_vec()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hs_inner, pauli_y, pauli_z};

    #[test]
    fn coordinates_preserve_hs_product() {
        let a = pauli_y() + pauli_z().map(|x| x * 0.3);
        let b = pauli_y().map(|x| x * 2.0);
        let ca = to_coords(&a);
        let cb = to_coords(&b);
        let dot: f64 = ca.iter().zip(&cb).map(|(x, y)| x * y).sum();
        assert!((dot - hs_inner(&a, &b).re).abs() < 1e-14);
        assert!((from_coords(&ca, 2) - a).norm() < 1e-14);
    }
}
