//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn dagger(a: &CMat) -> CMat {
    a.adjoint()
}

/// Hilbert-Schmidt inner product `Tr(A^dagger B)`.
pub fn hs_inner(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest absolute entry of `A - A^dagger`.
pub fn hermiticity_defect(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigendecomposition of a Hermitian matrix: real eigenvalues and unitary eigenvectors.
pub fn eigh(h: &CMat) -> (DVector<f64>, CMat) {
    let eig = SymmetricEigen::new(h.clone());
    (eig.eigenvalues, eig.eigenvectors)
}

/// `exp(-i H t)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMat, t: f64) -> CMat {
    let (vals, vecs) = eigh(h);
    let phases = DVector::from_iterator(vals.len(), vals.iter().map(|&l| (-I * l * t).exp()));
    scale_columns_times_adjoint(&vecs, &phases)
}

/// `exp(A)` for anti-Hermitian `A`, via the Hermitian matrix `iA`.
pub fn expm_antihermitian(a: &CMat) -> CMat {
    // exp(A) = exp(-i (iA))
    let h = a.map(|x| x * I);
    let h = (&h + h.adjoint()).map(|x| x * 0.5);
    expm_hermitian(&h, 1.0)
}

/// `V diag(d) V^dagger`.
pub fn scale_columns_times_adjoint(v: &CMat, d: &CVec) -> CMat {
    let mut vd = v.clone();
    for (j, mut col) in vd.column_iter_mut().enumerate() {
        col *= d[j];
    }
    vd * v.adjoint()
}

/// Spectral (operator 2-) norm.
pub fn spectral_norm(a: &CMat) -> f64 {
    let svd = a.clone().svd(false, false);
    svd.singular_values.iter().cloned().fold(0.0, f64::max)
}

/// Deviation of `U^dagger U` from the identity in the max-abs entry norm.
pub fn unitarity_defect(u: &CMat) -> f64 {
    let p = u.adjoint() * u;
    let n = p.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((p[(i, j)] - target).norm());
        }
    }
    worst
}

pub fn trace(a: &CMat) -> C64 {
    a.diagonal().iter().sum()
}

/// Single-qubit operator `op` embedded at 0-based qubit `q` of an `n`-qubit register.
/// Qubit 0 is the most significant tensor factor.
pub fn embed(op: &CMat, q: usize, n: usize) -> CMat {
    let mut acc = identity(1);
    for k in 0..n {
        acc = if k == q { kron(&acc, op) } else { kron(&acc, &identity(2)) };
    }
    acc
}

pub fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_x_rotation_matches_closed_form() {
        let x = pauli_x();
        let t = 0.37;
        let u = expm_hermitian(&x, t);
        let expect = identity(2).map(|v| v * t.cos()) - x.map(|v| v * I * t.sin());
        assert!(frobenius(&(u - expect)) < 1e-13);
    }

    #[test]
    fn spectral_norm_of_diag() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0), c(-3.0), c(2.0)]));
        assert!((spectral_norm(&m) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn embed_orders_qubits_big_endian() {
        let z0 = embed(&pauli_z(), 0, 2);
        // |10> has index 2 and qubit 0 excited
        assert_eq!(z0[(2, 2)], -ONE);
        assert_eq!(z0[(1, 1)], ONE);
    }
}
