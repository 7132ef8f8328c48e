//! Product-formula errors for anti-Hermitian generators.

use crate::error::{Error, Result};
use crate::linalg::{c, commutator, expm_antihermitian, identity, spectral_norm, CMat};

fn check(a: &CMat, b: &CMat, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !a.is_square() || a.shape() != b.shape() {
        return Err(Error::SizeMismatch { expected: a.nrows(), got: b.nrows() });
    }
    Ok(())
}

fn power(m: &CMat, mut n: usize) -> CMat {
    let mut acc = identity(m.nrows());
    let mut base = m.clone();
    while n > 0 {
        if n & 1 == 1 {
            acc = &acc * &base;
        }
        base = &base * &base;
        n >>= 1;
    }
    acc
}

/// `‖exp(A + B) - (exp(A/n) exp(B/n))^n‖₂`.
pub fn trotter_linear_error(a: &CMat, b: &CMat, n: usize) -> Result<f64> {
    check(a, b, n)?;
    let s = 1.0 / n as f64;
    let step = expm_antihermitian(&(a * c(s))) * expm_antihermitian(&(b * c(s)));
    Ok(spectral_norm(&(expm_antihermitian(&(a + b)) - power(&step, n))))
}

/// `‖exp([A, B]) - (exp(A/√n) exp(B/√n) exp(-A/√n) exp(-B/√n))^n‖₂`.
pub fn trotter_commutator_error(a: &CMat, b: &CMat, n: usize) -> Result<f64> {
    check(a, b, n)?;
    let s = 1.0 / (n as f64).sqrt();
    let ea = expm_antihermitian(&(a * c(s)));
    let eb = expm_antihermitian(&(b * c(s)));
    let step = &ea * &eb * ea.adjoint() * eb.adjoint();
    Ok(spectral_norm(&(expm_antihermitian(&commutator(a, b)) - power(&step, n))))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{embed, kron, pauli_x, pauli_y, pauli_z, I};

    fn ix() -> CMat {
        pauli_x().map(|z| z * I)
    }

    fn iz() -> CMat {
        pauli_z().map(|z| z * I)
    }

    #[test]
    fn commuting_generators_have_no_error() {
        for n in [1, 3, 17] {
            assert!(trotter_linear_error(&ix(), &ix(), n).unwrap() < 1e-12);
            assert!(trotter_commutator_error(&ix(), &ix(), n).unwrap() < 1e-12);
        }
    }

    #[test]
    fn linear_error_slope_is_minus_one() {
        let ns: Vec<usize> = (1..=10).map(|k| 1 << k).collect();
        let errs: Vec<f64> = ns.iter().map(|&n| trotter_linear_error(&ix(), &iz(), n).unwrap()).collect();
        let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        assert!((loglog_slope(&xs, &errs) + 1.0).abs() < 0.1);
        let bound = 5.0 * 2f64.exp();
        assert!(trotter_linear_error(&ix(), &iz(), 1).unwrap() <= bound);
    }

    #[test]
    fn commutator_error_slope_is_minus_half() {
        let ns: Vec<usize> = (1..=6).map(|k| 1 << (2 * k)).collect();
        let errs: Vec<f64> = ns.iter().map(|&n| trotter_commutator_error(&ix(), &iz(), n).unwrap()).collect();
        let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        assert!((loglog_slope(&xs, &errs) + 0.5).abs() < 0.1);
    }

    #[test]
    fn two_qubit_group_commutator_approaches_target() {
        let a = embed(&ix(), 0, 2);
        let b = kron(&pauli_z(), &pauli_z()).map(|z| z * I);
        // [iX1, iZ1Z2] = -[X1, Z1Z2] = 2i Y1Z2
        let expect = kron(&pauli_y(), &pauli_z()).map(|z| z * 2.0 * I);
        assert!((commutator(&a, &b) - expect).norm() < 1e-14);
        let e1 = trotter_commutator_error(&a, &b, 16).unwrap();
        let e2 = trotter_commutator_error(&a, &b, 4096).unwrap();
        assert!(e2 < e1 / 8.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(trotter_linear_error(&ix(), &ix(), 0).is_err());
        assert!(trotter_linear_error(&ix(), &embed(&ix(), 0, 2), 1).is_err());
    }
}
