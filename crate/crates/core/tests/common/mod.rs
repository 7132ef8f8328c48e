//! Independent dense oracles for integration tests. Nothing here calls the
//! library's matrix exponential, Pauli algebra or Hamiltonian builders.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64 as C;

pub type M = DMatrix<C>;

pub fn eye(d: usize) -> M {
    M::identity(d, d)
}

pub fn x() -> M {
    M::from_row_slice(2, 2, &[C::new(0.0, 0.0), C::new(1.0, 0.0), C::new(1.0, 0.0), C::new(0.0, 0.0)])
}

pub fn y() -> M {
    M::from_row_slice(2, 2, &[C::new(0.0, 0.0), C::new(0.0, -1.0), C::new(0.0, 1.0), C::new(0.0, 0.0)])
}

/// Dense matrix of a Pauli string such as `XIZ`.
pub fn pauli_string(s: &str) -> M {
    let n = s.len();
    let ops: Vec<(usize, M)> = s
        .chars()
        .enumerate()
        .map(|(i, ch)| {
            let m = match ch {
                'X' => x(),
                'Y' => y(),
                'Z' => z(),
                _ => eye(2),
            };
            (i + 1, m)
        })
        .collect();
    chain_op(n, &ops)
}

pub fn z() -> M {
    M::from_row_slice(2, 2, &[C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(-1.0, 0.0)])
}

/// `|r><r|` with `|r> = |1>`.
pub fn nr() -> M {
    M::from_row_slice(2, 2, &[C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(1.0, 0.0)])
}

/// Tensor product of single-site factors; `ops[0]` is site 1, the most
/// significant factor.
pub fn chain_op(n: usize, ops: &[(usize, M)]) -> M {
    let mut out = M::from_element(1, 1, C::new(1.0, 0.0));
    for site in 1..=n {
        let f = ops.iter().find(|(s, _)| *s == site).map(|(_, m)| m.clone()).unwrap_or_else(|| eye(2));
        out = out.kronecker(&f);
    }
    out
}

/// `exp(A)` by scaling, Taylor series to machine precision, and squaring.
pub fn expm(a: &M) -> M {
    let norm: f64 = a.iter().map(|v| v.norm()).sum::<f64>().max(1e-300);
    let s = norm.log2().ceil().max(0.0) as i32 + 1;
    let b = a * C::new(0.5f64.powi(s), 0.0);
    let mut term = eye(a.nrows());
    let mut sum = eye(a.nrows());
    for k in 1..40 {
        term = &term * &b * C::new(1.0 / k as f64, 0.0);
        sum += &term;
        if term.iter().map(|v| v.norm()).sum::<f64>() < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// `exp(-i t H)`.
pub fn evolve(h: &M, t: f64) -> M {
    expm(&(h * C::new(0.0, -t)))
}

/// `Σ_{j=2}^{N-1} Z_{j-1} X_j Z_{j+1}`.
pub fn zxz(n: usize) -> M {
    let d = 1 << n;
    let mut h = M::zeros(d, d);
    for j in 2..n {
        h += chain_op(n, &[(j - 1, z()), (j, x()), (j + 1, z())]);
    }
    h
}

pub const C6: f64 = 862_690.0 * std::f64::consts::TAU;

/// Rydberg chain Hamiltonian in rad/µs for controls in rad/µs.
pub fn rydberg(n: usize, spacing: f64, omega: f64, delta: f64) -> M {
    let d = 1 << n;
    let mut h = M::zeros(d, d);
    for j in 1..=n {
        h += chain_op(n, &[(j, x())]) * C::new(omega / 2.0, 0.0);
        h -= chain_op(n, &[(j, nr())]) * C::new(delta, 0.0);
        for l in j + 1..=n {
            let r = spacing * (l - j) as f64;
            h += chain_op(n, &[(j, nr()), (l, nr())]) * C::new(C6 / r.powi(6), 0.0);
        }
    }
    h
}

/// Midpoint-rule propagation of piecewise-linear knots (rad/µs).
pub fn propagate(n: usize, spacing: f64, t: &[f64], omega: &[f64], delta: &[f64], substeps: usize) -> M {
    let mut u = eye(1 << n);
    for k in 0..t.len() - 1 {
        let h = (t[k + 1] - t[k]) / substeps as f64;
        for s in 0..substeps {
            let w = (s as f64 + 0.5) / substeps as f64;
            let o = omega[k] + w * (omega[k + 1] - omega[k]);
            let dl = delta[k] + w * (delta[k + 1] - delta[k]);
            u = evolve(&rydberg(n, spacing, o, dl), h) * u;
        }
    }
    u
}

/// `|Tr(A† B)|² / d²`.
pub fn trace_fidelity(a: &M, b: &M) -> f64 {
    let d = a.nrows() as f64;
    (a.adjoint() * b).trace().norm_sqr() / (d * d)
}

pub fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}
