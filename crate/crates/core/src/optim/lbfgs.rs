//! Projected L-BFGS for simple bounds.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub struct BoxOptions {
    pub max_iter: usize,
    pub memory: usize,
    /// Stop when the projected gradient's largest entry falls below this.
    pub gtol: f64,
    /// Stop after `patience` steps with relative decrease below this.
    pub ftol: f64,
    pub patience: usize,
}

impl Default for BoxOptions {
    fn default() -> Self {
        Self { max_iter: 500, memory: 12, gtol: 1e-7, ftol: 1e-12, patience: 5 }
    }
}

#[derive(Debug, Clone)]
pub struct BoxResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f` over `lo <= x <= hi`. `f` writes the gradient into its
/// second argument and returns the value.
pub fn minimize_box<F>(mut f: F, x0: &[f64], lo: &[f64], hi: &[f64], opts: &BoxOptions) -> BoxResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut evals = 1;
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut slow = 0;
    let mut converged = false;
    let mut iter = 0;
    let mut free = vec![true; n];
    let mut d = vec![0.0; n];
    let mut xn = vec![0.0; n];
    let mut gn = vec![0.0; n];
    while iter < opts.max_iter {
        let mut pg = 0.0f64;
        for i in 0..n {
            let at_lo = x[i] <= lo[i] && g[i] > 0.0;
            let at_hi = x[i] >= hi[i] && g[i] < 0.0;
            free[i] = !(at_lo || at_hi);
            if free[i] {
                pg = pg.max(g[i].abs());
            }
        }
        if pg < opts.gtol {
            converged = true;
            break;
        }
        iter += 1;

        // two-loop recursion on the free subspace
        for i in 0..n {
            d[i] = if free[i] { -g[i] } else { 0.0 };
        }
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &d);
            for i in 0..n {
                if free[i] {
                    d[i] -= a * y[i];
                }
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.back() {
            let gamma = dot(s, y) / dot(y, y);
            for v in d.iter_mut() {
                *v *= gamma;
            }
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            for i in 0..n {
                if free[i] {
                    d[i] += (a - b) * s[i];
                }
            }
        }
        if dot(&d, &g) >= 0.0 {
            hist.clear();
            for i in 0..n {
                d[i] = if free[i] { -g[i] } else { 0.0 };
            }
        }
        if hist.is_empty() {
            // first step: unit-length move at most
            let norm = dot(&d, &d).sqrt();
            if norm > 1.0 {
                d.iter_mut().for_each(|v| *v /= norm);
            }
        }

        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            for i in 0..n {
                xn[i] = x[i] + alpha * d[i];
            }
            project(&mut xn, lo, hi);
            let fnew = f(&xn, &mut gn);
            evals += 1;
            let decrease: f64 = (0..n).map(|i| g[i] * (xn[i] - x[i])).sum();
            if fnew.is_finite() && fnew <= fx + 1e-4 * decrease {
                let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
                let y: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
                let sy = dot(&s, &y);
                if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
                    hist.push_back((s, y, 1.0 / sy));
                    if hist.len() > opts.memory {
                        hist.pop_front();
                    }
                }
                let rel = (fx - fnew) / fx.abs().max(1e-12);
                slow = if rel < opts.ftol { slow + 1 } else { 0 };
                std::mem::swap(&mut x, &mut xn);
                std::mem::swap(&mut g, &mut gn);
                fx = fnew;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            if hist.is_empty() {
                break;
            }
            hist.clear();
            continue;
        }
        if slow >= opts.patience {
            converged = true;
            break;
        }
    }
    BoxResult { x, f: fx, iterations: iter, evaluations: evals, converged }
}
