//! Pulse synthesis for global Rydberg controls.
//!
//! Both optimizers work on piecewise-linear pulses with knot values in MHz and
//! share [`ControlModel`], which propagates one knot interval with the same
//! exponential midpoint rule as [`crate::propagation::propagate_unitary`] and
//! back-propagates exact derivatives of the sub-step exponentials.

mod direct;
mod grape;
mod lbfgs;

pub use direct::{direct_optimize, tau_sweep, DirectOptions, Initialization, SweepEntry, Trajectory};
pub use grape::{grape_gradient_check, grape_loss_and_gradient, grape_optimize, GrapeOptions, GrapeProblem};
pub use lbfgs::{minimize_box, BoxOptions, BoxResult};

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{eigh, expm_hermitian, CMat, CVec, C64};
use crate::models::{mhz, zxz_hamiltonian, RydbergSystem};
use crate::parallel::parallel_map;
use crate::propagation::{propagate_unitary, ConstraintProfile, ControlPulse, PropagateOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityKind {
    /// `|Tr(U† V)|² / d²`.
    #[default]
    SquaredTrace,
    /// `|Tr(U† V)| / d`.
    LinearTrace,
}

pub fn unitary_fidelity(u: &CMat, v: &CMat) -> Result<f64> {
    unitary_fidelity_with(u, v, FidelityKind::SquaredTrace)
}

pub fn unitary_fidelity_with(u: &CMat, v: &CMat, kind: FidelityKind) -> Result<f64> {
    if u.shape() != v.shape() || !u.is_square() {
        return Err(Error::SizeMismatch { expected: u.nrows(), got: v.nrows() });
    }
    let d = u.nrows() as f64;
    let t: C64 = u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
    Ok(match kind {
        FidelityKind::SquaredTrace => t.norm_sqr() / (d * d),
        FidelityKind::LinearTrace => t.norm() / d,
    })
}

/// Haar-random pure states from normalized complex Gaussian vectors.
pub fn haar_states(dim: usize, n: usize, seed: u64) -> Vec<CVec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let v = CVec::from_iterator(
                dim,
                (0..dim).map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))),
            );
            let norm = v.norm();
            v / C64::new(norm, 0.0)
        })
        .collect()
}

/// Mean of `|<φ| U† V |φ>|²` over seeded Haar-random states.
pub fn avg_state_fidelity(u: &CMat, v: &CMat, n_samples: usize, seed: u64) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if u.shape() != v.shape() {
        return Err(Error::SizeMismatch { expected: u.nrows(), got: v.nrows() });
    }
    let w = u.adjoint() * v;
    let states = haar_states(u.nrows(), n_samples, seed);
    Ok(states.iter().map(|p| (p.adjoint() * &w * p)[(0, 0)].norm_sqr()).sum::<f64>() / n_samples as f64)
}

/// `exp(-i τ Σ_j Z_{j-1} X_j Z_{j+1})` with `J_eff = 1`.
pub fn zxz_target(n: usize, tau: f64) -> Result<CMat> {
    Ok(expm_hermitian(&zxz_hamiltonian(n, 1.0)?.to_dense()?, tau))
}

/// Default sub-steps per 0.05 µs knot interval (0.01 µs each).
pub const DEFAULT_SUBSTEPS: usize = 5;

/// Rydberg dynamics with controls in MHz.
#[derive(Debug, Clone)]
pub struct ControlModel {
    pub sys: RydbergSystem,
    pub substeps: usize,
    /// `∂H/∂Ω` per MHz.
    d_omega: CMat,
    /// `∂H/∂Δ` per MHz (diagonal).
    d_delta: Vec<f64>,
}

struct SubStep {
    vecs: CMat,
    vals: Vec<f64>,
    exp: CMat,
    weight: f64,
}

/// Forward data for one knot interval.
pub struct IntervalCache {
    steps: Vec<SubStep>,
    /// Product of the sub-step exponentials before each sub-step.
    before: Vec<CMat>,
    pub phi: CMat,
    h: f64,
}

impl ControlModel {
    pub fn new(sys: RydbergSystem, substeps: usize) -> Result<Self> {
        if substeps == 0 {
            return Err(Error::InvalidArgument("substeps must be at least 1".into()));
        }
        let d_omega = sys.drive.map(|z| z * PI);
        let d_delta = sys.excitations.iter().map(|e| -TAU * e).collect();
        Ok(Self { sys, substeps, d_omega, d_delta })
    }

    pub fn dim(&self) -> usize {
        self.sys.dim()
    }

    pub fn hamiltonian_mhz(&self, omega: f64, delta: f64) -> CMat {
        self.sys.hamiltonian(mhz(omega), mhz(delta))
    }

    /// Propagator over one interval of length `dt` with controls moving
    /// linearly from `u0` to `u1` (MHz).
    pub fn interval(&self, u0: [f64; 2], u1: [f64; 2], dt: f64) -> IntervalCache {
        let m = self.substeps;
        let h = dt / m as f64;
        let d = self.dim();
        let mut acc = CMat::identity(d, d);
        let mut steps = Vec::with_capacity(m);
        let mut before = Vec::with_capacity(m);
        for s in 0..m {
            let w = (s as f64 + 0.5) / m as f64;
            let o = u0[0] + w * (u1[0] - u0[0]);
            let de = u0[1] + w * (u1[1] - u0[1]);
            let (vals, vecs) = eigh(&self.hamiltonian_mhz(o, de));
            let mut vd = vecs.clone();
            for (j, mut col) in vd.column_iter_mut().enumerate() {
                col *= C64::new(0.0, -h * vals[j]).exp();
            }
            let exp = vd * vecs.adjoint();
            before.push(acc.clone());
            acc = &exp * acc;
            steps.push(SubStep { vecs, vals: vals.iter().copied().collect(), exp, weight: w });
        }
        IntervalCache { steps, before, phi: acc, h }
    }

    /// Given `G` with `dS = Re Tr(G† dΦ)`, returns `(∂S/∂u0, ∂S/∂u1)` in MHz.
    pub fn interval_grad(&self, cache: &IntervalCache, g: &CMat) -> ([f64; 2], [f64; 2]) {
        let mut g0 = [0.0; 2];
        let mut g1 = [0.0; 2];
        let mut lam = g.clone();
        let h = cache.h;
        for s in (0..cache.steps.len()).rev() {
            let st = &cache.steps[s];
            let gs = &lam * cache.before[s].adjoint();
            let vh = st.vecs.adjoint();
            let ghat = &vh * &gs * &st.vecs;
            let mx = &vh * &self.d_omega * &st.vecs;
            let mut vn = vh.clone();
            for (i, mut col) in vn.column_iter_mut().enumerate() {
                col *= C64::new(self.d_delta[i], 0.0);
            }
            let mn = vn * &st.vecs;
            let n = st.vals.len();
            let (mut dom, mut dde) = (0.0, 0.0);
            for j in 0..n {
                for i in 0..n {
                    let f = frechet_coeff(st.vals[i], st.vals[j], h);
                    let p = ghat[(i, j)].conj() * f;
                    dom += (p * mx[(i, j)]).re;
                    dde += (p * mn[(i, j)]).re;
                }
            }
            let w = st.weight;
            g0[0] += (1.0 - w) * dom;
            g0[1] += (1.0 - w) * dde;
            g1[0] += w * dom;
            g1[1] += w * dde;
            lam = st.exp.adjoint() * lam;
        }
        (g0, g1)
    }

    /// Full propagator of a knot sequence (MHz) on a uniform grid.
    pub fn rollout(&self, omega: &[f64], delta: &[f64], dt: f64) -> CMat {
        let d = self.dim();
        let mut u = CMat::identity(d, d);
        for k in 0..omega.len() - 1 {
            u = self.interval([omega[k], delta[k]], [omega[k + 1], delta[k + 1]], dt).phi * u;
        }
        u
    }
}

/// Divided difference of `exp(-i h λ)` between `a` and `b`.
fn frechet_coeff(a: f64, b: f64, h: f64) -> C64 {
    let mid = 0.5 * (a + b);
    let x = 0.5 * h * (a - b);
    let sinc = if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
    C64::new(0.0, -h * sinc) * C64::new(0.0, -h * mid).exp()
}

/// Knot values in MHz on `t_k = k dt` as a validated-ready pulse.
pub fn pulse_from_knots(omega: &[f64], delta: &[f64], dt: f64) -> Result<ControlPulse> {
    let t = (0..omega.len()).map(|k| k as f64 * dt).collect();
    ControlPulse::from_mhz(t, omega, delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Grape,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizationReport {
    pub method: Method,
    pub seed: u64,
    /// Recomputed by an independent rollout of the returned pulse.
    pub final_fidelity: f64,
    /// The optimizer's own estimate.
    pub model_fidelity: f64,
    pub iterations: usize,
    pub converged: bool,
    pub feasibility_residual: f64,
    pub constraint_violations: BTreeMap<String, f64>,
    pub pulse_valid: bool,
    pub wall_time_secs: f64,
    pub duration_us: f64,
    pub n_knots: usize,
    /// Largest dynamics defect after each outer iteration (direct method).
    pub defect_history: Vec<f64>,
    pub notes: Vec<String>,
}

/// Largest excess over each constraint (0 when satisfied), in MHz units.
pub fn constraint_violations(pulse: &ControlPulse, p: &ConstraintProfile) -> BTreeMap<String, f64> {
    let mut v: BTreeMap<String, f64> = BTreeMap::new();
    let mut bump = |k: &str, x: f64| {
        let e = v.entry(k.to_string()).or_insert(0.0);
        *e = e.max(x.max(0.0));
    };
    let n = pulse.len();
    let o: Vec<f64> = pulse.omega.iter().map(|x| x / TAU).collect();
    let d: Vec<f64> = pulse.delta.iter().map(|x| x / TAU).collect();
    bump("omega_endpoints", o[0].abs().max(o[n - 1].abs()));
    for k in 0..n {
        bump("omega_range", (o[k] - p.omega_max).max(-o[k]));
        bump("delta_range", d[k].abs() - p.delta_max);
    }
    for k in 0..n - 1 {
        let dt = pulse.t[k + 1] - pulse.t[k];
        bump("omega_slew", (o[k + 1] - o[k]).abs() / dt - p.slew_omega);
        bump("delta_slew", (d[k + 1] - d[k]).abs() / dt - p.slew_delta);
        bump("dt_min", p.dt_min - dt);
    }
    v
}

/// Fidelity of a pulse by independent propagation.
pub fn rollout_fidelity(pulse: &ControlPulse, sys: &RydbergSystem, target: &CMat, substeps: usize) -> Result<f64> {
    let opts = PropagateOptions::forced().with_substeps(substeps);
    unitary_fidelity(target, &propagate_unitary(pulse, sys, &opts)?)
}

/// Independent direct solves over `seeds`, run in parallel, in seed order.
pub fn direct_multistart(
    model: &ControlModel,
    target: &CMat,
    opts: &DirectOptions,
    seeds: &[u64],
) -> Result<Vec<(ControlPulse, Trajectory, OptimizationReport)>> {
    parallel_map(seeds, |&seed| {
        let o = DirectOptions { seed, ..opts.clone() };
        direct_optimize(model, target, &o, None)
    })
    .into_iter()
    .collect()
}

/// Index of the highest post-hoc fidelity among valid pulses.
pub fn best_index(reports: &[OptimizationReport]) -> Option<usize> {
    reports
        .iter()
        .enumerate()
        .filter(|(_, r)| r.pulse_valid)
        .max_by(|a, b| a.1.final_fidelity.total_cmp(&b.1.final_fidelity))
        .map(|(i, _)| i)
}

#[derive(Debug, Clone, Serialize)]
pub struct GrapeStudy {
    pub r: f64,
    pub fidelities: Vec<f64>,
    pub median: f64,
    pub best: f64,
    /// Mean absolute second difference of the best pulse's Δ knots (MHz).
    pub roughness: f64,
    pub reports: Vec<OptimizationReport>,
}

/// GRAPE over `seeds` at smoothness weight `r`.
pub fn grape_study(problem: &GrapeProblem, r: f64, opts: &GrapeOptions, seeds: &[u64]) -> Result<GrapeStudy> {
    let p = GrapeProblem { r, ..problem.clone() };
    let runs: Vec<(ControlPulse, OptimizationReport)> = parallel_map(seeds, |&seed| {
        let o = GrapeOptions { seed, ..opts.clone() };
        grape_optimize(&p, &o)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let fidelities: Vec<f64> = runs.iter().map(|(_, r)| r.final_fidelity).collect();
    let best_i = (0..runs.len()).max_by(|&a, &b| fidelities[a].total_cmp(&fidelities[b])).unwrap_or(0);
    let roughness = runs.get(best_i).map(|(pl, _)| second_difference_mean(&pl.delta)).unwrap_or(0.0);
    Ok(GrapeStudy {
        r,
        median: median(&fidelities),
        best: fidelities.iter().copied().fold(f64::NAN, f64::max),
        fidelities,
        roughness,
        reports: runs.into_iter().map(|(_, r)| r).collect(),
    })
}

/// Mean `|x_{k+1} - 2 x_k + x_{k-1}|`, converted to MHz.
pub fn second_difference_mean(x: &[f64]) -> f64 {
    if x.len() < 3 {
        return 0.0;
    }
    let s: f64 = x.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]).abs()).sum();
    s / (x.len() - 2) as f64 / TAU
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{pauli_x, pauli_z};
    use crate::models::AtomGeometry;

    #[test]
    fn fidelity_examples() {
        let i2 = CMat::identity(2, 2);
        assert!((unitary_fidelity(&i2, &i2).unwrap() - 1.0).abs() < 1e-15);
        assert!(unitary_fidelity(&i2, &pauli_x()).unwrap().abs() < 1e-15);
        let th = 0.3;
        let f = unitary_fidelity(&i2, &expm_hermitian(&pauli_z(), th)).unwrap();
        assert!((f - th.cos().powi(2)).abs() < 1e-14);
        let fl = unitary_fidelity_with(&i2, &expm_hermitian(&pauli_z(), th), FidelityKind::LinearTrace).unwrap();
        assert!((fl - th.cos()).abs() < 1e-14);
        assert!(unitary_fidelity(&i2, &CMat::identity(4, 4)).is_err());
    }

    #[test]
    fn state_fidelity_examples() {
        let i2 = CMat::identity(2, 2);
        assert!((avg_state_fidelity(&i2, &i2, 7, 1).unwrap() - 1.0).abs() < 1e-14);
        let a = avg_state_fidelity(&i2, &pauli_x(), 50, 3).unwrap();
        assert_eq!(a, avg_state_fidelity(&i2, &pauli_x(), 50, 3).unwrap());
        // (d F_u + 1) / (d + 1) with F_u = 0, d = 2
        let big = avg_state_fidelity(&i2, &pauli_x(), 20000, 9).unwrap();
        assert!((big - 1.0 / 3.0).abs() < 0.01, "{big}");
    }

    #[test]
    fn model_matches_propagation() {
        let sys = RydbergSystem::new(AtomGeometry::chain(3, 8.9).unwrap()).unwrap();
        let model = ControlModel::new(sys.clone(), DEFAULT_SUBSTEPS).unwrap();
        let om = [0.0, 1.5, 2.0, 0.7, 0.0];
        let de = [3.0, -4.0, 2.0, 8.0, -1.0];
        let u = model.rollout(&om, &de, 0.05);
        let pulse = pulse_from_knots(&om, &de, 0.05).unwrap();
        let opts = PropagateOptions::forced().with_substeps(DEFAULT_SUBSTEPS);
        let v = propagate_unitary(&pulse, &sys, &opts).unwrap();
        assert!((u - v).norm() < 1e-12);
    }

    #[test]
    fn interval_gradient_matches_finite_differences() {
        let sys = RydbergSystem::new(AtomGeometry::chain(2, 7.0).unwrap()).unwrap();
        let model = ControlModel::new(sys, 3).unwrap();
        let g = CMat::from_fn(4, 4, |i, j| C64::new((i as f64 + 0.3 * j as f64).sin(), (j as f64 - i as f64).cos()));
        let s = |u0: [f64; 2], u1: [f64; 2]| -> f64 {
            let phi = model.interval(u0, u1, 0.05).phi;
            g.iter().zip(phi.iter()).map(|(a, b)| (a.conj() * b).re).sum()
        };
        let (u0, u1) = ([1.2, -3.0], [0.4, 5.0]);
        let (g0, g1) = model.interval_grad(&model.interval(u0, u1, 0.05), &g);
        let eps = 1e-6;
        for c in 0..2 {
            let mut a = u0;
            let mut b = u0;
            a[c] += eps;
            b[c] -= eps;
            let fd = (s(a, u1) - s(b, u1)) / (2.0 * eps);
            assert!((fd - g0[c]).abs() < 1e-7 * (1.0 + fd.abs()), "{fd} {}", g0[c]);
            let mut a = u1;
            let mut b = u1;
            a[c] += eps;
            b[c] -= eps;
            let fd = (s(u0, a) - s(u0, b)) / (2.0 * eps);
            assert!((fd - g1[c]).abs() < 1e-7 * (1.0 + fd.abs()), "{fd} {}", g1[c]);
        }
    }

    #[test]
    fn zxz_target_three_sites() {
        let u = zxz_target(3, 0.8).unwrap();
        assert!(crate::linalg::unitarity_defect(&u) < 1e-12);
        assert!((u[(0, 0)].re - 0.8f64.cos()).abs() < 1e-12);
    }
}
