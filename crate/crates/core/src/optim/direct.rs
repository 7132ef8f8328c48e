//! Trajectory optimization with the dynamics as equality constraints.
//!
//! Decision variables are the propagators `U_1..U_K` (real-stacked) and, per
//! knot, the controls `u_k`, the increments `v_k = du_k dt` and
//! `a_k = ddu_k dt`. Equalities `U_{k+1} = Φ_k U_k`, `u_{k+1} = u_k + v_k` and
//! `v_{k+1} = v_k + a_k` are handled by an augmented Lagrangian; bounds on
//! controls and increments are kept exactly by the projected inner solver.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::lbfgs::{minimize_box, BoxOptions};
use super::{
    constraint_violations, pulse_from_knots, unitary_fidelity, zxz_target, ControlModel, Method,
    OptimizationReport,
};
use crate::error::{Error, Result};
use crate::linalg::{eigh, expm_hermitian, CMat, C64};
use crate::models::to_mhz;
use crate::propagation::{propagate_unitary, ConstraintProfile, ControlPulse, PropagateOptions};

/// Per-knot record of a (possibly infeasible) trajectory. Controls in MHz.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub dt: f64,
    /// `U_0 = I` through `U_K`.
    #[serde(skip)]
    pub unitaries: Vec<CMat>,
    pub u: Vec<[f64; 2]>,
    /// MHz/µs.
    pub du: Vec<[f64; 2]>,
    /// MHz/µs².
    pub ddu: Vec<[f64; 2]>,
    /// Largest `‖U_{k+1} - Φ_k U_k‖_F`.
    pub feasibility_residual: f64,
}

impl Trajectory {
    pub fn n_knots(&self) -> usize {
        self.u.len()
    }

    /// Real and imaginary parts of `U_k`, column-major, stacked.
    pub fn isovec(&self, k: usize) -> Vec<f64> {
        let u = &self.unitaries[k];
        u.iter().map(|z| z.re).chain(u.iter().map(|z| z.im)).collect()
    }

    pub fn pulse(&self) -> Result<ControlPulse> {
        let o: Vec<f64> = self.u.iter().map(|u| u[0]).collect();
        let d: Vec<f64> = self.u.iter().map(|u| u[1]).collect();
        pulse_from_knots(&o, &d, self.dt)
    }

    /// Identity at every knot with all controls zero.
    pub fn identity(dim: usize, n_knots: usize, dt: f64) -> Self {
        Self {
            t: (0..n_knots).map(|k| k as f64 * dt).collect(),
            dt,
            unitaries: vec![CMat::identity(dim, dim); n_knots],
            u: vec![[0.0; 2]; n_knots],
            du: vec![[0.0; 2]; n_knots],
            ddu: vec![[0.0; 2]; n_knots],
            feasibility_residual: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Initialization {
    /// Every `U_k = I`.
    Identity,
    /// `U_k` on the one-parameter path from `I` to the target.
    #[default]
    Geodesic,
    /// `U_k` propagated from the initial controls (dynamically feasible).
    Rollout,
}

#[derive(Debug, Clone)]
pub struct DirectOptions {
    pub duration: f64,
    pub dt: f64,
    /// Terminal weight `Q` on `1 - F`.
    pub q: f64,
    /// Weight on `Σ |ddu_k|²` in (MHz/µs²)², times `dt⁴`.
    pub r_accel: f64,
    pub init: Initialization,
    /// Ω knots start uniform in `(0, init_omega)`, Δ in `(-init_delta, init_delta)` (MHz).
    pub init_omega: f64,
    pub init_delta: f64,
    pub seed: u64,
    pub max_outer: usize,
    pub inner: BoxOptions,
    pub mu0: f64,
    pub mu_max: f64,
    /// Target for the largest dynamics defect.
    pub feas_tol: f64,
    /// Relative tightening of the slew bounds used inside the solver.
    pub slew_margin: f64,
    pub profile: ConstraintProfile,
}

impl Default for DirectOptions {
    fn default() -> Self {
        Self {
            duration: 1.2,
            dt: 0.05,
            q: 10.0,
            r_accel: 1e-6,
            init: Initialization::default(),
            init_omega: 2.0,
            init_delta: 10.0,
            seed: 0,
            max_outer: 12,
            inner: BoxOptions { max_iter: 1500, ..Default::default() },
            mu0: 10.0,
            mu_max: 1e8,
            feas_tol: 1e-6,
            slew_margin: 1e-3,
            profile: ConstraintProfile::default(),
        }
    }
}

impl DirectOptions {
    pub fn n_knots(&self) -> Result<usize> {
        let k = (self.duration / self.dt).round();
        if k < 1.0 || (k * self.dt - self.duration).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "duration {} is not a multiple of dt {}",
                self.duration, self.dt
            )));
        }
        if self.dt < self.profile.dt_min - 1e-12 {
            return Err(Error::InvalidArgument(format!("dt {} below {}", self.dt, self.profile.dt_min)));
        }
        Ok(k as usize + 1)
    }
}

struct Layout {
    d: usize,
    /// Number of intervals.
    k: usize,
    nu: usize,
}

impl Layout {
    fn u_off(&self, j: usize) -> usize {
        (j - 1) * self.nu
    }
    fn c_off(&self, j: usize) -> usize {
        self.k * self.nu + 6 * j
    }
    fn n_vars(&self) -> usize {
        self.k * self.nu + 6 * (self.k + 1)
    }
    fn n_cons(&self) -> usize {
        self.k * self.nu + 4 * self.k
    }
    fn unitary(&self, x: &[f64], j: usize) -> CMat {
        if j == 0 {
            return CMat::identity(self.d, self.d);
        }
        let o = self.u_off(j);
        let dd = self.d * self.d;
        CMat::from_iterator(self.d, self.d, (0..dd).map(|i| C64::new(x[o + i], x[o + dd + i])))
    }
    fn add_unitary(&self, g: &mut [f64], j: usize, m: &CMat) {
        if j == 0 {
            return;
        }
        let o = self.u_off(j);
        let dd = self.d * self.d;
        for (i, z) in m.iter().enumerate() {
            g[o + i] += z.re;
            g[o + dd + i] += z.im;
        }
    }
}

struct Problem<'a> {
    model: &'a ControlModel,
    target: &'a CMat,
    lay: Layout,
    dt: f64,
    q: f64,
    r_accel: f64,
}

impl Problem<'_> {
    /// Constraint residuals in the layout of the multipliers.
    fn constraints(&self, x: &[f64]) -> Vec<f64> {
        let l = &self.lay;
        let mut c = vec![0.0; l.n_cons()];
        let dd = l.d * l.d;
        for j in 0..l.k {
            let (u0, u1) = self.controls(x, j);
            let phi = self.model.interval(u0, u1, self.dt).phi;
            let defect = l.unitary(x, j + 1) - phi * l.unitary(x, j);
            for (i, z) in defect.iter().enumerate() {
                c[j * l.nu + i] = z.re;
                c[j * l.nu + dd + i] = z.im;
            }
            self.kinematics(x, j, &mut c[l.k * l.nu + 4 * j..l.k * l.nu + 4 * j + 4]);
        }
        c
    }

    fn controls(&self, x: &[f64], j: usize) -> ([f64; 2], [f64; 2]) {
        let a = self.lay.c_off(j);
        let b = self.lay.c_off(j + 1);
        ([x[a], x[a + 1]], [x[b], x[b + 1]])
    }

    fn kinematics(&self, x: &[f64], j: usize, out: &mut [f64]) {
        let a = self.lay.c_off(j);
        let b = self.lay.c_off(j + 1);
        for s in 0..2 {
            out[s] = x[b + s] - x[a + s] - x[a + 2 + s];
            out[2 + s] = x[b + 2 + s] - x[a + 2 + s] - x[a + 4 + s];
        }
    }

    fn fidelity(&self, x: &[f64]) -> f64 {
        let uk = self.lay.unitary(x, self.lay.k);
        unitary_fidelity(self.target, &uk).unwrap_or(0.0)
    }

    /// Augmented Lagrangian value and gradient.
    fn eval(&self, x: &[f64], lam: &[f64], mu: f64, g: &mut [f64]) -> f64 {
        let l = &self.lay;
        g.iter_mut().for_each(|v| *v = 0.0);
        let dd = l.d * l.d;
        let d = l.d as f64;

        let uk = l.unitary(x, l.k);
        let t: C64 = self.target.iter().zip(uk.iter()).map(|(a, b)| a.conj() * b).sum();
        let mut val = self.q * (1.0 - t.norm_sqr() / (d * d));
        l.add_unitary(g, l.k, &self.target.map(|z| z * t * (-2.0 * self.q / (d * d))));

        let mut prev = CMat::identity(l.d, l.d);
        for j in 0..l.k {
            let next = l.unitary(x, j + 1);
            let (u0, u1) = self.controls(x, j);
            let cache = self.model.interval(u0, u1, self.dt);
            let defect = &next - &cache.phi * &prev;
            let off = j * l.nu;
            let w = CMat::from_iterator(
                l.d,
                l.d,
                defect.iter().enumerate().map(|(i, z)| {
                    val += lam[off + i] * z.re + lam[off + dd + i] * z.im + 0.5 * mu * z.norm_sqr();
                    C64::new(lam[off + i], lam[off + dd + i]) + z * mu
                }),
            );
            l.add_unitary(g, j + 1, &w);
            l.add_unitary(g, j, &(-(cache.phi.adjoint() * &w)));
            let (g0, g1) = self.model.interval_grad(&cache, &(-(&w * prev.adjoint())));
            let a = l.c_off(j);
            let b = l.c_off(j + 1);
            for s in 0..2 {
                g[a + s] += g0[s];
                g[b + s] += g1[s];
            }

            let mut kc = [0.0; 4];
            self.kinematics(x, j, &mut kc);
            let lo = l.k * l.nu + 4 * j;
            for s in 0..2 {
                let w1 = lam[lo + s] + mu * kc[s];
                let w2 = lam[lo + 2 + s] + mu * kc[2 + s];
                val += lam[lo + s] * kc[s] + lam[lo + 2 + s] * kc[2 + s] + 0.5 * mu * (kc[s] * kc[s] + kc[2 + s] * kc[2 + s]);
                g[b + s] += w1;
                g[a + s] -= w1;
                g[a + 2 + s] -= w1;
                g[b + 2 + s] += w2;
                g[a + 2 + s] -= w2;
                g[a + 4 + s] -= w2;
            }
            prev = next;
        }
        if self.r_accel != 0.0 {
            for j in 0..=l.k {
                let a = l.c_off(j);
                for s in 0..2 {
                    val += self.r_accel * x[a + 4 + s] * x[a + 4 + s];
                    g[a + 4 + s] += 2.0 * self.r_accel * x[a + 4 + s];
                }
            }
        }
        val
    }

    fn max_defect(&self, c: &[f64]) -> (f64, f64) {
        let l = &self.lay;
        let dynamic = (0..l.k)
            .map(|j| c[j * l.nu..(j + 1) * l.nu].iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let kin = c[l.k * l.nu..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (dynamic, kin)
    }
}

/// Principal generator `H` with `w = exp(-i H)`, for unitary `w`.
fn unitary_generator(w: &CMat) -> Option<CMat> {
    // Hermitian combination commuting with w; generic weights split the spectrum
    let herm = (w + w.adjoint()) * C64::new(0.5, 0.0) + (w - w.adjoint()) * C64::new(0.0, -0.5 * 0.618_033_988_7);
    let (_, v) = eigh(&herm);
    let diag = v.adjoint() * w * &v;
    let mut h = CMat::zeros(w.nrows(), w.nrows());
    for i in 0..w.nrows() {
        h[(i, i)] = C64::new(-diag[(i, i)].arg(), 0.0);
    }
    let h = &v * h * v.adjoint();
    let back = expm_hermitian(&h, 1.0);
    ((back - w).norm() < 1e-8).then_some(h)
}

fn random_controls(opts: &DirectOptions, n: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let p = &opts.profile;
    let m = 1.0 - opts.slew_margin;
    let so = p.slew_omega * opts.dt * m;
    let sd = p.slew_delta * opts.dt * m;
    let mut u: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            let o = if opts.init_omega > 0.0 { rng.random_range(0.0..opts.init_omega) } else { 0.0 };
            let d = if opts.init_delta > 0.0 { rng.random_range(-opts.init_delta..opts.init_delta) } else { 0.0 };
            [o.min(p.omega_max), d.clamp(-p.delta_max, p.delta_max)]
        })
        .collect();
    u[0][0] = 0.0;
    u[n - 1][0] = 0.0;
    for k in 1..n {
        u[k][0] = u[k][0].clamp(u[k - 1][0] - so, u[k - 1][0] + so);
        u[k][1] = u[k][1].clamp(u[k - 1][1] - sd, u[k - 1][1] + sd);
    }
    u[n - 1][0] = 0.0;
    for k in (0..n - 1).rev() {
        u[k][0] = u[k][0].min(u[k + 1][0] + so);
    }
    u
}

fn pack(lay: &Layout, traj_u: &[CMat], u: &[[f64; 2]]) -> Vec<f64> {
    let mut x = vec![0.0; lay.n_vars()];
    let dd = lay.d * lay.d;
    for j in 1..=lay.k {
        let o = lay.u_off(j);
        for (i, z) in traj_u[j].iter().enumerate() {
            x[o + i] = z.re;
            x[o + dd + i] = z.im;
        }
    }
    let n = u.len();
    for j in 0..n {
        let a = lay.c_off(j);
        x[a] = u[j][0];
        x[a + 1] = u[j][1];
    }
    for j in 0..n - 1 {
        let (a, b) = (lay.c_off(j), lay.c_off(j + 1));
        x[a + 2] = x[b] - x[a];
        x[a + 3] = x[b + 1] - x[a + 1];
    }
    for j in 0..n - 1 {
        let (a, b) = (lay.c_off(j), lay.c_off(j + 1));
        x[a + 4] = x[b + 2] - x[a + 2];
        x[a + 5] = x[b + 3] - x[a + 3];
    }
    x
}

fn warm_x(lay: &Layout, w: &Trajectory) -> Vec<f64> {
    let mut x = pack(lay, &w.unitaries, &w.u);
    for j in 0..w.u.len() {
        let a = lay.c_off(j);
        for s in 0..2 {
            x[a + 2 + s] = w.du[j][s] * w.dt;
            x[a + 4 + s] = w.ddu[j][s] * w.dt * w.dt;
        }
    }
    x
}

fn bounds(lay: &Layout, opts: &DirectOptions) -> (Vec<f64>, Vec<f64>) {
    let n = lay.n_vars();
    let mut lo = vec![-1.0; n];
    let mut hi = vec![1.0; n];
    let p = &opts.profile;
    let m = 1.0 - opts.slew_margin;
    let vo = p.slew_omega * opts.dt * m;
    let vd = p.slew_delta * opts.dt * m;
    for j in 0..=lay.k {
        let a = lay.c_off(j);
        let om = if j == 0 || j == lay.k { 0.0 } else { p.omega_max };
        let vals = [(0.0, om), (-p.delta_max, p.delta_max), (-vo, vo), (-vd, vd), (-2.0 * vo, 2.0 * vo), (-2.0 * vd, 2.0 * vd)];
        for (s, (l, h)) in vals.into_iter().enumerate() {
            lo[a + s] = l;
            hi[a + s] = h;
        }
    }
    (lo, hi)
}

fn unpack(prob: &Problem, x: &[f64], residual: f64) -> Trajectory {
    let lay = &prob.lay;
    let n = lay.k + 1;
    let dt = prob.dt;
    let get = |j: usize, s: usize| x[lay.c_off(j) + s];
    Trajectory {
        t: (0..n).map(|k| k as f64 * dt).collect(),
        dt,
        unitaries: (0..n).map(|j| lay.unitary(x, j)).collect(),
        u: (0..n).map(|j| [get(j, 0), get(j, 1)]).collect(),
        du: (0..n).map(|j| [get(j, 2) / dt, get(j, 3) / dt]).collect(),
        ddu: (0..n).map(|j| [get(j, 4) / (dt * dt), get(j, 5) / (dt * dt)]).collect(),
        feasibility_residual: residual,
    }
}

/// Solves for a pulse realizing `target` on `model`, optionally warm-started.
pub fn direct_optimize(
    model: &ControlModel,
    target: &CMat,
    opts: &DirectOptions,
    warm_start: Option<&Trajectory>,
) -> Result<(ControlPulse, Trajectory, OptimizationReport)> {
    let start = Instant::now();
    let n = opts.n_knots()?;
    let d = model.dim();
    if target.nrows() != d {
        return Err(Error::SizeMismatch { expected: d, got: target.nrows() });
    }
    let lay = Layout { d, k: n - 1, nu: 2 * d * d };
    let prob = Problem { model, target, lay, dt: opts.dt, q: opts.q, r_accel: opts.r_accel };
    let lay = &prob.lay;
    let (lo, hi) = bounds(lay, opts);

    let mut notes = Vec::new();
    let mut x = match warm_start {
        Some(w) => {
            if w.n_knots() != n || (w.dt - opts.dt).abs() > 1e-12 || w.unitaries.len() != n || w.unitaries[0].nrows() != d
            {
                return Err(Error::InvalidArgument("warm start does not match the knot grid".into()));
            }
            warm_x(lay, w)
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let u = random_controls(opts, n, &mut rng);
            let unitaries: Vec<CMat> = match opts.init {
                Initialization::Identity => vec![CMat::identity(d, d); n],
                Initialization::Geodesic => match unitary_generator(target) {
                    Some(h) => (0..n)
                        .map(|j| expm_hermitian(&h, j as f64 / (n - 1) as f64))
                        .collect(),
                    None => {
                        notes.push("target logarithm failed; identity initialization used".into());
                        vec![CMat::identity(d, d); n]
                    }
                },
                Initialization::Rollout => {
                    let mut acc = vec![CMat::identity(d, d)];
                    for j in 0..n - 1 {
                        let phi = model.interval(u[j], u[j + 1], opts.dt).phi;
                        let nxt = phi * &acc[j];
                        acc.push(nxt);
                    }
                    acc
                }
            };
            pack(lay, &unitaries, &u)
        }
    };
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }

    let mut lam = vec![0.0; lay.n_cons()];
    let mut mu = opts.mu0;
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut prev = f64::INFINITY;
    let mut rejected = 0;
    let (mut dyn_res, mut kin_res) = prob.max_defect(&prob.constraints(&x));
    for _outer in 0..opts.max_outer {
        let res = minimize_box(|z, g| prob.eval(z, &lam, mu, g), &x, &lo, &hi, &opts.inner);
        iterations += res.iterations;
        let c = prob.constraints(&res.x);
        let (dr, kr) = prob.max_defect(&c);
        if history.len() >= 2 && dr > history[history.len() - 1] && mu < opts.mu_max {
            // keep the last iterate and retry with a stiffer penalty
            rejected += 1;
            mu = (mu * 10.0).min(opts.mu_max);
            continue;
        }
        x = res.x;
        (dyn_res, kin_res) = (dr, kr);
        let viol = dyn_res.max(kin_res);
        history.push(dyn_res);
        if viol < opts.feas_tol {
            converged = true;
            break;
        }
        for (l, ci) in lam.iter_mut().zip(&c) {
            *l += mu * ci;
        }
        if viol > 0.25 * prev {
            mu = (mu * 10.0).min(opts.mu_max);
        }
        prev = viol;
    }
    if rejected > 0 {
        notes.push(format!("{rejected} outer iterate(s) rejected for raising the defect"));
    }

    let traj = unpack(&prob, &x, dyn_res);
    let model_fidelity = prob.fidelity(&x);
    let mut pulse = traj.pulse()?;
    if pulse.validate(&opts.profile).is_err() {
        pulse = repair(&pulse, &opts.profile)?;
        notes.push("knot values clipped onto the constraint set".into());
    }
    let pulse_valid = pulse.validate(&opts.profile).is_ok();
    let popts = PropagateOptions { constraints: opts.profile.clone(), ..PropagateOptions::forced() }
        .with_substeps(model.substeps);
    let final_fidelity = unitary_fidelity(target, &propagate_unitary(&pulse, &model.sys, &popts)?)?;
    if kin_res >= opts.feas_tol {
        notes.push(format!("kinematic residual {kin_res:.3e}"));
    }
    let report = OptimizationReport {
        method: Method::Direct,
        seed: opts.seed,
        final_fidelity,
        model_fidelity,
        iterations,
        converged: converged && pulse_valid,
        feasibility_residual: dyn_res,
        constraint_violations: constraint_violations(&pulse, &opts.profile),
        pulse_valid,
        wall_time_secs: start.elapsed().as_secs_f64(),
        duration_us: opts.duration,
        n_knots: n,
        defect_history: history,
        notes,
    };
    Ok((pulse, traj, report))
}

/// Clamps knot values onto the bounds and slew limits, sweeping forward then
/// backward from the pinned final Ω.
fn repair(pulse: &ControlPulse, p: &ConstraintProfile) -> Result<ControlPulse> {
    let n = pulse.len();
    let mut o: Vec<f64> = pulse.omega.iter().map(|v| to_mhz(*v)).collect();
    let mut d: Vec<f64> = pulse.delta.iter().map(|v| to_mhz(*v)).collect();
    o[0] = 0.0;
    o[n - 1] = 0.0;
    for k in 0..n {
        o[k] = o[k].clamp(0.0, p.omega_max);
        d[k] = d[k].clamp(-p.delta_max, p.delta_max);
    }
    for k in 1..n {
        let h = pulse.t[k] - pulse.t[k - 1];
        let (so, sd) = (p.slew_omega * h, p.slew_delta * h);
        o[k] = o[k].clamp(o[k - 1] - so, o[k - 1] + so);
        d[k] = d[k].clamp(d[k - 1] - sd, d[k - 1] + sd);
    }
    o[n - 1] = 0.0;
    for k in (0..n - 1).rev() {
        let h = pulse.t[k + 1] - pulse.t[k];
        o[k] = o[k].min(o[k + 1] + p.slew_omega * h);
    }
    ControlPulse::from_mhz(pulse.t.clone(), &o, &d)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub tau: f64,
    #[serde(skip)]
    pub pulse: ControlPulse,
    #[serde(skip)]
    pub trajectory: Trajectory,
    pub report: OptimizationReport,
}

/// Continuation over `taus` for ZXZ targets, each solve warm-started from
/// the previous one. Failures are flagged in the reports and the sweep goes on.
pub fn tau_sweep(model: &ControlModel, taus: &[f64], base: &Trajectory, opts: &DirectOptions) -> Result<Vec<SweepEntry>> {
    let n_atoms = model.sys.n_atoms();
    let mut out: Vec<SweepEntry> = Vec::with_capacity(taus.len());
    let mut warm = base.clone();
    for &tau in taus {
        let target = zxz_target(n_atoms, tau)?;
        let (pulse, trajectory, report) = direct_optimize(model, &target, opts, Some(&warm))?;
        warm = trajectory.clone();
        out.push(SweepEntry { tau, pulse, trajectory, report });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{AtomGeometry, RydbergSystem};

    fn model(n: usize, spacing: f64) -> ControlModel {
        ControlModel::new(RydbergSystem::new(AtomGeometry::chain(n, spacing).unwrap()).unwrap(), 5).unwrap()
    }

    fn check_gradient(prob: &Problem, x: &[f64], lam: &[f64], mu: f64) {
        let mut g = vec![0.0; x.len()];
        prob.eval(x, lam, mu, &mut g);
        let mut scratch = vec![0.0; x.len()];
        let mut xp = x.to_vec();
        let eps = 1e-6;
        for i in (0..x.len()).step_by(7) {
            xp[i] = x[i] + eps;
            let fp = prob.eval(&xp, lam, mu, &mut scratch);
            xp[i] = x[i] - eps;
            let fm = prob.eval(&xp, lam, mu, &mut scratch);
            xp[i] = x[i];
            let fd = (fp - fm) / (2.0 * eps);
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + fd.abs()), "var {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn lagrangian_gradient_matches_finite_differences() {
        let m = model(2, 6.0);
        let target = expm_hermitian(&m.hamiltonian_mhz(1.0, 2.0), 0.3);
        let opts = DirectOptions { duration: 0.2, ..Default::default() };
        let n = opts.n_knots().unwrap();
        let lay = Layout { d: 4, k: n - 1, nu: 32 };
        let prob = Problem { model: &m, target: &target, lay, dt: 0.05, q: 1.3, r_accel: 0.01 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..prob.lay.n_vars()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lam: Vec<f64> = (0..prob.lay.n_cons()).map(|_| rng.random_range(-1.0..1.0)).collect();
        check_gradient(&prob, &x, &lam, 3.0);
    }

    #[test]
    fn generator_reproduces_unitary() {
        let w = zxz_target(3, 0.8).unwrap();
        let h = unitary_generator(&w).unwrap();
        assert!((expm_hermitian(&h, 1.0) - w).norm() < 1e-8);
    }

    #[test]
    fn identity_target_converges_at_once() {
        let m = model(3, 200.0);
        let opts = DirectOptions { duration: 0.5, init: Initialization::Identity, ..Default::default() };
        let warm = Trajectory::identity(8, opts.n_knots().unwrap(), opts.dt);
        let (pulse, traj, rep) = direct_optimize(&m, &CMat::identity(8, 8), &opts, Some(&warm)).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!(rep.defect_history.len() <= 2);
        assert!(rep.final_fidelity > 1.0 - 1e-9);
        assert!(pulse.validate(&opts.profile).is_ok());
        assert!(traj.feasibility_residual < 1e-6);
    }

    #[test]
    fn repair_lands_in_constraint_set() {
        let p = ConstraintProfile::default();
        let t: Vec<f64> = (0..5).map(|k| k as f64 * 0.05).collect();
        let bad = ControlPulse::from_mhz(t, &[0.5, 3.0, -1.0, 2.0, 0.3], &[0.0, 40.0, -30.0, 0.0, 0.0]).unwrap();
        assert!(bad.validate(&p).is_err());
        assert!(repair(&bad, &p).unwrap().validate(&p).is_ok());
    }
}
