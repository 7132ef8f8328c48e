//! Time evolution under piecewise-linear global controls.
//!
//! Pulses hold angular frequencies (rad/µs) internally and read or write MHz
//! in their CSV form (`t_us,omega_MHz,delta_MHz`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, dagger, embed, expm_hermitian, CMat, CVec, C64, I};
use crate::models::{mhz, to_mhz, NoiseModel, RydbergSystem};

const EPS: f64 = 1e-9;

/// Hardware limits, all in MHz, MHz/µs and µs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintProfile {
    pub omega_max: f64,
    pub delta_max: f64,
    pub slew_omega: f64,
    pub slew_delta: f64,
    pub dt_min: f64,
}

impl Default for ConstraintProfile {
    fn default() -> Self {
        Self { omega_max: 2.41, delta_max: 19.9, slew_omega: 39.7, slew_delta: 397.0, dt_min: 0.05 }
    }
}

impl ConstraintProfile {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        let all = [p.omega_max, p.delta_max, p.slew_omega, p.slew_delta, p.dt_min];
        if all.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::InvalidArgument(format!("constraint values must be positive: {p:?}")));
        }
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPulse {
    /// Knot times in µs.
    pub t: Vec<f64>,
    /// Rabi frequency at each knot, rad/µs.
    pub omega: Vec<f64>,
    /// Detuning at each knot, rad/µs.
    pub delta: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    t_us: f64,
    #[serde(rename = "omega_MHz")]
    omega_mhz: f64,
    #[serde(rename = "delta_MHz")]
    delta_mhz: f64,
}

impl ControlPulse {
    pub fn new(t: Vec<f64>, omega: Vec<f64>, delta: Vec<f64>) -> Result<Self> {
        if t.len() < 2 || omega.len() != t.len() || delta.len() != t.len() {
            return Err(Error::InvalidPulse(format!(
                "need at least two knots with matching lengths, got {}/{}/{}",
                t.len(),
                omega.len(),
                delta.len()
            )));
        }
        if t[0] != 0.0 {
            return Err(Error::InvalidPulse(format!("first knot must be at t=0, got {}", t[0])));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidPulse("knot times must be strictly increasing".into()));
        }
        if omega.iter().chain(&delta).chain(&t).any(|x| !x.is_finite()) {
            return Err(Error::InvalidPulse("non-finite value".into()));
        }
        Ok(Self { t, omega, delta })
    }

    /// Knot values given in MHz.
    pub fn from_mhz(t: Vec<f64>, omega_mhz: &[f64], delta_mhz: &[f64]) -> Result<Self> {
        Self::new(t, omega_mhz.iter().map(|&x| mhz(x)).collect(), delta_mhz.iter().map(|&x| mhz(x)).collect())
    }

    /// Uniform knots `t_k = k T / (n - 1)`.
    pub fn uniform(duration: f64, omega: Vec<f64>, delta: Vec<f64>) -> Result<Self> {
        let n = omega.len();
        if n < 2 {
            return Err(Error::InvalidPulse("need at least two knots".into()));
        }
        let t = (0..n).map(|k| duration * k as f64 / (n - 1) as f64).collect();
        Self::new(t, omega, delta)
    }

    pub fn constant(omega: f64, delta: f64, duration: f64) -> Result<Self> {
        Self::new(vec![0.0, duration], vec![omega; 2], vec![delta; 2])
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn duration(&self) -> f64 {
        *self.t.last().unwrap()
    }

    /// Linear interpolation; clamps outside `[0, T]`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let k = match self.t.partition_point(|&x| x <= t) {
            0 => return (self.omega[0], self.delta[0]),
            k if k >= self.t.len() => return (*self.omega.last().unwrap(), *self.delta.last().unwrap()),
            k => k - 1,
        };
        let s = (t - self.t[k]) / (self.t[k + 1] - self.t[k]);
        (
            self.omega[k] + s * (self.omega[k + 1] - self.omega[k]),
            self.delta[k] + s * (self.delta[k + 1] - self.delta[k]),
        )
    }

    /// All constraint violations, empty when the pulse is admissible.
    pub fn violations(&self, p: &ConstraintProfile) -> Vec<String> {
        let mut out = Vec::new();
        let n = self.len();
        if self.omega[0].abs() > EPS || self.omega[n - 1].abs() > EPS {
            out.push("omega must vanish at both ends".to_string());
        }
        for k in 0..n {
            let (o, d) = (to_mhz(self.omega[k]), to_mhz(self.delta[k]));
            if o < -EPS || o > p.omega_max + EPS {
                out.push(format!("omega {o:.6} MHz out of [0, {}] at knot {k}", p.omega_max));
            }
            if d.abs() > p.delta_max + EPS {
                out.push(format!("delta {d:.6} MHz out of ±{} at knot {k}", p.delta_max));
            }
        }
        for k in 0..n - 1 {
            let dt = self.t[k + 1] - self.t[k];
            if dt < p.dt_min - EPS {
                out.push(format!("knot spacing {dt:.6} µs below {} at interval {k}", p.dt_min));
            }
            let so = to_mhz(self.omega[k + 1] - self.omega[k]).abs() / dt;
            let sd = to_mhz(self.delta[k + 1] - self.delta[k]).abs() / dt;
            if so > p.slew_omega * (1.0 + 1e-9) {
                out.push(format!("omega slew {so:.4} MHz/µs above {} at interval {k}", p.slew_omega));
            }
            if sd > p.slew_delta * (1.0 + 1e-9) {
                out.push(format!("delta slew {sd:.4} MHz/µs above {} at interval {k}", p.slew_delta));
            }
        }
        out
    }

    pub fn validate(&self, p: &ConstraintProfile) -> Result<()> {
        let v = self.violations(p);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidPulse(v.join("; ")))
        }
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t_us", "omega_MHz", "delta_MHz"])?;
        for k in 0..self.len() {
            w.write_record([
                self.t[k].to_string(),
                to_mhz(self.omega[k]).to_string(),
                to_mhz(self.delta[k]).to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv_str(s: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(s.as_bytes());
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t_us", "omega_MHz", "delta_MHz"] {
            return Err(Error::Parse(format!("expected header t_us,omega_MHz,delta_MHz, got {headers:?}")));
        }
        let (mut t, mut o, mut d) = (Vec::new(), Vec::new(), Vec::new());
        for row in r.deserialize() {
            let row: CsvRow = row?;
            t.push(row.t_us);
            o.push(row.omega_mhz);
            d.push(row.delta_mhz);
        }
        Self::from_mhz(t, &o, &d)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_csv_string()?)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }
}

/// Largest sub-interval used when the substep count is chosen automatically.
pub const MAX_SUBSTEP_US: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct PropagateOptions {
    /// Sub-intervals per knot interval; `None` picks enough for `MAX_SUBSTEP_US`.
    pub substeps: Option<usize>,
    /// Skip constraint validation.
    pub force: bool,
    pub constraints: ConstraintProfile,
    /// Coherent calibration offsets applied to the controls.
    pub noise: Option<NoiseModel>,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        Self { substeps: None, force: false, constraints: ConstraintProfile::default(), noise: None }
    }
}

impl PropagateOptions {
    pub fn forced() -> Self {
        Self { force: true, ..Default::default() }
    }

    pub fn with_substeps(mut self, s: usize) -> Self {
        self.substeps = Some(s);
        self
    }
}

fn substeps_for(dt: f64, fixed: Option<usize>) -> usize {
    fixed.unwrap_or_else(|| (dt / MAX_SUBSTEP_US - 1e-9).ceil().max(1.0) as usize)
}

/// Ordered product of `exp(-i H(u_mid) δ)` over every sub-interval.
pub fn propagate_unitary(pulse: &ControlPulse, sys: &RydbergSystem, opts: &PropagateOptions) -> Result<CMat> {
    if opts.substeps == Some(0) {
        return Err(Error::InvalidArgument("substeps must be at least 1".into()));
    }
    if !opts.force {
        pulse.validate(&opts.constraints)?;
    }
    let noise = opts.noise.unwrap_or_default();
    let mut u = CMat::identity(sys.dim(), sys.dim());
    for k in 0..pulse.len() - 1 {
        let (t0, t1) = (pulse.t[k], pulse.t[k + 1]);
        let m = substeps_for(t1 - t0, opts.substeps);
        let h = (t1 - t0) / m as f64;
        for s in 0..m {
            let (o, d) = pulse.eval(t0 + (s as f64 + 0.5) * h);
            let (o, d) = noise.apply(o, d);
            u = expm_hermitian(&sys.hamiltonian(o, d), h) * u;
        }
    }
    Ok(u)
}

#[derive(Debug, Clone)]
pub struct DensityState {
    pub rho: CMat,
    /// µs.
    pub time: f64,
}

#[derive(Debug, Clone)]
pub struct LindbladOptions {
    /// RK4 step in µs.
    pub dt: f64,
    /// Defaults to `|0...0><0...0|`.
    pub initial: Option<CMat>,
    /// Extra times to record besides the knots.
    pub record_times: Vec<f64>,
    pub force: bool,
    pub constraints: ConstraintProfile,
    /// Step halvings tried before giving up.
    pub max_halvings: usize,
}

impl Default for LindbladOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            initial: None,
            record_times: Vec::new(),
            force: false,
            constraints: ConstraintProfile::default(),
            max_halvings: 4,
        }
    }
}

/// Integrates the master equation with `σ⁻ = |g><r|` decay on every atom and
/// the noise model's calibration offsets; records `ρ` at each knot and at
/// every requested time.
pub fn propagate_lindblad(
    pulse: &ControlPulse,
    sys: &RydbergSystem,
    noise: &NoiseModel,
    opts: &LindbladOptions,
) -> Result<Vec<DensityState>> {
    noise.validate()?;
    if !(opts.dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {}", opts.dt)));
    }
    if !opts.force {
        pulse.validate(&opts.constraints)?;
    }
    let d = sys.dim();
    let rho0 = match &opts.initial {
        Some(r) if r.shape() != (d, d) => return Err(Error::SizeMismatch { expected: d, got: r.nrows() }),
        Some(r) => r.clone(),
        None => {
            let mut r = CMat::zeros(d, d);
            r[(0, 0)] = c(1.0);
            r
        }
    };
    let mut times: Vec<f64> = pulse.t.iter().copied().chain(opts.record_times.iter().copied()).collect();
    times.retain(|&t| (0.0..=pulse.duration() + EPS).contains(&t));
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut dt = opts.dt;
    let mut last_drift = 0.0;
    for _ in 0..=opts.max_halvings {
        match integrate(pulse, sys, noise, &rho0, &times, dt) {
            Ok(traj) => return Ok(traj),
            Err(drift) => {
                last_drift = drift;
                dt /= 2.0;
            }
        }
    }
    Err(Error::StepTooLarge { drift: last_drift, time: pulse.duration(), suggested: dt / 2.0 })
}

struct Lindbladian {
    lowering: Vec<CMat>,
    decay: CMat,
    gamma: f64,
}

impl Lindbladian {
    fn new(n_atoms: usize, gamma: f64) -> Self {
        let sm = CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        let lowering: Vec<CMat> = (0..n_atoms).map(|q| embed(&sm, q, n_atoms)).collect();
        let d = 1usize << n_atoms;
        let mut decay = CMat::zeros(d, d);
        for l in &lowering {
            decay += l.adjoint() * l;
        }
        Self { lowering, decay, gamma }
    }

    fn apply(&self, h: &CMat, rho: &CMat) -> CMat {
        // H_eff = H - (i γ / 2) Σ σ⁺σ⁻
        let heff = h - &self.decay * C64::new(0.0, 0.5 * self.gamma);
        let a = &heff * rho;
        let mut out = (&a - dagger(&a)) * (-I);
        if self.gamma > 0.0 {
            for l in &self.lowering {
                out += l * rho * l.adjoint() * c(self.gamma);
            }
        }
        out
    }
}

fn integrate(
    pulse: &ControlPulse,
    sys: &RydbergSystem,
    noise: &NoiseModel,
    rho0: &CMat,
    times: &[f64],
    dt: f64,
) -> std::result::Result<Vec<DensityState>, f64> {
    let lv = Lindbladian::new(sys.n_atoms(), noise.gamma);
    let ham = |t: f64| {
        let (o, d) = pulse.eval(t);
        let (o, d) = noise.apply(o, d);
        sys.hamiltonian(o, d)
    };
    let tr0 = crate::linalg::trace(rho0).re;
    let mut rho = rho0.clone();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - t;
        let steps = if span > 1e-12 { (span / dt - 1e-9).ceil().max(1.0) as usize } else { 0 };
        for _ in 0..steps {
            let h = span / steps as f64;
            let h0 = ham(t);
            let hm = ham(t + 0.5 * h);
            let h1 = ham(t + h);
            let k1 = lv.apply(&h0, &rho);
            let k2 = lv.apply(&hm, &(&rho + &k1 * c(0.5 * h)));
            let k3 = lv.apply(&hm, &(&rho + &k2 * c(0.5 * h)));
            let k4 = lv.apply(&h1, &(&rho + &k3 * c(h)));
            rho += (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(h / 6.0);
            t += h;
            let drift = (crate::linalg::trace(&rho).re - tr0).abs();
            let norm = crate::linalg::frobenius(&rho);
            if !(drift <= 1e-6) || !(norm <= tr0.abs() * (1.0 + 1e-6)) {
                return Err(if drift.is_finite() { drift.max(norm - tr0.abs()) } else { f64::INFINITY });
            }
        }
        t = target;
        out.push(DensityState { rho: rho.clone(), time: target });
    }
    Ok(out)
}

/// `Z`-basis observables on a register with `|1> = |r>` and qubit 1 most significant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observables {
    pub n: Vec<f64>,
    pub z: Vec<f64>,
    pub zz: Vec<Vec<f64>>,
    pub connected: Vec<Vec<f64>>,
}

/// Observables from basis-state populations.
pub fn observables_from_populations(p: &[f64]) -> Result<Observables> {
    let d = p.len();
    if d == 0 || !d.is_power_of_two() {
        return Err(Error::SizeMismatch { expected: d.next_power_of_two(), got: d });
    }
    let n_q = d.trailing_zeros() as usize;
    let bit = |s: usize, q: usize| (s >> (n_q - 1 - q)) & 1;
    let mut z = vec![0.0; n_q];
    let mut zz = vec![vec![0.0; n_q]; n_q];
    for (s, &w) in p.iter().enumerate() {
        let zs: Vec<f64> = (0..n_q).map(|q| 1.0 - 2.0 * bit(s, q) as f64).collect();
        for i in 0..n_q {
            z[i] += w * zs[i];
            for j in 0..n_q {
                zz[i][j] += w * zs[i] * zs[j];
            }
        }
    }
    let n = z.iter().map(|zi| (1.0 - zi) / 2.0).collect();
    let connected = (0..n_q).map(|i| (0..n_q).map(|j| zz[i][j] - z[i] * z[j]).collect()).collect();
    Ok(Observables { n, z, zz, connected })
}

pub fn observables_from_state(psi: &CVec) -> Result<Observables> {
    let p: Vec<f64> = psi.iter().map(|a| a.norm_sqr()).collect();
    observables_from_populations(&p)
}

pub fn observables_from_density(rho: &CMat) -> Result<Observables> {
    let p: Vec<f64> = rho.diagonal().iter().map(|a| a.re).collect();
    observables_from_populations(&p)
}

/// `U |psi0>`.
pub fn evolve(u: &CMat, psi0: &CVec) -> Result<CVec> {
    if u.ncols() != psi0.len() {
        return Err(Error::SizeMismatch { expected: u.ncols(), got: psi0.len() });
    }
    Ok(u * psi0)
}

/// `|0...0>` on `d` basis states.
pub fn ground_state(d: usize) -> CVec {
    let mut v = CVec::zeros(d);
    v[0] = c(1.0);
    v
}

/// CSV with columns `t_us,site,expect_n,expect_z`, sites 1-based.
pub fn trajectory_csv(records: &[(f64, Observables)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t_us", "site", "expect_n", "expect_z"])?;
    for (t, obs) in records {
        for (i, (n, z)) in obs.n.iter().zip(&obs.z).enumerate() {
            w.write_record([t.to_string(), (i + 1).to_string(), n.to_string(), z.to_string()])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationRecord {
    pub t_us: f64,
    pub zz: Vec<Vec<f64>>,
    pub connected: Vec<Vec<f64>>,
}

pub fn correlation_json(records: &[(f64, Observables)]) -> Result<String> {
    let recs: Vec<CorrelationRecord> = records
        .iter()
        .map(|(t, o)| CorrelationRecord { t_us: *t, zz: o.zz.clone(), connected: o.connected.clone() })
        .collect();
    Ok(serde_json::to_string_pretty(&recs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, pauli_x, unitarity_defect};
    use crate::models::{zxz_hamiltonian, AtomGeometry};
    use std::f64::consts::PI;

    fn system(n: usize) -> RydbergSystem {
        RydbergSystem::new(AtomGeometry::chain(n, 8.9).unwrap()).unwrap()
    }

    fn smooth_pulse(duration: f64) -> ControlPulse {
        let n = 25;
        let t: Vec<f64> = (0..n).map(|k| duration * k as f64 / (n - 1) as f64).collect();
        let omega = t.iter().map(|&x| mhz(2.0) * (PI * x / duration).sin()).collect();
        let delta = t.iter().map(|&x| mhz(5.0) * (2.0 * PI * x / duration).cos()).collect();
        ControlPulse::new(t, omega, delta).unwrap()
    }

    #[test]
    fn zero_pulse_is_identity() {
        let p = ControlPulse::constant(0.0, 0.0, 1.0).unwrap();
        let u = propagate_unitary(&p, &system(1), &PropagateOptions::default()).unwrap();
        assert!(frobenius(&(u - CMat::identity(2, 2))) < 1e-14);
    }

    #[test]
    fn constant_rabi_rotation() {
        let p = ControlPulse::constant(mhz(1.0), 0.0, 0.5).unwrap();
        assert!(propagate_unitary(&p, &system(1), &PropagateOptions::default()).is_err());
        let u = propagate_unitary(&p, &system(1), &PropagateOptions::forced()).unwrap();
        let expect = expm_hermitian(&pauli_x(), PI * 0.5);
        assert!(frobenius(&(u - expect)) < 1e-10);
    }

    #[test]
    fn midpoint_rule_is_second_order() {
        let p = smooth_pulse(1.0);
        let sys = system(2);
        let opts = |s| PropagateOptions::forced().with_substeps(s);
        let reference = propagate_unitary(&p, &sys, &opts(40)).unwrap();
        let e1 = frobenius(&(propagate_unitary(&p, &sys, &opts(2)).unwrap() - &reference));
        let e2 = frobenius(&(propagate_unitary(&p, &sys, &opts(4)).unwrap() - &reference));
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
        assert!(unitarity_defect(&reference) < 1e-9);
    }

    #[test]
    fn validation_catches_each_limit() {
        let prof = ConstraintProfile::default();
        let ok = ControlPulse::from_mhz(vec![0.0, 0.1, 0.2], &[0.0, 2.0, 0.0], &[0.0, 10.0, 0.0]).unwrap();
        assert!(ok.validate(&prof).is_ok());
        let cases = [
            (vec![0.0, 0.1, 0.2], [0.0, 3.0, 0.0], [0.0, 0.0, 0.0]),
            (vec![0.0, 0.1, 0.2], [0.0, 2.0, 0.0], [0.0, 25.0, 0.0]),
            (vec![0.0, 0.1, 0.2], [0.0, 2.0, 0.0], [0.0, 19.9, -19.9]),
            (vec![0.0, 0.01, 0.2], [0.0, 0.3, 0.0], [0.0, 0.0, 0.0]),
            (vec![0.0, 0.1, 0.2], [0.0, 2.0, 1.0], [0.0, 0.0, 0.0]),
        ];
        for (t, o, d) in cases {
            let p = ControlPulse::from_mhz(t, &o, &d).unwrap();
            assert!(p.validate(&prof).is_err(), "{p:?}");
        }
        assert!(ControlPulse::new(vec![0.0, 0.0], vec![0.0; 2], vec![0.0; 2]).is_err());
        assert!(ControlPulse::new(vec![0.1, 0.2], vec![0.0; 2], vec![0.0; 2]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let p = smooth_pulse(1.2);
        let s = p.to_csv_string().unwrap();
        assert!(s.starts_with("t_us,omega_MHz,delta_MHz\n"));
        let back = ControlPulse::from_csv_str(&s).unwrap();
        for k in 0..p.len() {
            assert!((back.omega[k] - p.omega[k]).abs() < 1e-12);
            assert!((back.delta[k] - p.delta[k]).abs() < 1e-12);
        }
        assert!(ControlPulse::from_csv_str("t,o,d\n0,0,0\n1,0,0\n").is_err());
    }

    #[test]
    fn noiseless_lindblad_matches_unitary() {
        let p = smooth_pulse(1.0);
        let sys = system(2);
        let opts = LindbladOptions { force: true, ..Default::default() };
        let traj = propagate_lindblad(&p, &sys, &NoiseModel::ideal(), &opts).unwrap();
        let u = propagate_unitary(&p, &sys, &PropagateOptions::forced().with_substeps(320)).unwrap();
        let psi = &u * ground_state(4);
        let rho = &psi * psi.adjoint();
        assert!(frobenius(&(&traj.last().unwrap().rho - rho)) < 1e-6);
        assert_eq!(traj.len(), p.len());
    }

    #[test]
    fn single_atom_decay() {
        let p = ControlPulse::constant(0.0, 0.0, 4.0).unwrap();
        let mut rho = CMat::zeros(2, 2);
        rho[(1, 1)] = c(1.0);
        let noise = NoiseModel { gamma: 0.049, ..NoiseModel::ideal() };
        let opts = LindbladOptions { initial: Some(rho), record_times: vec![1.0, 2.0], ..Default::default() };
        let traj = propagate_lindblad(&p, &system(1), &noise, &opts).unwrap();
        for s in &traj {
            let n = observables_from_density(&s.rho).unwrap().n[0];
            assert!((n - (-0.049 * s.time).exp()).abs() < 1e-6, "t={}", s.time);
        }
        assert_eq!(traj.iter().map(|s| s.time).collect::<Vec<_>>(), vec![0.0, 1.0, 2.0, 4.0]);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let p = smooth_pulse(0.48);
        let sys = system(2);
        let noise = NoiseModel::fitted();
        let run = |dt| {
            let o = LindbladOptions { dt, force: true, ..Default::default() };
            propagate_lindblad(&p, &sys, &noise, &o).unwrap().pop().unwrap().rho
        };
        let reference = run(0.001);
        let e1 = frobenius(&(run(0.02) - &reference));
        let e2 = frobenius(&(run(0.01) - &reference));
        let ratio = e1 / e2;
        assert!((ratio - 16.0).abs() < 4.0, "ratio {ratio}");
    }

    #[test]
    fn oversized_step_is_reported() {
        let p = ControlPulse::constant(mhz(2.0), mhz(19.0), 1.0).unwrap();
        let opts = LindbladOptions { dt: 0.5, force: true, max_halvings: 1, ..Default::default() };
        let e = propagate_lindblad(&p, &system(3), &NoiseModel::fitted(), &opts).unwrap_err();
        assert!(matches!(e, Error::StepTooLarge { .. }));
    }

    #[test]
    fn observable_examples() {
        let o = observables_from_state(&ground_state(8)).unwrap();
        assert_eq!(o.z, vec![1.0; 3]);
        assert!(o.connected.iter().flatten().all(|&x| x == 0.0));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let ghz = CVec::from_vec(vec![c(s), c(0.0), c(0.0), c(s)]);
        let o = observables_from_state(&ghz).unwrap();
        assert!((o.zz[0][1] - 1.0).abs() < 1e-12);
        assert!(o.z.iter().all(|z| z.abs() < 1e-12));
        assert!((o.connected[0][1] - 1.0).abs() < 1e-12);
        let csv = trajectory_csv(&[(0.5, o.clone())]).unwrap();
        assert!(csv.starts_with("t_us,site,expect_n,expect_z\n0.5,1,"));
        assert!(correlation_json(&[(0.5, o)]).unwrap().contains("connected"));
    }

    #[test]
    fn zxz_boundaries_are_frozen() {
        let n = 6;
        let h = zxz_hamiltonian(n, 1.0).unwrap().to_dense().unwrap();
        for tau in [0.2, 0.5, 0.8] {
            let psi = expm_hermitian(&h, tau) * ground_state(1 << n);
            let o = observables_from_state(&psi).unwrap();
            assert!((o.z[0] - 1.0).abs() < 1e-10 && (o.z[n - 1] - 1.0).abs() < 1e-10);
            assert!((o.zz[0][n - 1] - 1.0).abs() < 1e-10);
        }
    }
}
