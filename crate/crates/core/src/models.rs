//! Concrete Hamiltonians: Rydberg arrays, the cluster-Ising (ZXZ) chain, the
//! blockade-regime PXP model and the uniformly controlled qubit chain.
//!
//! Internal frequencies are angular (rad/µs). Use [`mhz`] to convert a
//! frequency given in MHz.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::closure::GeneratorSet;
use crate::error::{Error, Result};
use crate::linalg::{c, CMat};
use crate::pauli::{self, field, nearest_neighbour, uniform_field, Pauli, PauliSum, DENSE_QUBIT_BUDGET};

/// Van der Waals coefficient of the experiment in MHz·µm⁶.
pub const C6_MHZ_UM6: f64 = 862_690.0;
/// Default atom spacing in µm.
pub const CHAIN_SPACING_UM: f64 = 8.9;

/// MHz to rad/µs.
pub fn mhz(f: f64) -> f64 {
    f * TAU
}

/// rad/µs to MHz.
pub fn to_mhz(w: f64) -> f64 {
    w / TAU
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomGeometry {
    /// Positions in µm.
    pub positions: Vec<[f64; 2]>,
    /// rad/µs·µm⁶.
    pub c6: f64,
}

impl AtomGeometry {
    pub fn new(positions: Vec<[f64; 2]>, c6: f64) -> Result<Self> {
        if !(c6.is_finite() && c6 > 0.0) {
            return Err(Error::InvalidArgument(format!("c6 must be positive, got {c6}")));
        }
        for (i, a) in positions.iter().enumerate() {
            if !(a[0].is_finite() && a[1].is_finite()) {
                return Err(Error::InvalidArgument(format!("atom {} has a non-finite position", i + 1)));
            }
            for (j, b) in positions.iter().enumerate().skip(i + 1) {
                if dist(a, b) <= 0.0 {
                    return Err(Error::InvalidArgument(format!("atoms {} and {} coincide", i + 1, j + 1)));
                }
            }
        }
        Ok(Self { positions, c6 })
    }

    /// Evenly spaced chain along x with the experimental `C6`.
    pub fn chain(n: usize, spacing_um: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::QubitCount(0));
        }
        Self::new((0..n).map(|i| [i as f64 * spacing_um, 0.0]).collect(), mhz(C6_MHZ_UM6))
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `V_jl = C6 / r^6` in rad/µs (0-based indices).
    pub fn interaction(&self, j: usize, l: usize) -> f64 {
        self.c6 / dist(&self.positions[j], &self.positions[l]).powi(6)
    }

    /// `(C6 / omega_max)^(1/6)` in µm, `omega_max` in rad/µs.
    pub fn blockade_radius(&self, omega_max: f64) -> Result<f64> {
        blockade_radius(self.c6, omega_max)
    }

    /// Reads a JSON list of `[x, y]` positions (µm); uses the experimental `C6`.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let positions: Vec<[f64; 2]> = serde_json::from_str(s)?;
        Self::new(positions, mhz(C6_MHZ_UM6))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.positions)?)
    }
}

fn dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub fn blockade_radius(c6: f64, omega_max: f64) -> Result<f64> {
    if !(omega_max > 0.0) {
        return Err(Error::InvalidArgument(format!("omega_max must be positive, got {omega_max}")));
    }
    Ok((c6 / omega_max).powf(1.0 / 6.0))
}

/// `n_j = (I - Z_j) / 2` with `|1> = |r>`.
pub fn rydberg_density(site: usize, n: usize) -> Result<PauliSum> {
    Ok(&PauliSum::identity(n, 0.5)? - &PauliSum::single(Pauli::Z, site, n, 0.5)?)
}

/// Precomputed pieces of `H = (Ω/2) Σ X_l - Δ Σ n_l + Σ V_jl n_j n_l`.
///
/// The drive and interaction parts are stored separately so the Hamiltonian
/// for a new `(Ω, Δ)` is a cheap linear combination.
#[derive(Debug, Clone)]
pub struct RydbergSystem {
    pub geometry: AtomGeometry,
    /// `Σ X_l`.
    pub drive: CMat,
    /// Diagonal of `Σ n_l` (excitation count per basis state).
    pub excitations: Vec<f64>,
    /// Diagonal of `Σ V_jl n_j n_l`.
    pub interactions: Vec<f64>,
}

impl RydbergSystem {
    pub fn new(geometry: AtomGeometry) -> Result<Self> {
        let n = geometry.len();
        if n == 0 || n > DENSE_QUBIT_BUDGET {
            return Err(Error::BudgetExceeded { what: "atoms", value: n, limit: DENSE_QUBIT_BUDGET });
        }
        let d = 1usize << n;
        let mut drive = CMat::zeros(d, d);
        let mut excitations = vec![0.0; d];
        let mut interactions = vec![0.0; d];
        for s in 0..d {
            // atom k (0-based) is the bit n-1-k of the basis index
            let occ = |k: usize| (s >> (n - 1 - k)) & 1 == 1;
            for k in 0..n {
                drive[(s ^ (1 << (n - 1 - k)), s)] = c(1.0);
                if occ(k) {
                    excitations[s] += 1.0;
                    for l in k + 1..n {
                        if occ(l) {
                            interactions[s] += geometry.interaction(k, l);
                        }
                    }
                }
            }
        }
        Ok(Self { geometry, drive, excitations, interactions })
    }

    pub fn n_atoms(&self) -> usize {
        self.geometry.len()
    }

    pub fn dim(&self) -> usize {
        self.excitations.len()
    }

    /// Dense Hamiltonian, `omega` and `delta` in rad/µs.
    pub fn hamiltonian(&self, omega: f64, delta: f64) -> CMat {
        let mut h = self.drive.map(|z| z * (0.5 * omega));
        for s in 0..self.dim() {
            h[(s, s)] += c(self.interactions[s] - delta * self.excitations[s]);
        }
        h
    }
}

/// Dense Rydberg Hamiltonian in rad/µs.
pub fn rydberg_hamiltonian(geom: &AtomGeometry, omega: f64, delta: f64) -> Result<CMat> {
    if !(omega.is_finite() && delta.is_finite()) {
        return Err(Error::InvalidArgument("controls must be finite".into()));
    }
    Ok(RydbergSystem::new(geom.clone())?.hamiltonian(omega, delta))
}

/// Pauli form `(Ω/2) Σ X_l - Δ Σ n_l + Σ_{j<l} V_jl n_j n_l`.
pub fn rydberg_pauli(geom: &AtomGeometry, omega: f64, delta: f64) -> Result<PauliSum> {
    let n = geom.len();
    if n == 0 {
        return Err(Error::QubitCount(0));
    }
    let mut h = uniform_field(Pauli::X, n)?.scaled(0.5 * omega);
    let dens: Vec<PauliSum> = (1..=n).map(|j| rydberg_density(j, n)).collect::<Result<_>>()?;
    for d in &dens {
        h = h.axpy(-delta, d)?;
    }
    for j in 0..n {
        for l in j + 1..n {
            // n_j n_l = (I - Z_j - Z_l + Z_j Z_l) / 4
            let v = geom.interaction(j, l) / 4.0;
            let zz = pauli::string(&[(Pauli::Z, j + 1), (Pauli::Z, l + 1)], n, 1.0)?;
            h = h.axpy(v, &PauliSum::identity(n, 1.0)?)?;
            h = h.axpy(-v, &PauliSum::single(Pauli::Z, j + 1, n, 1.0)?)?;
            h = h.axpy(-v, &PauliSum::single(Pauli::Z, l + 1, n, 1.0)?)?;
            h = h.axpy(v, &zz)?;
        }
    }
    Ok(h)
}

/// `J Σ_{j=2}^{N-1} Z_{j-1} X_j Z_{j+1}` on an open chain.
pub fn zxz_hamiltonian(n: usize, j_eff: f64) -> Result<PauliSum> {
    if n < 3 {
        return Err(Error::QubitCount(n));
    }
    let mut h = PauliSum::zero(n)?;
    for j in 2..n {
        h = h.try_add(&pauli::string(&[(Pauli::Z, j - 1), (Pauli::X, j), (Pauli::Z, j + 1)], n, j_eff)?)?;
    }
    Ok(h)
}

/// `(Ω/2) Σ_{i=2}^{N-1} P_{i-1} X_i P_{i+1} - Δ Σ n_i` with `P = (I + Z)/2`.
pub fn pxp_hamiltonian(n: usize, omega: f64, delta: f64) -> Result<PauliSum> {
    if n < 3 {
        return Err(Error::QubitCount(n));
    }
    let mut h = PauliSum::zero(n)?;
    for i in 2..n {
        let q = omega / 8.0;
        for (zl, zr) in [(false, false), (true, false), (false, true), (true, true)] {
            let mut f = vec![(Pauli::X, i)];
            if zl {
                f.push((Pauli::Z, i - 1));
            }
            if zr {
                f.push((Pauli::Z, i + 1));
            }
            h = h.try_add(&pauli::string(&f, n, q)?)?;
        }
    }
    for i in 1..=n {
        h = h.axpy(-delta, &rydberg_density(i, n)?)?;
    }
    Ok(h)
}

/// `{Σ X, Σ Z, Σ Z_j Z_{j+1}}` plus `Σ_{j∈α} X_j` when the pattern is non-empty.
pub fn uniform_control_family(n: usize, break_pattern: &BTreeSet<usize>) -> Result<GeneratorSet> {
    for &j in break_pattern {
        if j == 0 || j > n {
            return Err(Error::IndexOutOfRange { index: j, max: n });
        }
    }
    let mut gens = vec![
        uniform_field(Pauli::X, n)?,
        uniform_field(Pauli::Z, n)?,
        nearest_neighbour(Pauli::Z, Pauli::Z, n)?,
    ];
    if !break_pattern.is_empty() {
        gens.push(field(Pauli::X, break_pattern.iter().copied(), n)?);
    }
    let label = if break_pattern.is_empty() {
        format!("uniform chain n={n}")
    } else {
        let sites: Vec<String> = break_pattern.iter().map(|s| s.to_string()).collect();
        format!("uniform chain n={n} + X on {{{}}}", sites.join(","))
    };
    GeneratorSet::pauli(label, gens)
}

/// Decay rate and calibration offsets. Rates and shifts are in rad/µs except
/// `gamma`, which is a plain rate in 1/µs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub gamma: f64,
    pub delta_detuning_shift: f64,
    pub delta_rabi_shift: f64,
    pub rabi_scale_error: f64,
}

impl NoiseModel {
    pub fn ideal() -> Self {
        Self { gamma: 0.0, delta_detuning_shift: 0.0, delta_rabi_shift: 0.0, rabi_scale_error: 0.0 }
    }

    /// Best fit to the experimental data (`gamma` assumed to be per µs).
    pub fn fitted() -> Self {
        Self {
            gamma: 0.049,
            delta_detuning_shift: mhz(-0.049),
            delta_rabi_shift: mhz(-0.032),
            rabi_scale_error: -0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.gamma, self.delta_detuning_shift, self.delta_rabi_shift, self.rabi_scale_error];
        if all.iter().any(|x| !x.is_finite()) || self.gamma < 0.0 {
            return Err(Error::InvalidArgument(format!("invalid noise model {self:?}")));
        }
        Ok(())
    }

    pub fn is_coherent_identity(&self) -> bool {
        self.delta_detuning_shift == 0.0 && self.delta_rabi_shift == 0.0 && self.rabi_scale_error == 0.0
    }

    /// Realized `(Ω, Δ)` for input controls (rad/µs).
    pub fn apply(&self, omega: f64, delta: f64) -> (f64, f64) {
        (omega + self.delta_rabi_shift + self.rabi_scale_error * omega, delta + self.delta_detuning_shift)
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::ideal()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigh, expm_hermitian, frobenius, pauli_x, CVec, ONE, ZERO};
    use std::f64::consts::PI;

    fn ps(s: &str) -> PauliSum {
        s.parse().unwrap()
    }

    #[test]
    fn single_atom_rabi() {
        let g = AtomGeometry::chain(1, 1.0).unwrap();
        let h = rydberg_hamiltonian(&g, mhz(1.0), 0.0).unwrap();
        assert!(frobenius(&(h - pauli_x().map(|z| z * PI))) < 1e-12);
    }

    #[test]
    fn chain_interaction_strength() {
        let g = AtomGeometry::chain(2, CHAIN_SPACING_UM).unwrap();
        let expect = TAU * 862690.0 / 8.9f64.powi(6);
        assert!((g.interaction(0, 1) - expect).abs() < 1e-9);
        assert!((to_mhz(g.interaction(0, 1)) - 1.7359).abs() < 1e-3);
    }

    #[test]
    fn blockade_radius_follows_formula() {
        let g = AtomGeometry::chain(2, CHAIN_SPACING_UM).unwrap();
        let r = g.blockade_radius(mhz(2.4)).unwrap();
        let oracle = (862690.0f64 / 2.4).ln() / 6.0;
        assert!((r - oracle.exp()).abs() < 1e-9);
        assert!((r - 8.43).abs() < 0.01);
        assert!(g.blockade_radius(0.0).is_err());
    }

    #[test]
    fn dense_and_pauli_rydberg_agree() {
        let g = AtomGeometry::new(vec![[0.0, 0.0], [7.0, 1.0], [15.0, -2.0]], mhz(C6_MHZ_UM6)).unwrap();
        let (om, de) = (mhz(1.3), mhz(-4.0));
        let a = rydberg_hamiltonian(&g, om, de).unwrap();
        let b = rydberg_pauli(&g, om, de).unwrap().to_dense().unwrap();
        assert!(frobenius(&(a - b)) < 1e-9);
    }

    #[test]
    fn free_atoms_have_half_rabi_spectrum() {
        let g = AtomGeometry::new(vec![[0.0, 0.0], [1e6, 0.0]], 1e-30).unwrap();
        let h = RydbergSystem::new(g).unwrap().hamiltonian(2.0, 0.0);
        let (vals, _) = eigh(&h);
        let mut v: Vec<f64> = vals.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        for (a, b) in v.iter().zip([-2.0, 0.0, 0.0, 2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn geometry_validation_and_json() {
        assert!(AtomGeometry::new(vec![[0.0, 0.0], [0.0, 0.0]], 1.0).is_err());
        assert!(AtomGeometry::new(vec![[0.0, 0.0]], -1.0).is_err());
        let g = AtomGeometry::from_json_str("[[0,0],[8.9,0]]").unwrap();
        assert_eq!(g.len(), 2);
        let back = AtomGeometry::from_json_str(&g.to_json_string().unwrap()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn zxz_boundary_commutation() {
        assert_eq!(zxz_hamiltonian(3, 1.0).unwrap(), ps("1 ZXZ"));
        assert!(zxz_hamiltonian(2, 1.0).is_err());
        for n in 3..=7 {
            let h = zxz_hamiltonian(n, 1.0).unwrap();
            assert!(h.commutator(&PauliSum::single(Pauli::Z, 1, n, 1.0).unwrap()).unwrap().is_empty());
            assert!(h.commutator(&PauliSum::single(Pauli::Z, n, n, 1.0).unwrap()).unwrap().is_empty());
        }
    }

    #[test]
    fn zxz_edge_operators_anticommute_and_are_conserved() {
        for n in [4, 6, 8] {
            let h = zxz_hamiltonian(n, 1.0).unwrap();
            let p1 = pauli::string(&[(Pauli::X, 1), (Pauli::Z, 2)], n, 1.0).unwrap();
            let p2 = PauliSum::single(Pauli::Z, 1, n, 1.0).unwrap();
            assert!(h.commutator(&p1).unwrap().is_empty());
            assert!(h.commutator(&p2).unwrap().is_empty());
            assert!(!p1.commutator(&p2).unwrap().is_empty());
        }
    }

    #[test]
    fn zxz_half_pi_maps_ground_to_edge_flipped_state() {
        for n in 3..=7 {
            let h = zxz_hamiltonian(n, 1.0).unwrap().to_dense().unwrap();
            let u = expm_hermitian(&h, PI / 2.0);
            // |0 1 1 ... 1 0>
            let target = ((1usize << (n - 1)) - 1) & !1;
            assert!((u[(target, 0)].norm() - 1.0).abs() < 1e-10, "n={n}");
        }
    }

    #[test]
    fn pxp_expansion_and_blockade() {
        let h = pxp_hamiltonian(3, 8.0, 0.0).unwrap();
        assert_eq!(h, ps("1 IXI\n1 ZXI\n1 IXZ\n1 ZXZ"));
        let diag = pxp_hamiltonian(4, 0.0, 1.3).unwrap().to_dense().unwrap();
        for i in 0..16 {
            for j in 0..16 {
                if i != j {
                    assert_eq!(diag[(i, j)], ZERO);
                }
            }
        }
        let n = 4;
        let h = pxp_hamiltonian(n, 2.0, 0.7).unwrap().to_dense().unwrap();
        let mut psi = CVec::from_element(1 << n, ZERO);
        psi[0] = ONE;
        for t in [0.3, 1.1, 4.7] {
            let out = expm_hermitian(&h, t) * &psi;
            for s in 0..(1usize << n) {
                if s & (s >> 1) != 0 {
                    assert!(out[s].norm_sqr() < 1e-20);
                }
            }
        }
    }

    #[test]
    fn control_family_shapes() {
        let g = uniform_control_family(2, &BTreeSet::new()).unwrap();
        assert_eq!(g.len(), 3);
        let GeneratorSet::Pauli { generators, .. } = &g else { panic!() };
        assert_eq!(generators[0], ps("1 XI\n1 IX"));
        assert!(uniform_control_family(3, &BTreeSet::from([4])).is_err());
        assert_eq!(uniform_control_family(6, &BTreeSet::from([1, 3, 5])).unwrap().len(), 4);
    }

    #[test]
    fn dual_species_relations() {
        // H_1 = X on odd sites, H_2 = X on even sites, H_X = H_1 + H_2
        let n = 6;
        let g = uniform_control_family(n, &BTreeSet::from([1, 3, 5])).unwrap();
        let GeneratorSet::Pauli { generators, .. } = &g else { panic!() };
        let h1 = &generators[3];
        let h2 = field(Pauli::X, [2, 4, 6], n).unwrap();
        assert!(generators[0].max_abs_diff(&(h1 + &h2)).unwrap() < 1e-15);
    }

    #[test]
    fn noise_offsets() {
        let m = NoiseModel::fitted();
        let (o, d) = m.apply(mhz(2.0), mhz(1.0));
        assert!((to_mhz(o) - (2.0 - 0.032 - 0.1)).abs() < 1e-12);
        assert!((to_mhz(d) - (1.0 - 0.049)).abs() < 1e-12);
        assert_eq!(NoiseModel::ideal().apply(3.0, 4.0), (3.0, 4.0));
        assert!(NoiseModel { gamma: -1.0, ..NoiseModel::ideal() }.validate().is_err());
    }
}
