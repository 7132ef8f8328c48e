//! Second-quantized operators on fixed-particle-number sectors.
//!
//! Modes are 1-based. Spinful modes are ordered by site, spin-up first, so
//! `(site s, up)` is mode `2s - 1` and `(site s, down)` is mode `2s`.
//! Sector states are occupation tuples in descending lexicographic order,
//! e.g. `{10, 01}` or `{20, 11, 02}`.

use std::collections::HashMap;

use serde::Serialize;

use crate::closure::GeneratorSet;
use crate::error::{Error, Result};
use crate::linalg::{c, commutator, CMat};

/// Largest sector dimension built by default.
pub const SECTOR_DIM_BUDGET: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorKind {
    Fermion,
    Boson,
    SpinfulFermion,
}

impl std::str::FromStr for SectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fermion" => Ok(SectorKind::Fermion),
            "boson" => Ok(SectorKind::Boson),
            "spinful" | "spinful_fermion" => Ok(SectorKind::SpinfulFermion),
            other => Err(Error::Parse(format!("unknown sector kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SectorBasis {
    pub kind: SectorKind,
    pub n_modes: usize,
    pub n_particles: usize,
    pub states: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r.min(usize::MAX as u128) as usize
}

impl SectorBasis {
    /// `n_modes` counts modes, not sites (a spinful chain of `N` sites has `2N`).
    pub fn new(kind: SectorKind, n_modes: usize, n_particles: usize) -> Result<Self> {
        Self::with_budget(kind, n_modes, n_particles, SECTOR_DIM_BUDGET)
    }

    pub fn with_budget(kind: SectorKind, n_modes: usize, n_particles: usize, budget: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::InvalidArgument("a sector needs at least one mode".into()));
        }
        if kind == SectorKind::SpinfulFermion && n_modes % 2 != 0 {
            return Err(Error::InvalidArgument("spinful sectors need an even number of modes".into()));
        }
        let dim = match kind {
            SectorKind::Boson => binomial(n_particles + n_modes - 1, n_particles),
            _ => binomial(n_modes, n_particles),
        };
        if dim == 0 {
            return Err(Error::InvalidArgument(format!("{n_particles} fermions do not fit in {n_modes} modes")));
        }
        if dim > budget {
            return Err(Error::BudgetExceeded { what: "sector dimension", value: dim, limit: budget });
        }
        let max_occ = if kind == SectorKind::Boson { n_particles as u8 } else { 1 };
        let mut states = Vec::with_capacity(dim);
        let mut cur = vec![0u8; n_modes];
        fill(&mut states, &mut cur, 0, n_particles, max_occ);
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(Self { kind, n_modes, n_particles, states, index })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, occupation: &[u8]) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    fn check_mode(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.n_modes {
            return Err(Error::IndexOutOfRange { index: i, max: self.n_modes });
        }
        Ok(())
    }

    fn is_fermionic(&self) -> bool {
        self.kind != SectorKind::Boson
    }
}

// depth-first with larger occupations first gives descending lexicographic order
fn fill(out: &mut Vec<Vec<u8>>, cur: &mut Vec<u8>, pos: usize, left: usize, max_occ: u8) {
    if pos == cur.len() - 1 {
        if left <= max_occ as usize {
            cur[pos] = left as u8;
            out.push(cur.clone());
        }
        return;
    }
    for k in (0..=left.min(max_occ as usize)).rev() {
        cur[pos] = k as u8;
        fill(out, cur, pos + 1, left - k, max_occ);
    }
    cur[pos] = 0;
}

/// Spinful mode index for a 1-based site; `up` selects spin-up.
pub fn spin_mode(site: usize, up: bool) -> usize {
    2 * site - usize::from(up)
}

/// Matrix of `a_i^dagger a_j` on the sector.
pub fn transfer(basis: &SectorBasis, i: usize, j: usize) -> Result<CMat> {
    basis.check_mode(i)?;
    basis.check_mode(j)?;
    let (i0, j0) = (i - 1, j - 1);
    let d = basis.dim();
    let mut m = CMat::zeros(d, d);
    for (col, s) in basis.states.iter().enumerate() {
        if s[j0] == 0 {
            continue;
        }
        let mut t = s.clone();
        let mut amp;
        if basis.is_fermionic() {
            let below_j = t[..j0].iter().filter(|&&o| o == 1).count();
            t[j0] = 0;
            if t[i0] == 1 {
                continue;
            }
            let below_i = t[..i0].iter().filter(|&&o| o == 1).count();
            t[i0] = 1;
            amp = if (below_i + below_j) % 2 == 0 { 1.0 } else { -1.0 };
        } else {
            amp = (t[j0] as f64).sqrt();
            t[j0] -= 1;
            amp *= (t[i0] as f64 + 1.0).sqrt();
            t[i0] += 1;
        }
        let row = basis.index_of(&t).expect("particle number is conserved");
        m[(row, col)] += c(amp);
    }
    Ok(m)
}

/// `a_i^dagger a_j + a_j^dagger a_i`.
pub fn hopping(basis: &SectorBasis, i: usize, j: usize) -> Result<CMat> {
    if i == j {
        return Err(Error::InvalidArgument(format!("hopping needs two distinct modes, got {i} twice")));
    }
    let t = transfer(basis, i, j)?;
    Ok(&t + t.adjoint())
}

pub fn number_op(basis: &SectorBasis, i: usize) -> Result<CMat> {
    basis.check_mode(i)?;
    let d = basis.dim();
    let mut m = CMat::zeros(d, d);
    for (k, s) in basis.states.iter().enumerate() {
        m[(k, k)] = c(s[i - 1] as f64);
    }
    Ok(m)
}

/// Named control Hamiltonians on one sector.
#[derive(Debug, Clone)]
pub struct ControlFamily {
    pub label: String,
    pub basis: SectorBasis,
    pub controls: Vec<(String, CMat)>,
}

impl ControlFamily {
    pub fn names(&self) -> Vec<&str> {
        self.controls.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&CMat> {
        self.controls.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn push(&mut self, name: impl Into<String>, op: CMat) -> Result<()> {
        if op.shape() != (self.basis.dim(), self.basis.dim()) {
            return Err(Error::SizeMismatch { expected: self.basis.dim(), got: op.nrows() });
        }
        self.controls.push((name.into(), op));
        Ok(())
    }

    /// The family with the named controls removed.
    pub fn without(&self, names: &[&str]) -> Result<ControlFamily> {
        for n in names {
            if self.get(n).is_none() {
                return Err(Error::InvalidArgument(format!(
                    "unknown control '{n}', expected one of {:?}",
                    self.names()
                )));
            }
        }
        let mut out = self.clone();
        out.controls.retain(|(n, _)| !names.contains(&n.as_str()));
        out.label = format!("{} without {}", self.label, names.join(","));
        Ok(out)
    }

    pub fn generator_set(&self) -> Result<GeneratorSet> {
        GeneratorSet::dense(self.label.clone(), self.controls.iter().map(|(_, m)| m.clone()).collect())
    }
}

fn check_odd_chain(n_sites: usize) -> Result<()> {
    if n_sites < 3 || n_sites % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "superlattice chain universality is established for an odd number of sites >= 3, got {n_sites}"
        )));
    }
    Ok(())
}

fn sum(ops: impl IntoIterator<Item = Result<CMat>>, d: usize) -> Result<CMat> {
    let mut acc = CMat::zeros(d, d);
    for op in ops {
        acc += op?;
    }
    Ok(acc)
}

/// `{hop_odd, hop_even, mu_odd, mu_even, U}` for a spinless chain.
/// Fermions use `U = Σ_{i<N} n_i n_{i+1}`; bosons use `U = Σ_{i<N} n_i (n_i - 1)`.
pub fn build_hubbard_chain_controls(kind: SectorKind, n_sites: usize, n_particles: usize) -> Result<ControlFamily> {
    if kind == SectorKind::SpinfulFermion {
        return Err(Error::InvalidArgument("use build_spinful_controls for spinful chains".into()));
    }
    check_odd_chain(n_sites)?;
    let basis = SectorBasis::new(kind, n_sites, n_particles)?;
    let d = basis.dim();
    let b = &basis;
    let bonds = |parity: usize| (1..n_sites).filter(move |i| i % 2 == parity);
    let sites = |parity: usize| (1..=n_sites).filter(move |i| i % 2 == parity);
    let hop_odd = sum(bonds(1).map(|i| hopping(b, i, i + 1)), d)?;
    let hop_even = sum(bonds(0).map(|i| hopping(b, i, i + 1)), d)?;
    let mu_odd = sum(sites(1).map(|i| number_op(b, i)), d)?;
    let mu_even = sum(sites(0).map(|i| number_op(b, i)), d)?;
    let mut u = CMat::zeros(d, d);
    for i in 1..n_sites {
        let ni = number_op(b, i)?;
        u += match kind {
            SectorKind::Fermion => &ni * number_op(b, i + 1)?,
            _ => &ni * (&ni - CMat::identity(d, d)),
        };
    }
    let name = if kind == SectorKind::Fermion { "fermion" } else { "boson" };
    Ok(ControlFamily {
        label: format!("{name} chain N={n_sites} n={n_particles}"),
        controls: vec![
            ("hop_odd".into(), hop_odd),
            ("hop_even".into(), hop_even),
            ("mu_odd".into(), mu_odd),
            ("mu_even".into(), mu_even),
            ("U".into(), u),
        ],
        basis,
    })
}

/// `Σ_i (a i + b)(n_{i,up} - n_{i,down})`.
pub fn spin_z_field(basis: &SectorBasis, a: f64, b: f64) -> Result<CMat> {
    let d = basis.dim();
    let mut acc = CMat::zeros(d, d);
    for s in 1..=basis.n_modes / 2 {
        let w = a * s as f64 + b;
        acc += (number_op(basis, spin_mode(s, true))? - number_op(basis, spin_mode(s, false))?) * c(w);
    }
    Ok(acc)
}

/// The seven spinful controls `{hop_odd, hop_even, mu_odd, mu_even, BX, BZ(a, b), U}`.
pub fn build_spinful_controls(n_sites: usize, n_particles: usize, a: f64, b: f64) -> Result<ControlFamily> {
    check_odd_chain(n_sites)?;
    let basis = SectorBasis::new(SectorKind::SpinfulFermion, 2 * n_sites, n_particles)?;
    let d = basis.dim();
    let bs = &basis;
    let spins = [true, false];
    let hop = |parity: usize| {
        sum(
            (1..n_sites)
                .filter(|i| i % 2 == parity)
                .flat_map(|i| spins.map(|up| hopping(bs, spin_mode(i, up), spin_mode(i + 1, up)))),
            d,
        )
    };
    let mu = |parity: usize| {
        sum(
            (1..=n_sites).filter(|i| i % 2 == parity).flat_map(|i| spins.map(|up| number_op(bs, spin_mode(i, up)))),
            d,
        )
    };
    let bx = sum((1..=n_sites).map(|i| hopping(bs, spin_mode(i, true), spin_mode(i, false))), d)?;
    let mut u = CMat::zeros(d, d);
    for i in 1..=n_sites {
        u += number_op(bs, spin_mode(i, true))? * number_op(bs, spin_mode(i, false))?;
    }
    let controls = vec![
        ("hop_odd".to_string(), hop(1)?),
        ("hop_even".to_string(), hop(0)?),
        ("mu_odd".to_string(), mu(1)?),
        ("mu_even".to_string(), mu(0)?),
        ("BX".to_string(), bx),
        ("BZ".to_string(), spin_z_field(bs, a, b)?),
        ("U".to_string(), u),
    ];
    Ok(ControlFamily { label: format!("spinful chain N={n_sites} n={n_particles}"), controls, basis })
}

/// Lattice site type: 1 (odd row, odd col), 2 (odd, even), 3 (even, odd), 4 (even, even).
pub fn site_type(row: usize, col: usize) -> usize {
    match (row % 2 == 1, col % 2 == 1) {
        (true, true) => 1,
        (true, false) => 2,
        (false, true) => 3,
        (false, false) => 4,
    }
}

/// Spinless fermions on a `rows x cols` lattice with row-major 1-based modes.
#[derive(Debug, Clone)]
pub struct NnnLattice {
    pub rows: usize,
    pub cols: usize,
    pub family: ControlFamily,
}

impl NnnLattice {
    pub fn mode(&self, row: usize, col: usize) -> usize {
        (row - 1) * self.cols + col
    }

    pub fn mu(&self, species: usize) -> &CMat {
        &self.family.controls[species - 1].1
    }

    pub fn hop(&self, class: usize) -> &CMat {
        &self.family.controls[3 + class].1
    }
}

/// Species chemical potentials `mu1..mu4` and bond-class hoppings `hop1..hop4`:
/// horizontal bonds leaving odd (hop1) or even (hop2) columns, vertical bonds
/// leaving odd (hop3) or even (hop4) rows.
pub fn build_nnn_lattice(rows: usize, cols: usize) -> Result<NnnLattice> {
    build_nnn_lattice_sector(rows, cols, 1)
}

pub fn build_nnn_lattice_sector(rows: usize, cols: usize, n_particles: usize) -> Result<NnnLattice> {
    if rows < 3 || cols < 3 {
        return Err(Error::InvalidArgument(format!(
            "a {rows}x{cols} lattice does not contain every bond class; need at least 3x3"
        )));
    }
    let basis = SectorBasis::new(SectorKind::Fermion, rows * cols, n_particles)?;
    let d = basis.dim();
    let mode = |r: usize, col: usize| (r - 1) * cols + col;
    let mut controls = Vec::new();
    for species in 1..=4 {
        let mut m = CMat::zeros(d, d);
        for r in 1..=rows {
            for col in 1..=cols {
                if site_type(r, col) == species {
                    m += number_op(&basis, mode(r, col))?;
                }
            }
        }
        controls.push((format!("mu{species}"), m));
    }
    for class in 1..=4 {
        let mut m = CMat::zeros(d, d);
        for r in 1..=rows {
            for col in 1..=cols {
                let (r2, c2, lead) = match class {
                    1 | 2 => (r, col + 1, col),
                    _ => (r + 1, col, r),
                };
                let parity_ok = if class % 2 == 1 { lead % 2 == 1 } else { lead % 2 == 0 };
                if parity_ok && r2 <= rows && c2 <= cols {
                    m += hopping(&basis, mode(r, col), mode(r2, c2))?;
                }
            }
        }
        controls.push((format!("hop{class}"), m));
    }
    let family = ControlFamily { label: format!("NNN lattice {rows}x{cols} n={n_particles}"), basis, controls };
    Ok(NnnLattice { rows, cols, family })
}

/// One next-nearest-neighbour construction: the outer species, the inner
/// `(species, bond class)` pairs, and the diagonal direction it produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NnnIdentity {
    pub label: &'static str,
    pub outer: usize,
    pub first: (usize, usize),
    pub second: (usize, usize),
    /// Species of the upper endpoint.
    pub from: usize,
    /// `+1` for down-right bonds, `-1` for down-left.
    pub direction: i32,
}

pub const NNN_IDENTITIES: [NnnIdentity; 8] = [
    NnnIdentity { label: "14R", outer: 1, first: (2, 1), second: (4, 3), from: 1, direction: 1 },
    NnnIdentity { label: "23L", outer: 2, first: (1, 1), second: (3, 3), from: 2, direction: -1 },
    NnnIdentity { label: "23R", outer: 2, first: (1, 2), second: (3, 3), from: 2, direction: 1 },
    NnnIdentity { label: "14L", outer: 1, first: (2, 2), second: (4, 3), from: 1, direction: -1 },
    NnnIdentity { label: "32R", outer: 3, first: (4, 1), second: (2, 4), from: 3, direction: 1 },
    NnnIdentity { label: "41L", outer: 4, first: (3, 1), second: (1, 4), from: 4, direction: -1 },
    NnnIdentity { label: "41R", outer: 4, first: (3, 2), second: (1, 4), from: 4, direction: 1 },
    NnnIdentity { label: "32L", outer: 3, first: (4, 2), second: (2, 4), from: 3, direction: -1 },
];

pub fn nnn_identity(label: &str) -> Result<NnnIdentity> {
    NNN_IDENTITIES
        .iter()
        .find(|i| i.label.eq_ignore_ascii_case(label))
        .copied()
        .ok_or_else(|| Error::InvalidArgument(format!("unknown NNN identity '{label}'")))
}

/// `[mu_outer, [[mu_a, hop_p], [mu_b, hop_q]]]`.
pub fn nnn_nested_commutator(lat: &NnnLattice, id: &NnnIdentity) -> CMat {
    let a = commutator(lat.mu(id.first.0), lat.hop(id.first.1));
    let b = commutator(lat.mu(id.second.0), lat.hop(id.second.1));
    commutator(lat.mu(id.outer), &commutator(&a, &b))
}

/// Direct sum of diagonal hoppings from every `from`-species site one row down.
pub fn nnn_target(lat: &NnnLattice, id: &NnnIdentity) -> Result<CMat> {
    let d = lat.family.basis.dim();
    let mut m = CMat::zeros(d, d);
    for r in 1..lat.rows {
        for col in 1..=lat.cols {
            if site_type(r, col) != id.from {
                continue;
            }
            let c2 = col as i64 + id.direction as i64;
            if c2 < 1 || c2 > lat.cols as i64 {
                continue;
            }
            m += hopping(&lat.family.basis, lat.mode(r, col), lat.mode(r + 1, c2 as usize))?;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Serialize)]
pub struct NnnCheck {
    pub label: String,
    pub rows: usize,
    pub cols: usize,
    pub passed: bool,
    pub proportionality: f64,
    pub residual: f64,
}

/// Least-squares fit `nested ≈ k * target`; passes when the relative residual
/// is below `1e-9` and `k` is non-zero.
pub fn verify_nnn_identity(which: &str, rows: usize, cols: usize) -> Result<NnnCheck> {
    let id = nnn_identity(which)?;
    let lat = build_nnn_lattice(rows, cols)?;
    check_on_lattice(&lat, &id)
}

pub fn check_on_lattice(lat: &NnnLattice, id: &NnnIdentity) -> Result<NnnCheck> {
    let nested = nnn_nested_commutator(lat, id);
    let target = nnn_target(lat, id)?;
    let tt: f64 = target.iter().map(|z| z.norm_sqr()).sum();
    if tt == 0.0 {
        return Err(Error::InvalidArgument(format!("lattice has no {} bonds", id.label)));
    }
    let k = crate::linalg::hs_inner(&target, &nested) / tt;
    let resid = (&nested - &target * k).norm() / (tt.sqrt() * k.norm()).max(1e-300);
    Ok(NnnCheck {
        label: id.label.to_string(),
        rows: lat.rows,
        cols: lat.cols,
        passed: resid < 1e-9 && k.norm() > 1e-9 && k.im.abs() < 1e-12,
        proportionality: k.re,
        residual: resid,
    })
}
