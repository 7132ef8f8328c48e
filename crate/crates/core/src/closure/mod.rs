//! Dynamical Lie algebra closure.
//!
//! The algebra generated by a set of Hermitian operators `G` is the smallest
//! real vector space containing `G` and closed under `[g, .]` for every `g` in
//! `G` (left-nested commutators span the whole Lie algebra). The closure is
//! computed breadth-first: every newly found direction is commuted with every
//! generator and the results are tested against the current span.
//!
//! Two independent backends are provided and act as mutual oracles:
//! Pauli-coordinate sums ([`PauliSum`]) and dense Hermitian matrices.

mod dense;
mod echelon;

use std::collections::BTreeSet;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{hermiticity_defect, trace, CMat, C64};
use crate::models::uniform_control_family;
use crate::pauli::{Pauli, PauliKey, PauliSum, DENSE_QUBIT_BUDGET};

use dense::{from_coords, to_coords, DenseSpan};
use echelon::{EchelonSpan, IntVec, ModSpan, SparseVec};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Pauli,
    Dense,
}

/// Generators sharing one qubit count (Pauli) or one matrix dimension (dense).
#[derive(Debug, Clone)]
pub enum GeneratorSet {
    Pauli { label: String, generators: Vec<PauliSum> },
    Dense { label: String, generators: Vec<CMat> },
}

impl GeneratorSet {
    pub fn pauli(label: impl Into<String>, generators: Vec<PauliSum>) -> Result<Self> {
        if let Some(first) = generators.first() {
            let n = first.n_qubits();
            for g in &generators {
                if g.n_qubits() != n {
                    return Err(Error::SizeMismatch { expected: n, got: g.n_qubits() });
                }
            }
        }
        Ok(GeneratorSet::Pauli { label: label.into(), generators })
    }

    pub fn dense(label: impl Into<String>, generators: Vec<CMat>) -> Result<Self> {
        if let Some(first) = generators.first() {
            let d = first.nrows();
            for g in &generators {
                if g.nrows() != d || g.ncols() != d {
                    return Err(Error::SizeMismatch { expected: d, got: g.nrows() });
                }
                let defect = hermiticity_defect(g);
                if defect >= 1e-12 {
                    return Err(Error::NotHermitian(defect));
                }
            }
        }
        Ok(GeneratorSet::Dense { label: label.into(), generators })
    }

    pub fn label(&self) -> &str {
        match self {
            GeneratorSet::Pauli { label, .. } | GeneratorSet::Dense { label, .. } => label,
        }
    }

    pub fn representation(&self) -> Representation {
        match self {
            GeneratorSet::Pauli { .. } => Representation::Pauli,
            GeneratorSet::Dense { .. } => Representation::Dense,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            GeneratorSet::Pauli { generators, .. } => generators.len(),
            GeneratorSet::Dense { generators, .. } => generators.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The same generators as dense matrices.
    pub fn to_dense(&self) -> Result<GeneratorSet> {
        match self {
            GeneratorSet::Dense { .. } => Ok(self.clone()),
            GeneratorSet::Pauli { label, generators } => {
                let mats = generators.iter().map(|g| g.to_dense()).collect::<Result<Vec<_>>>()?;
                GeneratorSet::dense(label.clone(), mats)
            }
        }
    }

    /// Adds a generator (same representation required).
    pub fn with_pauli(mut self, extra: PauliSum) -> Result<Self> {
        match &mut self {
            GeneratorSet::Pauli { generators, .. } => {
                if let Some(g) = generators.first() {
                    if g.n_qubits() != extra.n_qubits() {
                        return Err(Error::SizeMismatch { expected: g.n_qubits(), got: extra.n_qubits() });
                    }
                }
                generators.push(extra);
                Ok(self)
            }
            GeneratorSet::Dense { .. } => Err(Error::Representation("expected a Pauli generator set")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Universality {
    Universal,
    NonUniversal,
    Undetermined,
}

#[derive(Debug, Clone)]
pub enum ClosureBasis {
    /// Unit coefficient-norm Pauli sums (Hilbert-Schmidt norm `2^{n/2}`).
    Pauli(Vec<PauliSum>),
    /// Unit Hilbert-Schmidt norm Hermitian matrices.
    Dense(Vec<CMat>),
}

impl ClosureBasis {
    pub fn len(&self) -> usize {
        match self {
            ClosureBasis::Pauli(v) => v.len(),
            ClosureBasis::Dense(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct ClosureResult {
    pub basis: ClosureBasis,
    pub dimension: usize,
    pub converged: bool,
    pub depth_reached: usize,
    pub universality: Universality,
    /// Dimension of the full algebra (`su` or `u` of the carrier space).
    pub full_dimension: usize,
    pub elapsed_secs: f64,
}

impl ClosureResult {
    pub fn representation(&self) -> Representation {
        match self.basis {
            ClosureBasis::Pauli(_) => Representation::Pauli,
            ClosureBasis::Dense(_) => Representation::Dense,
        }
    }

    /// Relative norm of the part of `target` outside the span of the basis.
    pub fn membership_residual(&self, target: &PauliSum) -> Result<f64> {
        match &self.basis {
            ClosureBasis::Pauli(basis) => {
                let norm = target.coeff_norm();
                if norm == 0.0 {
                    return Ok(0.0);
                }
                let mut r = target.clone();
                for b in basis {
                    let d = b.dot(&r)?;
                    if d != 0.0 {
                        r = r.axpy(-d, b)?;
                    }
                }
                Ok(r.coeff_norm() / norm)
            }
            ClosureBasis::Dense(_) => self.membership_residual_dense(&target.to_dense()?),
        }
    }

    pub fn membership_residual_dense(&self, target: &CMat) -> Result<f64> {
        let ClosureBasis::Dense(basis) = &self.basis else {
            return Err(Error::Representation("dense target needs a dense closure"));
        };
        let t = to_coords(target);
        let norm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let mut r = t;
        for b in basis {
            let bc = to_coords(b);
            let d: f64 = bc.iter().zip(&r).map(|(x, y)| x * y).sum();
            for (ri, bi) in r.iter_mut().zip(&bc) {
                *ri -= d * bi;
            }
        }
        Ok(r.iter().map(|x| x * x).sum::<f64>().sqrt() / norm)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ClosureOptions {
    /// Stop once the span reaches this dimension (clamped to the full dimension).
    pub cap: usize,
    /// Relative residual above which a commutator counts as a new direction.
    pub tol: f64,
    /// Maximum number of nested commutator levels.
    pub max_depth: usize,
}

impl Default for ClosureOptions {
    fn default() -> Self {
        Self { cap: usize::MAX, tol: DEFAULT_TOL, max_depth: DEFAULT_MAX_DEPTH }
    }
}

/// Computes the closure with the given dimension cap and tolerance.
pub fn close(gen: &GeneratorSet, cap: usize, tol: f64) -> Result<ClosureResult> {
    close_with(gen, &ClosureOptions { cap, tol, ..Default::default() })
}

pub fn close_with(gen: &GeneratorSet, opts: &ClosureOptions) -> Result<ClosureResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if opts.cap == 0 {
        return Err(Error::InvalidArgument("cap must be at least 1".into()));
    }
    // re-run validation: callers can build the enum directly
    match gen {
        GeneratorSet::Pauli { label, generators } => {
            GeneratorSet::pauli(label.clone(), generators.clone())?;
            close_pauli(generators, opts)
        }
        GeneratorSet::Dense { label, generators } => {
            GeneratorSet::dense(label.clone(), generators.clone())?;
            close_dense(generators, opts)
        }
    }
}

fn verdict(dim: usize, full: usize, cap: usize, converged: bool) -> Universality {
    if dim == full {
        Universality::Universal
    } else if converged && dim < cap {
        Universality::NonUniversal
    } else {
        Universality::Undetermined
    }
}

fn to_sparse(p: &PauliSum) -> SparseVec {
    p.iter().map(|(k, c)| (k.packed(), c)).collect()
}

fn from_sparse(v: &SparseVec, n: usize) -> Result<PauliSum> {
    PauliSum::from_terms(n, v.iter().map(|&(k, c)| (c, PauliKey::from_packed(k))))
}

/// Rescales each generator to coprime-free integer coefficients when its
/// coefficient ratios are small rationals. Scaling a generator leaves the
/// generated algebra unchanged.
fn integer_generators(generators: &[PauliSum]) -> Option<Vec<IntVec>> {
    let mut out = Vec::new();
    for g in generators {
        if g.is_empty() {
            continue;
        }
        let m = g.iter().map(|(_, c)| c.abs()).fold(f64::INFINITY, f64::min);
        let mut found = None;
        for q in 1..=360i64 {
            let scaled: Vec<(u128, f64)> = g.iter().map(|(k, c)| (k.packed(), c / m * q as f64)).collect();
            if scaled.iter().all(|(_, v)| (v - v.round()).abs() <= 1e-9 * v.abs().max(1.0)) {
                found = Some(scaled.into_iter().map(|(k, v)| (k, v.round() as i128)).collect::<IntVec>());
                break;
            }
        }
        out.push(found?);
    }
    Some(out)
}

struct PauliRun {
    dim: usize,
    depth: usize,
    converged: bool,
    basis: Vec<SparseVec>,
}

fn close_pauli(generators: &[PauliSum], opts: &ClosureOptions) -> Result<ClosureResult> {
    let start = Instant::now();
    let n = generators.first().map(|g| g.n_qubits()).unwrap_or(1);
    let has_identity = generators.iter().any(|g| !g.is_traceless());
    let full = if n >= 32 {
        usize::MAX
    } else {
        (1usize << (2 * n)) - if has_identity { 0 } else { 1 }
    };
    let cap = opts.cap.min(full);

    let run = match integer_generators(generators).and_then(|g| close_pauli_exact(&g, cap, full, opts)) {
        Some(run) => run,
        None => close_pauli_float(generators, cap, full, opts),
    };
    let basis = if run.dim == full {
        canonical_pauli_basis(n, has_identity)?
    } else {
        run.basis.iter().map(|v| from_sparse(v, n)).collect::<Result<Vec<_>>>()?
    };
    Ok(ClosureResult {
        basis: ClosureBasis::Pauli(basis),
        dimension: run.dim,
        converged: run.converged,
        depth_reached: run.depth,
        universality: verdict(run.dim, full, cap, run.converged),
        full_dimension: full,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

/// Exact closure for integer generators; `None` if coefficients overflow.
fn close_pauli_exact(gens: &[IntVec], cap: usize, full: usize, opts: &ClosureOptions) -> Option<PauliRun> {
    let mut span = ModSpan::default();
    let mut accepted: Vec<IntVec> = Vec::new();
    let mut level: Vec<IntVec> = Vec::new();
    for g in gens {
        if span.dim() >= cap {
            break;
        }
        if span.insert(g) {
            level.push(g.clone());
            accepted.push(g.clone());
        }
    }
    let mut depth = 0;
    'outer: while !level.is_empty() && span.dim() < cap {
        if depth >= opts.max_depth {
            break;
        }
        depth += 1;
        let mut next = Vec::new();
        for e in &level {
            for g in gens {
                let c = echelon::int_commutator(g, e)?;
                if c.is_empty() {
                    continue;
                }
                if span.insert(&c) {
                    accepted.push(c.clone());
                    next.push(c);
                    if span.dim() >= cap {
                        break 'outer;
                    }
                }
            }
        }
        level = next;
    }
    let dim = span.dim();
    let converged = dim >= cap || level.is_empty();
    let basis = if dim == full {
        Vec::new()
    } else {
        let mut fs = EchelonSpan::new(0.0);
        for a in &accepted {
            fs.insert(&echelon::int_to_float(a));
        }
        fs.orthonormal_basis()
    };
    Some(PauliRun { dim, depth, converged, basis })
}

fn close_pauli_float(generators: &[PauliSum], cap: usize, full: usize, opts: &ClosureOptions) -> PauliRun {
    let gens: Vec<SparseVec> = generators
        .iter()
        .map(to_sparse)
        .filter(|g| !g.is_empty())
        .map(echelon::normalized)
        .collect();
    let mut span = EchelonSpan::new(opts.tol);
    let mut level: Vec<SparseVec> = Vec::new();
    for g in &gens {
        if span.dim() >= cap {
            break;
        }
        if span.insert(g).is_some() {
            level.push(g.clone());
        }
    }
    let mut depth = 0;
    'outer: while !level.is_empty() && span.dim() < cap {
        if depth >= opts.max_depth {
            break;
        }
        depth += 1;
        let mut next = Vec::new();
        for e in &level {
            for g in &gens {
                let c = echelon::commutator(g, e);
                if c.is_empty() {
                    continue;
                }
                let c = echelon::normalized(c);
                if span.insert(&c).is_some() {
                    next.push(c);
                    if span.dim() >= cap {
                        break 'outer;
                    }
                }
            }
        }
        level = next;
    }
    let dim = span.dim();
    let converged = dim >= cap || level.is_empty();
    let basis = if dim == full { Vec::new() } else { span.orthonormal_basis() };
    PauliRun { dim, depth, converged, basis }
}

fn canonical_pauli_basis(n: usize, with_identity: bool) -> Result<Vec<PauliSum>> {
    let d = 1u64 << n;
    let mut out = Vec::with_capacity((d * d) as usize);
    for x in 0..d {
        for z in 0..d {
            let k = PauliKey::new(x, z);
            if k.is_identity() && !with_identity {
                continue;
            }
            out.push(PauliSum::from_terms(n, [(1.0, k)])?);
        }
    }
    Ok(out)
}

fn normalized_coords(m: &CMat) -> Option<Vec<f64>> {
    let mut v = to_coords(m);
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n < 1e-14 {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= n);
    Some(v)
}

/// `(1 / 2i) [a, b]` for Hermitian matrices.
pub fn dense_commutator(a: &CMat, b: &CMat) -> CMat {
    let c = a * b - b * a;
    c.map(|z| z * C64::new(0.0, -0.5))
}

fn close_dense(generators: &[CMat], opts: &ClosureOptions) -> Result<ClosureResult> {
    let start = Instant::now();
    let d = generators.first().map(|g| g.nrows()).unwrap_or(1);
    let has_trace = generators.iter().any(|g| {
        let scale = g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
        trace(g).norm() > 1e-12 * scale
    });
    let full = d * d - if has_trace { 0 } else { 1 };
    let cap = opts.cap.min(full);

    let gens: Vec<CMat> = generators
        .iter()
        .filter_map(|g| normalized_coords(g).map(|v| from_coords(&v, d)))
        .collect();
    let mut span = DenseSpan::new(d, opts.tol);
    let mut level: Vec<CMat> = Vec::new();
    for g in &gens {
        if span.dim() >= cap {
            break;
        }
        if span.insert(to_coords(g)).is_some() {
            level.push(g.clone());
        }
    }
    let mut depth = 0;
    'outer: while !level.is_empty() && span.dim() < cap {
        if depth >= opts.max_depth {
            break;
        }
        depth += 1;
        let mut next = Vec::new();
        for e in &level {
            for g in &gens {
                let c = dense_commutator(g, e);
                let Some(v) = normalized_coords(&c) else { continue };
                if span.insert(v.clone()).is_some() {
                    next.push(from_coords(&v, d));
                    if span.dim() >= cap {
                        break 'outer;
                    }
                }
            }
        }
        level = next;
    }
    let dim = span.dim();
    let converged = dim >= cap || level.is_empty();
    let basis = span.into_vectors().iter().map(|v| from_coords(v, d)).collect();
    Ok(ClosureResult {
        basis: ClosureBasis::Dense(basis),
        dimension: dim,
        converged,
        depth_reached: depth,
        universality: verdict(dim, full, cap, converged),
        full_dimension: full,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

/// Whether every converged basis element stays inside its span under commutators.
pub fn closure_defect(result: &ClosureResult) -> Result<f64> {
    let mut worst = 0.0f64;
    match &result.basis {
        ClosureBasis::Pauli(b) => {
            for i in 0..b.len() {
                for j in i + 1..b.len() {
                    let c = b[i].commutator(&b[j])?;
                    if !c.is_empty() {
                        worst = worst.max(result.membership_residual(&c)? * c.coeff_norm());
                    }
                }
            }
        }
        ClosureBasis::Dense(b) => {
            for i in 0..b.len() {
                for j in i + 1..b.len() {
                    let c = dense_commutator(&b[i], &b[j]);
                    let norm = crate::linalg::frobenius(&c);
                    if norm > 0.0 {
                        worst = worst.max(result.membership_residual_dense(&c)? * norm);
                    }
                }
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Pauli,
    Dense,
}

/// Universality verdict for a uniformly controlled chain plus one extra field.
#[derive(Debug, Clone)]
pub struct QubitVerdict {
    pub n_qubits: usize,
    pub break_pattern: BTreeSet<usize>,
    pub pattern_symmetric: bool,
    pub closure: ClosureResult,
}

/// Whether a set of 1-based sites is invariant under `j -> n - j + 1`.
pub fn is_reflection_symmetric(pattern: &BTreeSet<usize>, n: usize) -> bool {
    pattern.iter().all(|&j| j >= 1 && j <= n && pattern.contains(&(n + 1 - j)))
}

pub fn check_universality_qubit(n_qubits: usize, break_pattern: &BTreeSet<usize>) -> Result<QubitVerdict> {
    check_universality_qubit_with(n_qubits, break_pattern, Backend::Pauli)
}

pub fn check_universality_qubit_with(
    n_qubits: usize,
    break_pattern: &BTreeSet<usize>,
    backend: Backend,
) -> Result<QubitVerdict> {
    if n_qubits == 0 || n_qubits > DENSE_QUBIT_BUDGET {
        return Err(Error::BudgetExceeded { what: "qubits", value: n_qubits, limit: DENSE_QUBIT_BUDGET });
    }
    let gens = uniform_control_family(n_qubits, break_pattern)?;
    let gens = match backend {
        Backend::Pauli => gens,
        Backend::Dense => gens.to_dense()?,
    };
    let closure = close_with(&gens, &ClosureOptions::default())?;
    Ok(QubitVerdict {
        n_qubits,
        break_pattern: break_pattern.clone(),
        pattern_symmetric: is_reflection_symmetric(break_pattern, n_qubits),
        closure,
    })
}

/// True iff every basis element is fixed by the site reflection.
pub fn reflection_sector_check(result: &ClosureResult, n_qubits: usize) -> Result<bool> {
    let ClosureBasis::Pauli(basis) = &result.basis else {
        return Err(Error::Representation("reflection check needs a Pauli closure"));
    };
    for b in basis {
        if b.n_qubits() != n_qubits {
            return Err(Error::SizeMismatch { expected: n_qubits, got: b.n_qubits() });
        }
        if b.max_abs_diff(&b.reflection_image())? >= 1e-9 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Serialize)]
pub struct TargetMembership {
    pub label: String,
    pub residual: f64,
    pub member: bool,
}

/// Membership of every mirrored-pair target (`X_j + X_{n-j+1}`, `Z_j + Z_{n-j+1}`,
/// `Z_j Z_{j+1} + Z_{n-j} Z_{n-j+1}`, and the centre site for odd `n`) in the
/// closure of the uniform controls.
#[derive(Debug, Clone, Serialize)]
pub struct MirrorPairReport {
    pub n_qubits: usize,
    pub dimension: usize,
    pub targets: Vec<TargetMembership>,
}

impl MirrorPairReport {
    pub fn passed(&self) -> bool {
        self.targets.iter().all(|t| t.member)
    }
}

pub fn mirror_pair_targets(n: usize) -> Result<Vec<(String, PauliSum)>> {
    let mut out = Vec::new();
    for j in 1..=n / 2 {
        let m = n + 1 - j;
        for (p, name) in [(Pauli::X, "X"), (Pauli::Z, "Z")] {
            let t = &PauliSum::single(p, j, n, 1.0)? + &PauliSum::single(p, m, n, 1.0)?;
            out.push((format!("{name}{j}+{name}{m}"), t));
        }
    }
    if n % 2 == 1 {
        let c = n / 2 + 1;
        out.push((format!("X{c}"), PauliSum::single(Pauli::X, c, n, 1.0)?));
        out.push((format!("Z{c}"), PauliSum::single(Pauli::Z, c, n, 1.0)?));
    }
    for j in 1..n {
        let mj = n - j; // mirror bond (n-j, n-j+1)
        if mj < j {
            break;
        }
        let a = crate::pauli::string(&[(Pauli::Z, j), (Pauli::Z, j + 1)], n, 1.0)?;
        let t = if mj == j { a } else { &a + &crate::pauli::string(&[(Pauli::Z, mj), (Pauli::Z, mj + 1)], n, 1.0)? };
        let label = if mj == j { format!("Z{j}Z{}", j + 1) } else { format!("Z{j}Z{}+Z{mj}Z{}", j + 1, mj + 1) };
        out.push((label, t));
    }
    Ok(out)
}

pub fn verify_mirror_pair_targets(n_qubits: usize) -> Result<MirrorPairReport> {
    if n_qubits < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 qubits, got {n_qubits}")));
    }
    let verdict = check_universality_qubit(n_qubits, &BTreeSet::new())?;
    let mut targets = Vec::new();
    for (label, t) in mirror_pair_targets(n_qubits)? {
        let residual = verdict.closure.membership_residual(&t)?;
        targets.push(TargetMembership { label, residual, member: residual < 1e-8 });
    }
    Ok(MirrorPairReport { n_qubits, dimension: verdict.closure.dimension, targets })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{nearest_neighbour, uniform_field};

    fn ps(s: &str) -> PauliSum {
        s.parse().unwrap()
    }

    #[test]
    fn su2_from_x_and_z() {
        let g = GeneratorSet::pauli("su2", vec![ps("1 X"), ps("1 Z")]).unwrap();
        let r = close(&g, usize::MAX, 1e-9).unwrap();
        assert_eq!(r.dimension, 3);
        assert_eq!(r.universality, Universality::Universal);
        let rd = close(&g.to_dense().unwrap(), usize::MAX, 1e-9).unwrap();
        assert_eq!(rd.dimension, 3);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let g = GeneratorSet::pauli("x", vec![ps("1 X")]).unwrap();
        assert!(close(&g, 10, 0.0).is_err());
        assert!(GeneratorSet::pauli("mix", vec![ps("1 X"), ps("1 XX")]).is_err());
        let mut m = ps("1 X").to_dense().unwrap();
        m[(0, 1)] = C64::new(0.0, 1.0);
        assert!(matches!(GeneratorSet::dense("nh", vec![m]), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn uniform_chain_on_three_sites_is_not_universal() {
        let v = check_universality_qubit(3, &BTreeSet::new()).unwrap();
        assert_eq!(v.closure.universality, Universality::NonUniversal);
        assert!(v.pattern_symmetric);
        assert!(reflection_sector_check(&v.closure, 3).unwrap());
    }

    #[test]
    fn breaking_field_on_site_one_gives_su8() {
        let n = 3;
        let gens = GeneratorSet::pauli(
            "break",
            vec![
                uniform_field(Pauli::X, n).unwrap(),
                uniform_field(Pauli::Z, n).unwrap(),
                nearest_neighbour(Pauli::Z, Pauli::Z, n).unwrap(),
                ps("1 XII"),
            ],
        )
        .unwrap();
        let r = close(&gens, usize::MAX, 1e-9).unwrap();
        assert_eq!(r.dimension, 63);
        assert!(!reflection_sector_check(&r, 3).unwrap());
        let rd = close(&gens.to_dense().unwrap(), usize::MAX, 1e-9).unwrap();
        assert_eq!(rd.dimension, 63);
    }

    #[test]
    fn centre_site_alone_is_reflection_symmetric() {
        let g = GeneratorSet::pauli("x2", vec![ps("1 IXI")]).unwrap();
        let r = close(&g, usize::MAX, 1e-9).unwrap();
        assert_eq!(r.dimension, 1);
        assert!(reflection_sector_check(&r, 3).unwrap());
    }

    #[test]
    fn reflection_check_rejects_dense() {
        let g = GeneratorSet::pauli("x", vec![ps("1 X")]).unwrap().to_dense().unwrap();
        let r = close(&g, 10, 1e-9).unwrap();
        assert!(reflection_sector_check(&r, 1).is_err());
    }

    #[test]
    fn cap_stops_early() {
        let v = GeneratorSet::pauli("su4", vec![ps("1 XI"), ps("1 ZI"), ps("1 IX"), ps("1 IZ"), ps("1 ZZ")]).unwrap();
        let r = close(&v, 5, 1e-9).unwrap();
        assert_eq!(r.dimension, 5);
        assert!(r.converged);
        assert_eq!(r.universality, Universality::Undetermined);
        let full = close(&v, usize::MAX, 1e-9).unwrap();
        assert_eq!(full.dimension, 15);
    }

    #[test]
    fn depth_limit_reports_undetermined() {
        let g = check_universality_qubit(4, &BTreeSet::from([1])).unwrap();
        assert_eq!(g.closure.dimension, 255);
        let gens = uniform_control_family(4, &BTreeSet::from([1])).unwrap();
        let r = close_with(&gens, &ClosureOptions { max_depth: 1, ..Default::default() }).unwrap();
        assert!(!r.converged);
        assert_eq!(r.universality, Universality::Undetermined);
    }

    #[test]
    fn converged_basis_is_closed_and_orthonormal() {
        let v = check_universality_qubit(3, &BTreeSet::new()).unwrap();
        assert!(closure_defect(&v.closure).unwrap() < 1e-9);
        let ClosureBasis::Pauli(b) = &v.closure.basis else { panic!() };
        for i in 0..b.len() {
            for j in 0..b.len() {
                let d = b[i].dot(&b[j]).unwrap();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((d - e).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mirror_targets_membership() {
        assert!(verify_mirror_pair_targets(4).unwrap().passed());
        let r5 = verify_mirror_pair_targets(5).unwrap();
        assert!(r5.passed());
        assert!(r5.targets.iter().any(|t| t.label == "X3"));
        assert!(r5.targets.iter().any(|t| t.label == "Z3"));
        let v3 = check_universality_qubit(3, &BTreeSet::new()).unwrap();
        assert!(v3.closure.membership_residual(&ps("1 XII")).unwrap() > 1e-3);
        assert!(v3.closure.membership_residual(&ps("1 XII\n1 IIX")).unwrap() < 1e-8);
    }

    #[test]
    fn insertion_order_changes_basis_not_dimension() {
        let gens = uniform_control_family(4, &BTreeSet::new()).unwrap();
        let GeneratorSet::Pauli { generators, .. } = &gens else { panic!() };
        let mut rev = generators.clone();
        rev.reverse();
        let a = close(&gens, usize::MAX, 1e-9).unwrap();
        let b = close(&GeneratorSet::pauli("rev", rev).unwrap(), usize::MAX, 1e-9).unwrap();
        assert_eq!(a.dimension, b.dimension);
        let (ClosureBasis::Pauli(ba), ClosureBasis::Pauli(bb)) = (&a.basis, &b.basis) else { panic!() };
        assert!(ba.iter().zip(bb).any(|(x, y)| x.max_abs_diff(y).unwrap() > 1e-6));
        for x in bb {
            assert!(a.membership_residual(x).unwrap() < 1e-9);
        }
    }
}
