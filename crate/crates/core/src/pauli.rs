//! Symplectic-encoded Pauli strings and real linear combinations of them.
//!
//! A Pauli string on `n` qubits is stored as a pair of bit masks `(x, z)`: bit `j`
//! of `x` (resp. `z`) marks an X (resp. Z) component on qubit `j + 1`, and a qubit
//! with both bits set carries `Y`. The Hermitian string associated with a mask
//! pair is `P(x, z) = i^{|x & z|} X^x Z^z`, so every mask pair names exactly one
//! Hermitian Pauli operator. Phases of products are tracked as powers of `i`.
//!
//! Qubits are 1-based in the public interface (`PauliTerm::single(X, 1, n)`) and
//! 0-based in the masks.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, I, ONE, ZERO};

/// Coefficients with magnitude below this are dropped after every operation.
pub const PRUNE_TOL: f64 = 1e-12;

/// Default ceiling on `n` for materialising dense `2^n x 2^n` matrices.
pub const DENSE_QUBIT_BUDGET: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Phase-free identity of a Pauli string: the `(x, z)` mask pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PauliKey {
    pub x: u64,
    pub z: u64,
}

impl PauliKey {
    pub const IDENTITY: PauliKey = PauliKey { x: 0, z: 0 };

    pub fn new(x: u64, z: u64) -> Self {
        Self { x, z }
    }

    pub fn is_identity(self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Whether the two strings anticommute (odd symplectic product).
    #[inline]
    pub fn anticommutes(self, other: PauliKey) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) & 1 == 1
    }

    /// `P(a) P(b) = i^e P(a ^ b)`; returns `(a ^ b, e mod 4)`.
    #[inline]
    pub fn product(self, other: PauliKey) -> (PauliKey, u8) {
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        let e = (self.x & self.z).count_ones() as i64 + (other.x & other.z).count_ones() as i64
            + 2 * (self.z & other.x).count_ones() as i64
            - (x & z).count_ones() as i64;
        (PauliKey { x, z }, e.rem_euclid(4) as u8)
    }

    /// Bit-reverse the masks over `n` qubits (site `j -> n - j + 1`).
    pub fn reflected(self, n: usize) -> PauliKey {
        let rev = |m: u64| -> u64 {
            if n == 0 {
                0
            } else {
                m.reverse_bits() >> (64 - n)
            }
        };
        PauliKey { x: rev(self.x), z: rev(self.z) }
    }

    pub fn weight(self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn qubit(self, q: usize) -> Pauli {
        Pauli::from_bits(self.x >> q & 1 == 1, self.z >> q & 1 == 1)
    }

    /// Compact ordering key used by hashed containers.
    #[inline]
    pub fn packed(self) -> u128 {
        (self.x as u128) << 64 | self.z as u128
    }

    #[inline]
    pub fn from_packed(p: u128) -> Self {
        PauliKey { x: (p >> 64) as u64, z: p as u64 }
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > 64 {
        Err(Error::QubitCount(n))
    } else {
        Ok(())
    }
}

fn mask_limit(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// A single Pauli string with an overall phase `i^phase`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliTerm {
    n_qubits: usize,
    key: PauliKey,
    phase: u8,
}

impl PauliTerm {
    pub fn new(n_qubits: usize, x: u64, z: u64, phase: u8) -> Result<Self> {
        check_qubits(n_qubits)?;
        if (x | z) & !mask_limit(n_qubits) != 0 {
            return Err(Error::InvalidArgument(format!(
                "mask has bits beyond qubit {n_qubits}"
            )));
        }
        Ok(Self { n_qubits, key: PauliKey { x, z }, phase: phase % 4 })
    }

    pub fn identity(n_qubits: usize) -> Result<Self> {
        Self::new(n_qubits, 0, 0, 0)
    }

    /// `p` on the 1-based qubit `site`.
    pub fn single(p: Pauli, site: usize, n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        if site == 0 || site > n_qubits {
            return Err(Error::IndexOutOfRange { index: site, max: n_qubits });
        }
        let (x, z) = p.bits();
        let bit = 1u64 << (site - 1);
        Self::new(n_qubits, if x { bit } else { 0 }, if z { bit } else { 0 }, 0)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn key(&self) -> PauliKey {
        self.key
    }

    pub fn x_mask(&self) -> u64 {
        self.key.x
    }

    pub fn z_mask(&self) -> u64 {
        self.key.z
    }

    /// Exponent `e` of the overall phase `i^e`.
    pub fn phase(&self) -> u8 {
        self.phase
    }

    pub fn is_hermitian(&self) -> bool {
        self.phase % 2 == 0
    }

    pub fn multiply(&self, other: &PauliTerm) -> Result<PauliTerm> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::SizeMismatch { expected: self.n_qubits, got: other.n_qubits });
        }
        let (key, e) = self.key.product(other.key);
        Ok(PauliTerm { n_qubits: self.n_qubits, key, phase: (self.phase + other.phase + e) % 4 })
    }

    pub fn commutes_with(&self, other: &PauliTerm) -> bool {
        !self.key.anticommutes(other.key)
    }

    pub fn with_phase(mut self, phase: u8) -> Self {
        self.phase = phase % 4;
        self
    }
}

impl fmt::Display for PauliTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = ["", "i", "-", "-i"][self.phase as usize];
        write!(f, "{prefix}{}", key_string(self.key, self.n_qubits))
    }
}

fn key_string(key: PauliKey, n: usize) -> String {
    (0..n).map(|q| key.qubit(q).symbol()).collect()
}

fn parse_key(s: &str) -> Result<(PauliKey, usize)> {
    let n = s.chars().count();
    check_qubits(n)?;
    let mut key = PauliKey::default();
    for (q, ch) in s.chars().enumerate() {
        let p = match ch.to_ascii_uppercase() {
            'I' | '_' => Pauli::I,
            'X' => Pauli::X,
            'Y' => Pauli::Y,
            'Z' => Pauli::Z,
            other => return Err(Error::Parse(format!("bad Pauli symbol `{other}` in `{s}`"))),
        };
        let (x, z) = p.bits();
        key.x |= (x as u64) << q;
        key.z |= (z as u64) << q;
    }
    Ok((key, n))
}

impl FromStr for PauliTerm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (phase, body) = if let Some(rest) = s.strip_prefix("-i") {
            (3, rest)
        } else if let Some(rest) = s.strip_prefix('-') {
            (2, rest)
        } else if let Some(rest) = s.strip_prefix('i') {
            (1, rest)
        } else if let Some(rest) = s.strip_prefix('+') {
            (0, rest)
        } else {
            (0, s)
        };
        let (key, n) = parse_key(body)?;
        PauliTerm::new(n, key.x, key.z, phase)
    }
}

/// Real linear combination of Hermitian Pauli strings.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: BTreeMap<PauliKey, f64>,
}

impl PauliSum {
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        Ok(Self { n_qubits, terms: BTreeMap::new() })
    }

    /// Builds a sum from `(coefficient, key)` pairs, merging repeats and pruning.
    pub fn from_terms<It>(n_qubits: usize, terms: It) -> Result<Self>
    where
        It: IntoIterator<Item = (f64, PauliKey)>,
    {
        let mut out = Self::zero(n_qubits)?;
        let limit = mask_limit(n_qubits);
        for (c, k) in terms {
            if (k.x | k.z) & !limit != 0 {
                return Err(Error::InvalidArgument(format!(
                    "mask has bits beyond qubit {n_qubits}"
                )));
            }
            *out.terms.entry(k).or_insert(0.0) += c;
        }
        out.prune();
        Ok(out)
    }

    /// A Hermitian term (phase `+1` or `-1`) as a one-element sum.
    pub fn from_term(term: &PauliTerm) -> Result<Self> {
        let sign = match term.phase {
            0 => 1.0,
            2 => -1.0,
            _ => {
                return Err(Error::InvalidArgument(
                    "anti-Hermitian term cannot enter a real Pauli sum".into(),
                ))
            }
        };
        Self::from_terms(term.n_qubits, [(sign, term.key)])
    }

    /// `coeff * p` on the 1-based qubit `site`.
    pub fn single(p: Pauli, site: usize, n_qubits: usize, coeff: f64) -> Result<Self> {
        let t = PauliTerm::single(p, site, n_qubits)?;
        Self::from_terms(n_qubits, [(coeff, t.key)])
    }

    pub fn identity(n_qubits: usize, coeff: f64) -> Result<Self> {
        Self::from_terms(n_qubits, [(coeff, PauliKey::IDENTITY)])
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (PauliKey, f64)> + '_ {
        self.terms.iter().map(|(k, c)| (*k, *c))
    }

    pub fn coeff(&self, key: PauliKey) -> f64 {
        self.terms.get(&key).copied().unwrap_or(0.0)
    }

    /// Coefficient of the string written in text form, e.g. `"XIZ"`.
    pub fn coeff_of(&self, s: &str) -> Result<f64> {
        let (key, n) = parse_key(s)?;
        if n != self.n_qubits {
            return Err(Error::SizeMismatch { expected: self.n_qubits, got: n });
        }
        Ok(self.coeff(key))
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| c.abs() >= PRUNE_TOL);
    }

    fn check_same(&self, other: &PauliSum) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            Err(Error::SizeMismatch { expected: self.n_qubits, got: other.n_qubits })
        } else {
            Ok(())
        }
    }

    pub fn scaled(&self, s: f64) -> PauliSum {
        let mut out = PauliSum {
            n_qubits: self.n_qubits,
            terms: self.terms.iter().map(|(k, c)| (*k, c * s)).collect(),
        };
        out.prune();
        out
    }

    pub fn try_add(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_same(other)?;
        self.axpy(1.0, other)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &PauliSum) -> Result<PauliSum> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (k, c) in &other.terms {
            *out.terms.entry(*k).or_insert(0.0) += a * c;
        }
        out.prune();
        Ok(out)
    }

    /// Normalised commutator `(1 / 2i) [A, B]`, again a real Pauli sum.
    pub fn commutator(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_same(other)?;
        let mut acc: BTreeMap<PauliKey, f64> = BTreeMap::new();
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                if !ka.anticommutes(*kb) {
                    continue;
                }
                let (k, e) = ka.product(*kb);
                // [A,B] = 2 i^e P with e odd; (1/2i) * 2 i^e = i^(e-1) = +1 (e=1) or -1 (e=3)
                let sign = if e == 1 { 1.0 } else { -1.0 };
                *acc.entry(k).or_insert(0.0) += sign * ca * cb;
            }
        }
        let mut out = PauliSum { n_qubits: self.n_qubits, terms: acc };
        out.prune();
        Ok(out)
    }

    /// Coefficient dot product; the Hilbert-Schmidt inner product is this times `2^n`.
    pub fn dot(&self, other: &PauliSum) -> Result<f64> {
        self.check_same(other)?;
        let (small, large) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        Ok(small.terms.iter().map(|(k, c)| c * large.coeff(*k)).sum())
    }

    pub fn hs_inner(&self, other: &PauliSum) -> Result<f64> {
        Ok(self.dot(other)? * (self.n_qubits as f64).exp2())
    }

    /// Euclidean norm of the coefficient vector.
    pub fn coeff_norm(&self) -> f64 {
        self.terms.values().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &PauliSum) -> Result<f64> {
        let d = self.axpy(-1.0, other)?;
        Ok(d.terms.values().fold(0.0, |m, c| m.max(c.abs())))
    }

    pub fn is_traceless(&self) -> bool {
        self.coeff(PauliKey::IDENTITY) == 0.0
    }

    /// Maps qubit `j` to `n - j + 1` on every string.
    pub fn reflection_image(&self) -> PauliSum {
        PauliSum {
            n_qubits: self.n_qubits,
            terms: self.terms.iter().map(|(k, c)| (k.reflected(self.n_qubits), *c)).collect(),
        }
    }

    /// Dense `2^n x 2^n` matrix; qubit 1 is the most significant tensor factor.
    pub fn to_dense(&self) -> Result<CMat> {
        self.to_dense_with_budget(DENSE_QUBIT_BUDGET)
    }

    pub fn to_dense_with_budget(&self, max_qubits: usize) -> Result<CMat> {
        let n = self.n_qubits;
        if n > max_qubits {
            return Err(Error::BudgetExceeded { what: "qubits", value: n, limit: max_qubits });
        }
        let d = 1usize << n;
        let mut m = CMat::zeros(d, d);
        for (k, coeff) in &self.terms {
            let kx = ket_mask(k.x, n);
            let kz = ket_mask(k.z, n);
            let yphase = i_pow((k.x & k.z).count_ones() as u8);
            for b in 0..d {
                let sign = if (kz & b as u64).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
                let row = b ^ kx as usize;
                // P|b> = i^{|x&z|} X^x Z^z |b>
                m[(row, b)] += yphase * (sign * coeff);
            }
        }
        Ok(m)
    }

    /// Expands a dense Hermitian matrix in the Pauli basis.
    pub fn from_dense(m: &CMat, n_qubits: usize) -> Result<PauliSum> {
        check_qubits(n_qubits)?;
        let d = 1usize << n_qubits;
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::SizeMismatch { expected: d, got: m.nrows() });
        }
        let mut terms = Vec::new();
        for x in 0..d as u64 {
            for z in 0..d as u64 {
                let key = PauliKey { x, z };
                let kx = ket_mask(x, n_qubits);
                let kz = ket_mask(z, n_qubits);
                let yphase = i_pow((x & z).count_ones() as u8);
                // Tr(P M) / d, with P = i^{|x&z|} X^x Z^z
                let mut acc = ZERO;
                for b in 0..d {
                    let sign = if (kz & b as u64).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
                    let row = b ^ kx as usize;
                    acc += yphase * sign * m[(b, row)];
                }
                let c = acc.re / d as f64;
                if c.abs() >= PRUNE_TOL {
                    terms.push((c, key));
                }
            }
        }
        PauliSum::from_terms(n_qubits, terms)
    }

    /// Text form: one `coeff PAULI_STRING` line per term.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, c) in &self.terms {
            out.push_str(&format!("{} {}\n", c, key_string(*k, self.n_qubits)));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<PauliSum> {
        let mut n = None;
        let mut terms = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(cs), Some(ps), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse(format!("line {}: expected `coeff STRING`", lineno + 1)));
            };
            let c: f64 = cs
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad coefficient `{cs}`", lineno + 1)))?;
            let (key, len) = parse_key(ps)?;
            match n {
                None => n = Some(len),
                Some(m) if m != len => return Err(Error::SizeMismatch { expected: m, got: len }),
                _ => {}
            }
            terms.push((c, key));
        }
        let n = n.ok_or_else(|| Error::Parse("empty Pauli sum".into()))?;
        PauliSum::from_terms(n, terms)
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}*{}", key_string(*k, self.n_qubits))?;
        }
        Ok(())
    }
}

impl FromStr for PauliSum {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PauliSum::from_text(s)
    }
}

impl Add for &PauliSum {
    type Output = PauliSum;
    fn add(self, rhs: &PauliSum) -> PauliSum {
        self.try_add(rhs).expect("qubit count mismatch in PauliSum addition")
    }
}

impl Sub for &PauliSum {
    type Output = PauliSum;
    fn sub(self, rhs: &PauliSum) -> PauliSum {
        self.axpy(-1.0, rhs).expect("qubit count mismatch in PauliSum subtraction")
    }
}

impl Neg for &PauliSum {
    type Output = PauliSum;
    fn neg(self) -> PauliSum {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for &PauliSum {
    type Output = PauliSum;
    fn mul(self, rhs: f64) -> PauliSum {
        self.scaled(rhs)
    }
}

/// Free-function form of [`PauliTerm::multiply`].
pub fn multiply(a: &PauliTerm, b: &PauliTerm) -> Result<PauliTerm> {
    a.multiply(b)
}

/// Free-function form of [`PauliSum::commutator`].
pub fn commutator(a: &PauliSum, b: &PauliSum) -> Result<PauliSum> {
    a.commutator(b)
}

pub fn to_dense(op: &PauliSum) -> Result<CMat> {
    op.to_dense()
}

pub fn reflection_image(op: &PauliSum) -> PauliSum {
    op.reflection_image()
}

/// Reorders a qubit mask into the bit positions of a computational-basis index,
/// where qubit 1 is the most significant bit.
#[inline]
pub(crate) fn ket_mask(mask: u64, n: usize) -> u64 {
    if n == 0 {
        0
    } else {
        mask.reverse_bits() >> (64 - n)
    }
}

fn i_pow(e: u8) -> C64 {
    match e % 4 {
        0 => ONE,
        1 => I,
        2 => -ONE,
        _ => -I,
    }
}

// ---------------------------------------------------------------------------
// Common operator builders on an open chain (1-based sites).

/// `sum_{j in sites} p_j`.
pub fn field(p: Pauli, sites: impl IntoIterator<Item = usize>, n: usize) -> Result<PauliSum> {
    let mut terms = Vec::new();
    for s in sites {
        terms.push((1.0, PauliTerm::single(p, s, n)?.key()));
    }
    PauliSum::from_terms(n, terms)
}

/// `sum_j p_j` over all sites.
pub fn uniform_field(p: Pauli, n: usize) -> Result<PauliSum> {
    field(p, 1..=n, n)
}

/// `sum_{j=1}^{n-1} p_j q_{j+1}`.
pub fn nearest_neighbour(p: Pauli, q: Pauli, n: usize) -> Result<PauliSum> {
    let mut terms = Vec::new();
    for j in 1..n {
        let a = PauliTerm::single(p, j, n)?;
        let b = PauliTerm::single(q, j + 1, n)?;
        terms.push((1.0, a.multiply(&b)?.key()));
    }
    PauliSum::from_terms(n, terms)
}

/// A product string like `Z_{j-1} X_j Z_{j+1}` given as `(pauli, site)` pairs.
pub fn string(factors: &[(Pauli, usize)], n: usize, coeff: f64) -> Result<PauliSum> {
    let mut t = PauliTerm::identity(n)?;
    for (p, s) in factors {
        t = t.multiply(&PauliTerm::single(*p, *s, n)?)?;
    }
    let sign = if t.phase() == 2 { -1.0 } else { 1.0 };
    PauliSum::from_terms(n, [(coeff * sign, t.key())])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, pauli_x, pauli_y, pauli_z};

    fn ps(s: &str) -> PauliSum {
        s.parse().unwrap()
    }

    #[test]
    fn x_times_z_is_minus_i_y() {
        let x = PauliTerm::single(Pauli::X, 1, 1).unwrap();
        let z = PauliTerm::single(Pauli::Z, 1, 1).unwrap();
        let p = x.multiply(&z).unwrap();
        assert_eq!(p.key(), PauliTerm::single(Pauli::Y, 1, 1).unwrap().key());
        assert_eq!(p.phase(), 3);
        assert_eq!(p.to_string(), "-iY");
    }

    #[test]
    fn identity_is_neutral() {
        let id = PauliTerm::identity(3).unwrap();
        let p: PauliTerm = "XYZ".parse().unwrap();
        assert_eq!(id.multiply(&p).unwrap(), p);
        assert_eq!(p.multiply(&id).unwrap(), p);
    }

    #[test]
    fn two_qubit_phases_cancel() {
        let a: PauliTerm = "XZ".parse().unwrap();
        let b: PauliTerm = "ZX".parse().unwrap();
        let p = a.multiply(&b).unwrap();
        assert_eq!(p.to_string(), "YY");
    }

    #[test]
    fn size_mismatch_is_reported() {
        let a: PauliTerm = "XZ".parse().unwrap();
        let b: PauliTerm = "Z".parse().unwrap();
        assert!(matches!(a.multiply(&b), Err(Error::SizeMismatch { .. })));
        let s = ps("1 XI");
        assert!(s.commutator(&ps("1 X")).is_err());
    }

    #[test]
    fn commutator_of_field_with_zz() {
        let hx = uniform_field(Pauli::X, 2).unwrap();
        let zz = ps("1 ZZ");
        let c = hx.commutator(&zz).unwrap();
        assert_eq!(c, ps("-1 YZ\n-1 ZY"));
    }

    #[test]
    fn commutator_of_uniform_x_and_z_fields() {
        let hx = uniform_field(Pauli::X, 3).unwrap();
        let hz = uniform_field(Pauli::Z, 3).unwrap();
        let c = hx.commutator(&hz).unwrap();
        assert_eq!(c, &uniform_field(Pauli::Y, 3).unwrap() * -1.0);
    }

    #[test]
    fn yy_zz_commutator_gives_three_site_strings() {
        let n = 4;
        let hyy = nearest_neighbour(Pauli::Y, Pauli::Y, n).unwrap();
        let hzz = nearest_neighbour(Pauli::Z, Pauli::Z, n).unwrap();
        let c = hyy.commutator(&hzz).unwrap();
        // every surviving term is a ZXY or YXZ string on three consecutive sites
        let mut h1 = PauliSum::zero(n).unwrap();
        for j in 1..=n - 2 {
            h1 = &h1
                + &string(&[(Pauli::Z, j), (Pauli::X, j + 1), (Pauli::Y, j + 2)], n, 1.0).unwrap();
            h1 = &h1
                + &string(&[(Pauli::Y, j), (Pauli::X, j + 1), (Pauli::Z, j + 2)], n, 1.0).unwrap();
        }
        let ratio = c.dot(&h1).unwrap() / h1.dot(&h1).unwrap();
        assert!(ratio.abs() > 0.5);
        assert!(c.max_abs_diff(&(&h1 * ratio)).unwrap() < 1e-12);
    }

    #[test]
    fn dense_images_of_single_paulis() {
        assert_eq!(ps("1 Z").to_dense().unwrap(), pauli_z());
        assert_eq!(ps("1 X").to_dense().unwrap(), pauli_x());
        assert_eq!(ps("1 Y").to_dense().unwrap(), pauli_y());
    }

    #[test]
    fn zz_chain_is_diagonal_with_expected_pattern() {
        let hzz = nearest_neighbour(Pauli::Z, Pauli::Z, 3).unwrap();
        let m = hzz.to_dense().unwrap();
        let expect = [2.0, 0.0, -2.0, 0.0, 0.0, -2.0, 0.0, 2.0];
        for (b, e) in expect.iter().enumerate() {
            assert!((m[(b, b)].re - e).abs() < 1e-15, "state {b:03b}");
        }
        assert!(frobenius(&(m.clone() - CMat::from_diagonal(&m.diagonal()))) == 0.0);
    }

    #[test]
    fn dense_budget_is_enforced() {
        let big = PauliSum::identity(11, 1.0).unwrap();
        assert!(matches!(big.to_dense(), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn dense_round_trip() {
        let s = ps("0.5 XYZ\n-1.25 ZZI\n2 IIY\n0.1 III");
        let back = PauliSum::from_dense(&s.to_dense().unwrap(), 3).unwrap();
        assert!(back.max_abs_diff(&s).unwrap() < 1e-12);
    }

    #[test]
    fn reflection_maps_sites() {
        assert_eq!(ps("1 XII").reflection_image(), ps("1 IIX"));
        assert_eq!(ps("1 IXI").reflection_image(), ps("1 IXI"));
        assert_eq!(ps("1 ZZII").reflection_image(), ps("1 IIZZ"));
    }

    #[test]
    fn text_round_trip_and_errors() {
        let s = ps("1.0 XIZ\n-0.5 YYI");
        assert_eq!(PauliSum::from_text(&s.to_text()).unwrap(), s);
        assert!(PauliSum::from_text("1.0 XQ").is_err());
        assert!(PauliSum::from_text("1.0 XI\n2 X").is_err());
        assert!(PauliSum::from_text("").is_err());
    }

    #[test]
    fn hermiticity_by_phase() {
        let t: PauliTerm = "-XY".parse().unwrap();
        assert!(t.is_hermitian());
        let t: PauliTerm = "iXY".parse().unwrap();
        assert!(!t.is_hermitian());
        assert!(PauliSum::from_term(&t).is_err());
    }

    #[test]
    fn prune_drops_roundoff() {
        let a = ps("1 X\n1e-13 Z");
        assert_eq!(a.len(), 1);
    }
}
