//! Incremental span tracking in the Pauli-string coordinate basis.
//!
//! Rows are kept in row-echelon form keyed by a pivot string: every row has a
//! unit entry at its own pivot and a zero at the pivot of every earlier row.
//! Reducing a candidate therefore only touches rows whose pivots it hits, in
//! insertion order, which keeps the cost proportional to the fill-in rather
//! than to the dimension of the span.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rustc_hash::FxHashMap;

use crate::pauli::{PauliKey, PRUNE_TOL};

/// Sparse coefficient vector sorted by packed key.
pub(crate) type SparseVec = Vec<(u128, f64)>;

pub(crate) fn norm(v: &SparseVec) -> f64 {
    v.iter().map(|(_, c)| c * c).sum::<f64>().sqrt()
}

pub(crate) fn normalized(mut v: SparseVec) -> SparseVec {
    let n = norm(&v);
    if n > 0.0 {
        for (_, c) in v.iter_mut() {
            *c /= n;
        }
    }
    v.retain(|(_, c)| c.abs() >= PRUNE_TOL);
    v
}

/// `(1 / 2i) [g, e]` on sparse vectors.
pub(crate) fn commutator(g: &SparseVec, e: &SparseVec) -> SparseVec {
    let mut raw: Vec<(u128, f64)> = Vec::with_capacity(g.len() * e.len() / 2 + 1);
    for &(ka, ca) in g {
        let a = PauliKey::from_packed(ka);
        for &(kb, cb) in e {
            let b = PauliKey::from_packed(kb);
            if !a.anticommutes(b) {
                continue;
            }
            let (k, ph) = a.product(b);
            let sign = if ph == 1 { 1.0 } else { -1.0 };
            raw.push((k.packed(), sign * ca * cb));
        }
    }
    merge_sorted(raw)
}

fn merge_sorted(mut raw: Vec<(u128, f64)>) -> SparseVec {
    raw.sort_unstable_by_key(|(k, _)| *k);
    let mut out: SparseVec = Vec::with_capacity(raw.len());
    for (k, c) in raw {
        match out.last_mut() {
            Some((lk, lc)) if *lk == k => *lc += c,
            _ => out.push((k, c)),
        }
    }
    out.retain(|(_, c)| c.abs() >= PRUNE_TOL);
    out
}

#[derive(Debug, Default)]
pub(crate) struct EchelonSpan {
    rows: Vec<SparseVec>,
    pivots: Vec<u128>,
    pivot_index: FxHashMap<u128, usize>,
    tol: f64,
}

impl EchelonSpan {
    pub fn new(tol: f64) -> Self {
        Self { tol, ..Default::default() }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `cand` (assumed unit norm) against the span. If the residual norm
    /// exceeds `tol`, the residual becomes a new row and is returned normalised.
    pub fn insert(&mut self, cand: &SparseVec) -> Option<SparseVec> {
        let mut work: FxHashMap<u128, f64> =
            FxHashMap::with_capacity_and_hasher(cand.len() * 2, Default::default());
        let mut heap = BinaryHeap::new();
        for &(k, c) in cand {
            work.insert(k, c);
            if let Some(&i) = self.pivot_index.get(&k) {
                heap.push(Reverse(i));
            }
        }
        while let Some(Reverse(i)) = heap.pop() {
            let p = self.pivots[i];
            let Some(v) = work.remove(&p) else { continue };
            for &(k, r) in &self.rows[i] {
                if k == p {
                    continue;
                }
                match work.get_mut(&k) {
                    Some(x) => *x -= v * r,
                    None => {
                        work.insert(k, -v * r);
                        if let Some(&j) = self.pivot_index.get(&k) {
                            heap.push(Reverse(j));
                        }
                    }
                }
            }
        }
        let mut residual: SparseVec =
            work.into_iter().filter(|(_, c)| c.abs() >= PRUNE_TOL).collect();
        if norm(&residual) <= self.tol {
            return None;
        }
        residual.sort_unstable_by_key(|(k, _)| *k);
        // largest entry becomes the pivot; ties resolve to the smallest key
        let (mut pk, mut pv) = residual[0];
        for &(k, c) in &residual[1..] {
            if c.abs() > pv.abs() {
                pk = k;
                pv = c;
            }
        }
        let mut row: SparseVec = residual.iter().map(|&(k, c)| (k, c / pv)).collect();
        row.retain(|&(k, c)| k == pk || c.abs() >= PRUNE_TOL);
        for e in row.iter_mut() {
            if e.0 == pk {
                e.1 = 1.0;
            }
        }
        let idx = self.rows.len();
        self.pivot_index.insert(pk, idx);
        self.pivots.push(pk);
        self.rows.push(row);
        Some(normalized(residual))
    }

    /// Back-substitutes so that every row is zero at every other row's pivot,
    /// then orthonormalises rows within groups that share support.
    pub fn orthonormal_basis(mut self) -> Vec<SparseVec> {
        for i in (0..self.rows.len()).rev() {
            let mut acc: FxHashMap<u128, f64> = self.rows[i].iter().cloned().collect();
            let hits: Vec<usize> = self.rows[i]
                .iter()
                .filter_map(|(k, _)| self.pivot_index.get(k).copied())
                .filter(|&j| j != i)
                .collect();
            if hits.is_empty() {
                continue;
            }
            for j in hits {
                let pj = self.pivots[j];
                let Some(v) = acc.remove(&pj) else { continue };
                for &(k, r) in &self.rows[j] {
                    if k == pj {
                        continue;
                    }
                    *acc.entry(k).or_insert(0.0) -= v * r;
                }
            }
            let mut row: SparseVec =
                acc.into_iter().filter(|(_, c)| c.abs() >= PRUNE_TOL).collect();
            row.sort_unstable_by_key(|(k, _)| *k);
            self.rows[i] = row;
        }
        orthonormalize_by_component(self.rows)
    }
}

/// Gram-Schmidt restricted to connected groups of rows (rows are connected when
/// they share a Pauli string). Rows in different groups are already orthogonal.
pub(crate) fn orthonormalize_by_component(rows: Vec<SparseVec>) -> Vec<SparseVec> {
    let n = rows.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut owner: FxHashMap<u128, usize> = FxHashMap::default();
    for (i, row) in rows.iter().enumerate() {
        for &(k, _) in row {
            match owner.get(&k) {
                Some(&j) => {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
                None => {
                    owner.insert(k, i);
                }
            }
        }
    }
    let mut groups: FxHashMap<usize, Vec<usize>> = FxHashMap::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut roots: Vec<usize> = groups.keys().copied().collect();
    roots.sort_unstable();
    let mut out = Vec::with_capacity(n);
    for r in roots {
        let members = &groups[&r];
        if members.len() == 1 {
            out.push(normalized(rows[members[0]].clone()));
            continue;
        }
        // dense local coordinates for this group
        let mut keys: Vec<u128> = members.iter().flat_map(|&i| rows[i].iter().map(|e| e.0)).collect();
        keys.sort_unstable();
        keys.dedup();
        let local: FxHashMap<u128, usize> = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        let m = keys.len();
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(members.len());
        for &i in members {
            let mut v = vec![0.0; m];
            for &(k, c) in &rows[i] {
                v[local[&k]] = c;
            }
            for _ in 0..2 {
                for b in &basis {
                    let d: f64 = b.iter().zip(&v).map(|(x, y)| x * y).sum();
                    for (vi, bi) in v.iter_mut().zip(b) {
                        *vi -= d * bi;
                    }
                }
            }
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nv < 1e-12 {
                continue;
            }
            v.iter_mut().for_each(|x| *x /= nv);
            basis.push(v);
        }
        for v in basis {
            let sv: SparseVec = keys
                .iter()
                .zip(v)
                .filter(|(_, c)| c.abs() >= PRUNE_TOL)
                .map(|(k, c)| (*k, c))
                .collect();
            out.push(sv);
        }
    }
    out
}

/// Sparse integer coefficient vector sorted by packed key.
pub(crate) type IntVec = Vec<(u128, i128)>;

const LIMIT: i128 = 1 << 100;

/// `(1 / 2i) [g, e]` in exact integer arithmetic; `None` on coefficient overflow.
pub(crate) fn int_commutator(g: &IntVec, e: &IntVec) -> Option<IntVec> {
    let mut raw: Vec<(u128, i128)> = Vec::with_capacity(g.len() * e.len() / 2 + 1);
    for &(ka, ca) in g {
        let a = PauliKey::from_packed(ka);
        for &(kb, cb) in e {
            let b = PauliKey::from_packed(kb);
            if !a.anticommutes(b) {
                continue;
            }
            let (k, ph) = a.product(b);
            let v = ca.checked_mul(cb)?;
            raw.push((k.packed(), if ph == 1 { v } else { -v }));
        }
    }
    raw.sort_unstable_by_key(|(k, _)| *k);
    let mut out: IntVec = Vec::with_capacity(raw.len());
    for (k, c) in raw {
        match out.last_mut() {
            Some((lk, lc)) if *lk == k => *lc = lc.checked_add(c)?,
            _ => out.push((k, c)),
        }
    }
    out.retain(|(_, c)| *c != 0);
    let g = out.iter().fold(0i128, |acc, (_, c)| gcd(acc, c.abs()));
    if g > 1 {
        out.iter_mut().for_each(|(_, c)| *c /= g);
    }
    if out.iter().any(|(_, c)| c.abs() > LIMIT) {
        return None;
    }
    Some(out)
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub(crate) fn int_to_float(v: &IntVec) -> SparseVec {
    normalized(v.iter().map(|&(k, c)| (k, c as f64)).collect())
}

/// Mersenne prime `2^61 - 1`.
const P: u64 = (1 << 61) - 1;

fn mulmod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % P as u128) as u64
}

fn powmod(mut a: u64, mut e: u64) -> u64 {
    let mut r = 1;
    while e > 0 {
        if e & 1 == 1 {
            r = mulmod(r, a);
        }
        a = mulmod(a, a);
        e >>= 1;
    }
    r
}

fn to_mod(c: i128) -> u64 {
    c.rem_euclid(P as i128) as u64
}

/// Echelon span over `GF(2^61 - 1)`. For integer vectors, independence modulo
/// a prime this large implies independence over the rationals, and the
/// converse fails only when the prime divides every maximal minor.
#[derive(Debug, Default)]
pub(crate) struct ModSpan {
    rows: Vec<Vec<(u128, u64)>>,
    pivots: Vec<u128>,
    pivot_index: FxHashMap<u128, usize>,
}

impl ModSpan {
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn insert(&mut self, cand: &IntVec) -> bool {
        let mut work: FxHashMap<u128, u64> =
            FxHashMap::with_capacity_and_hasher(cand.len() * 2, Default::default());
        let mut heap = BinaryHeap::new();
        for &(k, c) in cand {
            let m = to_mod(c);
            if m == 0 {
                continue;
            }
            work.insert(k, m);
            if let Some(&i) = self.pivot_index.get(&k) {
                heap.push(Reverse(i));
            }
        }
        while let Some(Reverse(i)) = heap.pop() {
            let p = self.pivots[i];
            let Some(v) = work.remove(&p) else { continue };
            if v == 0 {
                continue;
            }
            let neg = P - v;
            for &(k, r) in &self.rows[i] {
                if k == p {
                    continue;
                }
                let delta = mulmod(neg, r);
                match work.get_mut(&k) {
                    Some(x) => {
                        *x = (*x + delta) % P;
                    }
                    None => {
                        work.insert(k, delta);
                        if let Some(&j) = self.pivot_index.get(&k) {
                            heap.push(Reverse(j));
                        }
                    }
                }
            }
        }
        let mut row: Vec<(u128, u64)> = work.into_iter().filter(|(_, c)| *c != 0).collect();
        if row.is_empty() {
            return false;
        }
        row.sort_unstable_by_key(|(k, _)| *k);
        let (pk, pv) = row[0];
        let inv = powmod(pv, P - 2);
        row.iter_mut().for_each(|(_, c)| *c = mulmod(*c, inv));
        let idx = self.rows.len();
        self.pivot_index.insert(pk, idx);
        self.pivots.push(pk);
        self.rows.push(row);
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(x: u64, z: u64) -> u128 {
        PauliKey::new(x, z).packed()
    }

    #[test]
    fn dependent_vectors_are_rejected() {
        let mut span = EchelonSpan::new(1e-9);
        let a = normalized(vec![(key(1, 0), 1.0), (key(2, 0), 1.0)]);
        let b = normalized(vec![(key(2, 0), 1.0), (key(4, 0), -2.0)]);
        assert!(span.insert(&a).is_some());
        assert!(span.insert(&b).is_some());
        let mut comb = vec![(key(1, 0), 3.0), (key(2, 0), 5.0), (key(4, 0), -4.0)];
        comb.sort_unstable_by_key(|e| e.0);
        assert!(span.insert(&normalized(comb)).is_none());
        assert_eq!(span.dim(), 2);
    }

    #[test]
    fn basis_is_orthonormal() {
        let mut span = EchelonSpan::new(1e-9);
        let vs = [
            vec![(key(1, 0), 1.0), (key(2, 0), 2.0), (key(3, 0), 0.5)],
            vec![(key(2, 0), 1.0), (key(3, 0), -1.0)],
            vec![(key(1, 0), 1.0), (key(5, 0), 1.0)],
        ];
        for v in vs {
            span.insert(&normalized(v));
        }
        let basis = span.orthonormal_basis();
        assert_eq!(basis.len(), 3);
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let d: f64 = a
                    .iter()
                    .filter_map(|(k, c)| b.iter().find(|e| e.0 == *k).map(|e| e.1 * c))
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn modular_span_matches_rank() {
        let mut span = ModSpan::default();
        assert!(span.insert(&vec![(key(1, 0), 1), (key(2, 0), 1)]));
        assert!(span.insert(&vec![(key(2, 0), 1), (key(4, 0), -2)]));
        assert!(!span.insert(&vec![(key(1, 0), 3), (key(2, 0), 5), (key(4, 0), -4)]));
        assert!(span.insert(&vec![(key(1, 0), 3), (key(2, 0), 5), (key(4, 0), -3)]));
        assert_eq!(span.dim(), 3);
    }

    #[test]
    fn integer_commutator_divides_out_gcd() {
        // [X, Z] / 2i = -Y, scaled by 2 * 3 and reduced
        let c = int_commutator(&vec![(key(1, 0), 2)], &vec![(key(0, 1), 3)]).unwrap();
        assert_eq!(c, vec![(key(1, 1), -1)]);
    }
}
