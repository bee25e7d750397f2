//! Index calculus on the torus basis.
//!
//! The basis `e_1, …, e_m` extends to all integers through `e_{-i} = -e_i`
//! and `e_{i+r} = -e_i`, so `e_0 = e_r = 0`, `e_{i+2r} = e_i` and
//! `e_{m+1+i} = e_{m-i}`. Reduction carries the literal sign produced by
//! these two rules.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cabling::CableParams;
use crate::cyclotomic::{CycElem, Monomial, RootSystem};
use crate::error::{Error, Result};

/// A signed reduced basis vector `sign · e_j`, or zero (`j = 0`, `sign = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReducedIndex {
    pub sign: i8,
    pub j: u32,
}

impl ReducedIndex {
    pub const ZERO: ReducedIndex = ReducedIndex { sign: 0, j: 0 };

    pub fn is_zero(&self) -> bool {
        self.j == 0
    }
}

impl std::ops::Neg for ReducedIndex {
    type Output = ReducedIndex;

    fn neg(self) -> ReducedIndex {
        ReducedIndex {
            sign: -self.sign,
            j: self.j,
        }
    }
}

/// Reduces `e_i` to `0` or `±e_j` with `1 ≤ j ≤ m`.
pub fn reduce_index(i: i64, sys: &RootSystem) -> ReducedIndex {
    let r = sys.r() as i64;
    let m = sys.m() as i64;
    let mut t = i.rem_euclid(2 * r);
    let mut sign = 1i8;
    if t >= r {
        t -= r;
        sign = -1;
    }
    match t {
        0 => ReducedIndex::ZERO,
        t if t <= m => ReducedIndex { sign, j: t as u32 },
        // e_t = e_{r-t} for m < t < r
        t => ReducedIndex {
            sign,
            j: (r - t) as u32,
        },
    }
}

/// Sparse vector over the reduced basis with group-ring coefficients.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkeinVector {
    entries: BTreeMap<u32, CycElem>,
}

impl SkeinVector {
    pub fn new() -> Self {
        SkeinVector::default()
    }

    /// The basis vector `e_j`.
    pub fn basis(j: u32) -> Self {
        let mut v = SkeinVector::new();
        v.entries.insert(j, CycElem::one());
        v
    }

    /// Adds `coeff · e_index` after reducing the index.
    pub fn add_term(&mut self, index: i64, coeff: Monomial, sys: &RootSystem) {
        let red = reduce_index(index, sys);
        if red.is_zero() || coeff.is_zero() {
            return;
        }
        let signed = if red.sign < 0 { -coeff } else { coeff };
        self.add_at(red.j, &signed.into());
    }

    /// Adds `x` to the coefficient of `e_j` (`j` already reduced).
    pub fn add_at(&mut self, j: u32, x: &CycElem) {
        if x.is_zero() {
            return;
        }
        let slot = self.entries.entry(j).or_default();
        *slot = &*slot + x;
        if slot.is_zero() {
            self.entries.remove(&j);
        }
    }

    pub fn get(&self, j: u32) -> Option<&CycElem> {
        self.entries.get(&j)
    }

    pub fn entries(&self) -> impl Iterator<Item = (u32, &CycElem)> + '_ {
        self.entries.iter().map(|(&j, x)| (j, x))
    }

    /// Row indices with a nonzero coefficient, increasing.
    pub fn support(&self) -> Vec<u32> {
        self.entries.keys().copied().collect()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scaled(&self, m: Monomial, sys: &RootSystem) -> SkeinVector {
        SkeinVector {
            entries: self
                .entries
                .iter()
                .filter(|_| !m.is_zero())
                .map(|(&j, x)| (j, sys.scale(x, m)))
                .collect(),
        }
    }

    pub fn add_vector(&mut self, other: &SkeinVector) {
        for (&j, x) in &other.entries {
            self.add_at(j, x);
        }
    }

    /// Dense complex coordinates in the orthonormal basis, length `m`.
    pub fn eval(&self, sys: &RootSystem) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); sys.m() as usize];
        for (&j, x) in &self.entries {
            out[j as usize - 1] = sys.eval(x);
        }
        out
    }

    /// Squared Hermitian norm in the orthonormal basis.
    pub fn norm_sqr(&self, sys: &RootSystem) -> f64 {
        self.entries.values().map(|x| sys.eval(x).norm_sqr()).sum()
    }
}

/// One term `coeff · e_index` of an unreduced expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexedTerm {
    pub coeff: Monomial,
    pub index: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlusMinus {
    Plus,
    Minus,
}

impl PlusMinus {
    pub fn offset(self) -> i64 {
        match self {
            PlusMinus::Plus => 1,
            PlusMinus::Minus => -1,
        }
    }

    pub fn flip(self) -> PlusMinus {
        match self {
            PlusMinus::Plus => PlusMinus::Minus,
            PlusMinus::Minus => PlusMinus::Plus,
        }
    }
}

fn check_l(l: i64, params: &CableParams) -> Result<()> {
    let m = params.m() as i64;
    if !(0..m).contains(&l) {
        return Err(Error::out_of_range("l", l, 0, m - 1));
    }
    Ok(())
}

/// `f_0 = e_1` and `f_l = e_{ql+1} − ζ^{4pl} e_{ql−1}` before reduction.
pub fn f_raw(l: i64, params: &CableParams) -> Result<Vec<IndexedTerm>> {
    check_l(l, params)?;
    if l == 0 {
        return Ok(vec![IndexedTerm {
            coeff: Monomial::ONE,
            index: 1,
        }]);
    }
    let sys = params.sys();
    let q = params.q() as i64;
    Ok(vec![
        IndexedTerm {
            coeff: Monomial::ONE,
            index: q * l + 1,
        },
        IndexedTerm {
            coeff: -sys.zeta(4 * params.p() * l),
            index: q * l - 1,
        },
    ])
}

/// The reduction `f̃_l` of `f_l` to the basis `e_1, …, e_m`.
pub fn f_tilde(l: i64, params: &CableParams) -> Result<SkeinVector> {
    let sys = params.sys();
    let mut v = SkeinVector::new();
    for t in f_raw(l, params)? {
        v.add_term(t.index, t.coeff, &sys);
    }
    Ok(v)
}

/// Reduction of `f_l^± = e_{ql±1}`, with `f_0^+ = e_1` and `f_0^- = 0`.
pub fn fpm_reduced(l: i64, pm: PlusMinus, params: &CableParams) -> Result<ReducedIndex> {
    check_l(l, params)?;
    let sys = params.sys();
    if l == 0 {
        return Ok(match pm {
            PlusMinus::Plus => reduce_index(1, &sys),
            PlusMinus::Minus => ReducedIndex::ZERO,
        });
    }
    Ok(reduce_index(params.q() as i64 * l + pm.offset(), &sys))
}
