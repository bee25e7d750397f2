//! The cabling operator in the torus basis and its factorization.
//!
//! Column `i` of the operator is the cabling formula applied to `e_i`:
//!
//! ```text
//! ζ^{pq(i²−1)} · Σ_j ζ^{−pqj² − 2pj} e_{qj+1},   j ∈ {−(i−1), −(i−3), …, i−1}
//! ```
//!
//! (the summation variable is doubled so every exponent is an integer).
//! Pairing the `±j` terms gives the `f̃`-expansion over `T_i`, which in
//! matrix form reads `R_m · D1 · U · D2`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cyclotomic::{Monomial, RootSystem};
use crate::error::{Error, Result};
use crate::skein::{f_tilde, SkeinVector};

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Cabling slopes `(p, q)` at level `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CableParams {
    p: i64,
    q: u32,
    sys: RootSystem,
}

impl CableParams {
    pub fn new(p: i64, q: i64, r: i64) -> Result<Self> {
        if q < 1 || q > u32::MAX as i64 || gcd(p, q) != 1 {
            return Err(Error::InvalidCable { p, q });
        }
        Ok(CableParams {
            p,
            q: q as u32,
            sys: RootSystem::new(r)?,
        })
    }

    pub fn p(&self) -> i64 {
        self.p
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn r(&self) -> u32 {
        self.sys.r()
    }

    pub fn m(&self) -> u32 {
        self.sys.m()
    }

    pub fn sys(&self) -> RootSystem {
        self.sys
    }

    pub fn gcd_rq(&self) -> u32 {
        gcd(self.r() as i64, self.q as i64) as u32
    }

    /// `r > q + 6`, the range where the sparsity pattern is fully controlled.
    pub fn is_large_level(&self) -> bool {
        self.r() as i64 > self.q as i64 + 6
    }

    /// Coprime to `q` and `r > q + 6`.
    pub fn is_admissible(&self) -> bool {
        self.gcd_rq() == 1 && self.is_large_level()
    }
}

fn check_column(i: i64, params: &CableParams) -> Result<()> {
    let m = params.m() as i64;
    if !(1..=m).contains(&i) {
        return Err(Error::out_of_range("i", i, 1, m));
    }
    Ok(())
}

/// Image of `e_i` under the cabling operator, reduced to `e_1, …, e_m`.
pub fn morton_column(i: i64, params: &CableParams) -> Result<SkeinVector> {
    check_column(i, params)?;
    let sys = params.sys();
    let (p, q) = (params.p(), params.q() as i64);
    let prefactor = p * q * (i * i - 1);
    let mut v = SkeinVector::new();
    for j in (-(i - 1)..=(i - 1)).step_by(2) {
        let coeff = sys.zeta(prefactor - p * q * j * j - 2 * p * j);
        v.add_term(q * j + 1, coeff, &sys);
    }
    Ok(v)
}

/// `T_i`: `{0, 2, …, i−1}` for odd `i`, `{1, 3, …, i−1}` for even `i`.
pub fn t_set(i: i64) -> impl Iterator<Item = i64> {
    ((1 - i % 2)..i).step_by(2)
}

/// Coefficients of `f̃_l` in the image of `e_i`.
pub fn f_expansion(i: i64, params: &CableParams) -> Result<BTreeMap<i64, Monomial>> {
    check_column(i, params)?;
    let (p, q) = (params.p(), params.q() as i64);
    let sys = params.sys();
    Ok(t_set(i)
        .map(|l| (l, sys.zeta(p * q * (i * i - 1) - p * q * l * l - 2 * p * l)))
        .collect())
}

/// Square matrix stored as sparse columns with group-ring entries.
/// Rows and columns are 1-based in the accessors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMatrix {
    dim: usize,
    cols: Vec<SkeinVector>,
}

impl ColumnMatrix {
    pub fn from_columns(cols: Vec<SkeinVector>) -> Self {
        ColumnMatrix {
            dim: cols.len(),
            cols,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn col(&self, c: usize) -> &SkeinVector {
        &self.cols[c - 1]
    }

    pub fn columns(&self) -> &[SkeinVector] {
        &self.cols
    }

    pub fn entry(&self, row: usize, col: usize) -> Option<&crate::CycElem> {
        self.cols[col - 1].get(row as u32)
    }

    /// Column indices of the nonzero entries of `row`, increasing.
    pub fn row_support(&self, row: usize) -> Vec<usize> {
        (1..=self.dim)
            .filter(|&c| self.cols[c - 1].get(row as u32).is_some())
            .collect()
    }

    pub fn row_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.dim];
        for col in &self.cols {
            for (j, _) in col.entries() {
                counts[j as usize - 1] += 1;
            }
        }
        counts
    }

    pub fn col_counts(&self) -> Vec<usize> {
        self.cols.iter().map(SkeinVector::nnz).collect()
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(SkeinVector::nnz).sum()
    }

    pub fn eval(&self, sys: &RootSystem) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for (c, col) in self.cols.iter().enumerate() {
            for (j, x) in col.entries() {
                out[(j as usize - 1, c)] = sys.eval(x);
            }
        }
        out
    }
}

/// The change-of-basis matrix whose column `l+1` is `f̃_l`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RmMatrix {
    params: CableParams,
    matrix: ColumnMatrix,
}

impl RmMatrix {
    pub fn params(&self) -> &CableParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn as_columns(&self) -> &ColumnMatrix {
        &self.matrix
    }

    /// Entry as a single monomial. `None` for zero entries and for the
    /// two-term entries that only occur when `gcd(r, q) > 1`.
    pub fn monomial(&self, row: usize, col: usize) -> Option<Monomial> {
        self.matrix.entry(row, col).and_then(|x| x.as_monomial())
    }

    pub fn eval(&self) -> DMatrix<Complex64> {
        self.matrix.eval(&self.params.sys())
    }
}

pub fn build_rm(params: &CableParams) -> RmMatrix {
    let cols = (0..params.m() as i64)
        .map(|l| f_tilde(l, params).expect("l < m"))
        .collect();
    RmMatrix {
        params: *params,
        matrix: ColumnMatrix::from_columns(cols),
    }
}

/// Dense 0/1 matrix, 1-based accessors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    dim: usize,
    bits: Vec<bool>,
}

impl BitMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[(row - 1) * self.dim + col - 1]
    }

    pub fn to_int(&self) -> IntMatrix {
        IntMatrix {
            dim: self.dim,
            data: self.bits.iter().map(|&b| b as i64).collect(),
        }
    }
}

/// Dense integer matrix, 1-based accessors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    dim: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0; dim * dim];
        for k in 0..dim {
            data[k * dim + k] = 1;
        }
        IntMatrix { dim, data }
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let dim = rows.len();
        assert!(rows.iter().all(|r| r.len() == dim), "square rows expected");
        IntMatrix {
            dim,
            data: rows.concat(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> i64 {
        self.data[(row - 1) * self.dim + col - 1]
    }

    pub fn mul(&self, rhs: &IntMatrix) -> IntMatrix {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut data = vec![0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0 {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        IntMatrix { dim: n, data }
    }

    pub fn to_complex(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| {
            Complex64::new(self.data[i * self.dim + j] as f64, 0.0)
        })
    }
}

/// `D1`, `U`, `D2` with the operator in the `e`-basis equal to `R_m·D1·U·D2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorTriple {
    /// Entry `l+1` is `ζ^{−2pl − pql²}`.
    pub d1: Vec<Monomial>,
    /// `U[l+1][i] = 1` iff `l ∈ T_i`.
    pub u: BitMatrix,
    /// Entry `i` is `ζ^{pq(i²−1)}`.
    pub d2: Vec<Monomial>,
}

pub fn factor_matrices(params: &CableParams) -> FactorTriple {
    let sys = params.sys();
    let (p, q) = (params.p(), params.q() as i64);
    let m = params.m() as usize;
    let d1 = (0..m as i64)
        .map(|l| sys.zeta(-2 * p * l - p * q * l * l))
        .collect();
    let d2 = (1..=m as i64)
        .map(|i| sys.zeta(p * q * (i * i - 1)))
        .collect();
    let mut bits = vec![false; m * m];
    for i in 1..=m as i64 {
        for l in t_set(i) {
            bits[l as usize * m + (i as usize - 1)] = true;
        }
    }
    FactorTriple {
        d1,
        u: BitMatrix { dim: m, bits },
        d2,
    }
}

/// Explicit inverses of the three factors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InverseFactors {
    pub d2_inv: Vec<Monomial>,
    /// Identity with `−1` on the second superdiagonal.
    pub u_inv: IntMatrix,
    pub d1_inv: Vec<Monomial>,
}

pub fn inverse_factors(params: &CableParams) -> InverseFactors {
    let sys = params.sys();
    let f = factor_matrices(params);
    let m = params.m() as usize;
    let mut u_inv = IntMatrix::identity(m);
    for i in 0..m.saturating_sub(2) {
        u_inv.data[i * m + i + 2] = -1;
    }
    InverseFactors {
        d2_inv: f.d2.iter().map(|&x| sys.mono_inv(x)).collect(),
        u_inv,
        d1_inv: f.d1.iter().map(|&x| sys.mono_inv(x)).collect(),
    }
}

/// Operator matrix assembled column by column from the cabling formula.
pub fn rt_matrix_morton(params: &CableParams) -> ColumnMatrix {
    let cols = (1..=params.m() as i64)
        .map(|i| morton_column(i, params).expect("i <= m"))
        .collect();
    ColumnMatrix::from_columns(cols)
}

/// Operator matrix assembled as the exact product `R_m · D1 · U · D2`.
pub fn rt_matrix_factored(params: &CableParams) -> ColumnMatrix {
    let sys = params.sys();
    let rm = build_rm(params);
    let f = factor_matrices(params);
    let m = params.m() as usize;
    let cols = (1..=m)
        .map(|i| {
            let mut col = SkeinVector::new();
            for l in 1..=m {
                if f.u.get(l, i) {
                    let scale = sys.mono_mul(f.d1[l - 1], f.d2[i - 1]);
                    col.add_vector(&rm.as_columns().col(l).scaled(scale, &sys));
                }
            }
            col
        })
        .collect();
    ColumnMatrix::from_columns(cols)
}

/// The operator in the orthonormal `e`-basis. Both assemblies are built
/// and must agree exactly.
pub fn rt_matrix_e_basis(params: &CableParams) -> Result<ColumnMatrix> {
    let morton = rt_matrix_morton(params);
    let factored = rt_matrix_factored(params);
    if morton != factored {
        let col = (1..=morton.dim())
            .find(|&c| morton.col(c) != factored.col(c))
            .unwrap_or(0);
        return Err(Error::Consistency(format!(
            "cabling-formula and factored assemblies differ in column {col} for (p, q, r) = ({}, {}, {})",
            params.p(),
            params.q(),
            params.r()
        )));
    }
    Ok(morton)
}

/// One term of a dumped matrix entry: `sign · ζ^exp` at `(row, col)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpEntry {
    pub row: usize,
    pub col: usize,
    pub sign: i8,
    pub exp: u32,
}

/// JSON matrix format. A group-ring entry with several terms appears as
/// several records at the same `(row, col)`; an integer coefficient `c`
/// appears as `|c|` records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixDump {
    pub p: i64,
    pub q: u32,
    pub r: u32,
    pub m: u32,
    pub entries: Vec<DumpEntry>,
}

impl MatrixDump {
    pub fn new(params: &CableParams, matrix: &ColumnMatrix) -> Self {
        let mut entries = Vec::new();
        for (c, col) in matrix.columns().iter().enumerate() {
            for (row, x) in col.entries() {
                for (exp, coeff) in x.terms() {
                    for _ in 0..coeff.unsigned_abs() {
                        entries.push(DumpEntry {
                            row: row as usize,
                            col: c + 1,
                            sign: coeff.signum() as i8,
                            exp,
                        });
                    }
                }
            }
        }
        entries.sort_by_key(|e| (e.row, e.col, e.exp, e.sign));
        MatrixDump {
            p: params.p(),
            q: params.q(),
            r: params.r(),
            m: params.m(),
            entries,
        }
    }

    /// Rebuilds the matrix from its records.
    pub fn to_matrix(&self) -> Result<(CableParams, ColumnMatrix)> {
        let params = CableParams::new(self.p, self.q as i64, self.r as i64)?;
        let sys = params.sys();
        let m = params.m() as usize;
        let mut cols = vec![SkeinVector::new(); m];
        for e in &self.entries {
            if !(1..=m).contains(&e.row) || !(1..=m).contains(&e.col) {
                return Err(Error::out_of_range(
                    "dump index",
                    e.row.max(e.col) as i64,
                    1,
                    m as i64,
                ));
            }
            let term = sys.monomial(e.sign, e.exp as i64);
            cols[e.col - 1].add_at(e.row as u32, &term.into());
        }
        Ok((params, ColumnMatrix::from_columns(cols)))
    }
}
