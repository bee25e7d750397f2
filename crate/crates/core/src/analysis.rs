//! Floating-point oracles and growth sweeps.
//!
//! Norms are taken in the orthonormal `e`-basis. The operator and its
//! inverse are applied in factored form (`R_m·D1·U·D2` and its reverse), so
//! one application costs `O(m)`; `R_m⁻¹` is a substitution along the
//! single-entry elimination order.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cabling::{
    build_rm, factor_matrices, inverse_factors, morton_column, rt_matrix_e_basis, CableParams,
    ColumnMatrix,
};
use crate::cyclotomic::RootSystem;
use crate::error::{Error, Result};
use crate::structure::{eliminate, zero_rows, RowOrder};

type CVec = DVector<Complex64>;

pub fn numeric_det(mat: &DMatrix<Complex64>) -> Complex64 {
    mat.clone().determinant()
}

/// A square complex operator known through its action.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &CVec) -> CVec;
    fn apply_adjoint(&self, x: &CVec) -> CVec;
}

impl LinearOperator for DMatrix<Complex64> {
    fn dim(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &CVec) -> CVec {
        self * x
    }

    fn apply_adjoint(&self, x: &CVec) -> CVec {
        self.ad_mul(x)
    }
}

/// Evaluated sparse columns, 0-based.
#[derive(Debug, Clone)]
struct SparseColumns {
    cols: Vec<Vec<(usize, Complex64)>>,
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl SparseColumns {
    fn new(matrix: &ColumnMatrix, sys: &RootSystem) -> Self {
        let n = matrix.dim();
        let mut rows = vec![Vec::new(); n];
        let cols = matrix
            .columns()
            .iter()
            .enumerate()
            .map(|(c, col)| {
                col.entries()
                    .map(|(row, x)| {
                        let v = sys.eval(x);
                        rows[row as usize - 1].push((c, v));
                        (row as usize - 1, v)
                    })
                    .collect()
            })
            .collect();
        SparseColumns { cols, rows }
    }

    fn mul(&self, x: &CVec) -> CVec {
        let mut out = CVec::zeros(self.cols.len());
        for (c, col) in self.cols.iter().enumerate() {
            for &(row, v) in col {
                out[row] += v * x[c];
            }
        }
        out
    }

    fn mul_adjoint(&self, y: &CVec) -> CVec {
        CVec::from_iterator(
            self.cols.len(),
            self.cols
                .iter()
                .map(|col| col.iter().map(|&(row, v)| v.conj() * y[row]).sum()),
        )
    }
}

/// `R_m` with a pivot order that makes it triangular.
#[derive(Debug, Clone)]
struct RmSolver {
    matrix: SparseColumns,
    /// `(row, col, value)` in elimination order, 0-based.
    pivots: Vec<(usize, usize, Complex64)>,
}

impl RmSolver {
    fn new(params: &CableParams) -> Result<Self> {
        let rm = build_rm(params);
        let elim = eliminate(&rm, &RowOrder::Greedy).map_err(|e| match e {
            Error::EliminationStalled { .. } => Error::Singular(e.to_string()),
            e => e,
        })?;
        let sys = params.sys();
        let pivots = elim
            .trace
            .iter()
            .map(|s| (s.row - 1, s.col - 1, sys.eval_mono(s.entry)))
            .collect();
        Ok(RmSolver {
            matrix: SparseColumns::new(rm.as_columns(), &sys),
            pivots,
        })
    }

    /// Solves `R x = b`: each pivot row only involves columns solved earlier.
    fn solve(&self, b: &CVec) -> CVec {
        let mut x = CVec::zeros(b.len());
        for &(row, col, piv) in &self.pivots {
            let known: Complex64 = self.matrix.rows[row]
                .iter()
                .filter(|&&(c, _)| c != col)
                .map(|&(c, v)| v * x[c])
                .sum();
            x[col] = (b[row] - known) / piv;
        }
        x
    }

    /// Solves `R^H y = c`: each pivot column only involves rows solved later.
    fn solve_adjoint(&self, c: &CVec) -> CVec {
        let mut y = CVec::zeros(c.len());
        for &(row, col, piv) in self.pivots.iter().rev() {
            let known: Complex64 = self.matrix.cols[col]
                .iter()
                .filter(|&&(r, _)| r != row)
                .map(|&(r, v)| v.conj() * y[r])
                .sum();
            y[row] = (c[col] - known) / piv.conj();
        }
        y
    }
}

/// `(U y)[a] = Σ_{b ≥ a, b ≡ a mod 2} y[b]`.
fn u_apply(y: &CVec) -> CVec {
    let n = y.len();
    let mut z = y.clone();
    for a in (0..n.saturating_sub(2)).rev() {
        z[a] = z[a] + z[a + 2];
    }
    z
}

fn u_adjoint(y: &CVec) -> CVec {
    let mut z = y.clone();
    for b in 2..y.len() {
        z[b] = z[b] + z[b - 2];
    }
    z
}

fn u_inv_apply(y: &CVec) -> CVec {
    let n = y.len();
    CVec::from_fn(n, |a, _| if a + 2 < n { y[a] - y[a + 2] } else { y[a] })
}

fn u_inv_adjoint(y: &CVec) -> CVec {
    CVec::from_fn(y.len(), |b, _| if b >= 2 { y[b] - y[b - 2] } else { y[b] })
}

fn diag(d: &[Complex64], x: &CVec) -> CVec {
    CVec::from_fn(x.len(), |i, _| d[i] * x[i])
}

fn diag_conj(d: &[Complex64], x: &CVec) -> CVec {
    CVec::from_fn(x.len(), |i, _| d[i].conj() * x[i])
}

/// The operator as `R_m · D1 · U · D2`.
#[derive(Debug, Clone)]
pub struct FactoredRt {
    rm: SparseColumns,
    d1: Vec<Complex64>,
    d2: Vec<Complex64>,
}

impl FactoredRt {
    pub fn new(params: &CableParams) -> Self {
        let sys = params.sys();
        let f = factor_matrices(params);
        FactoredRt {
            rm: SparseColumns::new(build_rm(params).as_columns(), &sys),
            d1: f.d1.iter().map(|&x| sys.eval_mono(x)).collect(),
            d2: f.d2.iter().map(|&x| sys.eval_mono(x)).collect(),
        }
    }
}

impl LinearOperator for FactoredRt {
    fn dim(&self) -> usize {
        self.d1.len()
    }

    fn apply(&self, x: &CVec) -> CVec {
        self.rm.mul(&diag(&self.d1, &u_apply(&diag(&self.d2, x))))
    }

    fn apply_adjoint(&self, x: &CVec) -> CVec {
        diag_conj(
            &self.d2,
            &u_adjoint(&diag_conj(&self.d1, &self.rm.mul_adjoint(x))),
        )
    }
}

/// The inverse as `D2⁻¹ · U⁻¹ · D1⁻¹ · R_m⁻¹`.
#[derive(Debug, Clone)]
pub struct FactoredRtInverse {
    solver: RmSolver,
    d1_inv: Vec<Complex64>,
    d2_inv: Vec<Complex64>,
}

impl FactoredRtInverse {
    /// Fails with [`Error::Singular`] when `R_m` has no single-entry
    /// elimination order, which includes every `gcd(r, q) > 1`.
    pub fn new(params: &CableParams) -> Result<Self> {
        let sys = params.sys();
        let inv = inverse_factors(params);
        Ok(FactoredRtInverse {
            solver: RmSolver::new(params)?,
            d1_inv: inv.d1_inv.iter().map(|&x| sys.eval_mono(x)).collect(),
            d2_inv: inv.d2_inv.iter().map(|&x| sys.eval_mono(x)).collect(),
        })
    }
}

impl LinearOperator for FactoredRtInverse {
    fn dim(&self) -> usize {
        self.d1_inv.len()
    }

    fn apply(&self, x: &CVec) -> CVec {
        let w = diag(&self.d1_inv, &self.solver.solve(x));
        diag(&self.d2_inv, &u_inv_apply(&w))
    }

    fn apply_adjoint(&self, x: &CVec) -> CVec {
        let w = u_inv_adjoint(&diag_conj(&self.d2_inv, x));
        self.solver.solve_adjoint(&diag_conj(&self.d1_inv, &w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormOptions {
    /// Relative change of the Rayleigh quotient at which iteration stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormEstimate {
    pub norm: f64,
    pub iterations: usize,
    pub last_change: f64,
}

/// Largest singular value by power iteration on `A^H A`, seeded with the
/// normalized all-ones vector.
pub fn operator_norm(op: &dyn LinearOperator, opts: NormOptions) -> Result<NormEstimate> {
    let n = op.dim();
    if n == 0 {
        return Ok(NormEstimate {
            norm: 0.0,
            iterations: 0,
            last_change: 0.0,
        });
    }
    let mut v = CVec::from_element(n, Complex64::new(1.0 / (n as f64).sqrt(), 0.0));
    let mut lambda = 0.0f64;
    let mut change = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let av = op.apply(&v);
        let next = av.norm_squared();
        change = if next > 0.0 {
            (next - lambda).abs() / next
        } else {
            0.0
        };
        lambda = next;
        let w = op.apply_adjoint(&av);
        let wn = w.norm();
        if wn == 0.0 || change < opts.tol {
            return Ok(NormEstimate {
                norm: lambda.sqrt(),
                iterations: it,
                last_change: change,
            });
        }
        v = w.unscale(wn);
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        last_change: change,
    })
}

/// Tolerance on `‖RT·X − I‖_max` for [`full_inverse`].
pub const INVERSE_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct FullInverse {
    pub inverse: DMatrix<Complex64>,
    pub residual: f64,
}

/// Dense inverse of the operator, checked against the dense cabling-formula
/// matrix.
pub fn full_inverse(params: &CableParams) -> Result<FullInverse> {
    if params.gcd_rq() > 1 {
        return Err(Error::Singular(format!(
            "R_m has zero rows {:?}",
            zero_rows(params)?
        )));
    }
    if !params.is_large_level() {
        return Err(Error::Precondition(format!(
            "r = {} must exceed q + 6 = {}",
            params.r(),
            params.q() + 6
        )));
    }
    let op = FactoredRtInverse::new(params)?;
    let m = op.dim();
    let mut inverse = DMatrix::zeros(m, m);
    for k in 0..m {
        let mut e = CVec::zeros(m);
        e[k] = Complex64::new(1.0, 0.0);
        inverse.set_column(k, &op.apply(&e));
    }
    let rt = rt_matrix_e_basis(params)?.eval(&params.sys());
    let prod = rt * &inverse;
    let residual = (0..m)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| {
            let id = if i == j { 1.0 } else { 0.0 };
            (prod[(i, j)] - Complex64::new(id, 0.0)).norm()
        })
        .fold(0.0, f64::max);
    if residual >= INVERSE_RESIDUAL_TOL {
        return Err(Error::Consistency(format!(
            "inverse residual {residual:e} exceeds {INVERSE_RESIDUAL_TOL:e} for (p, q, r) = ({}, {}, {})",
            params.p(),
            params.q(),
            params.r()
        )));
    }
    Ok(FullInverse { inverse, residual })
}

/// `‖RT·e_i‖²`, the squared norm of the image of the `i`-colored core.
pub fn colored_tv(params: &CableParams, i: u32) -> Result<f64> {
    Ok(morton_column(i as i64, params)?.norm_sqr(&params.sys()))
}

/// Squared norm of column 1 of the operator, i.e. of the image of the
/// solid-torus vector `e_1`.
pub fn tv_cable_of_solid_torus(params: &CableParams) -> f64 {
    colored_tv(params, 1).expect("m >= 1")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordStatus {
    Ok,
    SkippedGcd,
    SkippedSmallR,
    Failed,
}

impl RecordStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordStatus::Ok => "ok",
            RecordStatus::SkippedGcd => "skipped-gcd",
            RecordStatus::SkippedSmallR => "skipped-small-r",
            RecordStatus::Failed => "failed",
        }
    }
}

/// Classifies one level of a sweep: `Ok(params)` for admissible levels,
/// otherwise the skip or failure status with a reason.
fn classify_level(
    p: i64,
    q: i64,
    r: i64,
) -> std::result::Result<CableParams, (RecordStatus, String)> {
    let params = CableParams::new(p, q, r).map_err(|e| (RecordStatus::Failed, e.to_string()))?;
    if params.gcd_rq() > 1 {
        return Err((
            RecordStatus::SkippedGcd,
            format!("gcd(r, q) = {}", params.gcd_rq()),
        ));
    }
    if !params.is_large_level() {
        return Err((
            RecordStatus::SkippedSmallR,
            format!("r <= q + 6 = {}", q + 6),
        ));
    }
    Ok(params)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormGrowthRecord {
    pub p: i64,
    pub q: i64,
    pub r: i64,
    pub m: Option<u32>,
    pub det_modulus: Option<f64>,
    pub inv_norm: Option<f64>,
    pub rt_norm: Option<f64>,
    pub tv_cable: Option<f64>,
    pub status: RecordStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl NormGrowthRecord {
    fn empty(p: i64, q: i64, r: i64, status: RecordStatus, detail: String) -> Self {
        NormGrowthRecord {
            p,
            q,
            r,
            m: None,
            det_modulus: None,
            inv_norm: None,
            rt_norm: None,
            tv_cable: None,
            status,
            detail: Some(detail),
        }
    }
}

/// Least-squares line through `(x, y)` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    pub r_range: (i64, i64),
    pub points: usize,
}

pub const MIN_FIT_POINTS: usize = 5;

/// Fits `y = slope·x + intercept` to `(r, x, y)` triples.
pub fn fit_line(points: &[(i64, f64, f64)]) -> Result<GrowthFit> {
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_POINTS,
            got: points.len(),
        });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.1).sum::<f64>() / n;
    let my = points.iter().map(|p| p.2).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.1 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.1 - mx) * (p.2 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse: f64 = points
        .iter()
        .map(|p| (p.2 - slope * p.1 - intercept).powi(2))
        .sum();
    let rs = points.iter().map(|p| p.0);
    Ok(GrowthFit {
        slope,
        intercept,
        residual: (sse / n).sqrt(),
        r_range: (rs.clone().min().unwrap(), rs.max().unwrap()),
        points: points.len(),
    })
}

/// Restricts to the largest two thirds of the `r`-range.
fn upper_window(points: &[(i64, f64, f64)]) -> Vec<(i64, f64, f64)> {
    let (Some(lo), Some(hi)) = (
        points.iter().map(|p| p.0).min(),
        points.iter().map(|p| p.0).max(),
    ) else {
        return Vec::new();
    };
    let cut = lo as f64 + (hi - lo) as f64 / 3.0;
    points
        .iter()
        .filter(|p| p.0 as f64 >= cut)
        .copied()
        .collect()
}

/// Checks that `inv_norm / r^exponent` does not climb: the maximum over the
/// upper half of the fit window must not exceed the lower-half maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowUpCheck {
    pub exponent: i32,
    pub lower_half_max: f64,
    pub upper_half_max: f64,
    pub flagged: bool,
}

fn blow_up_check(window: &[(i64, f64)], slope: f64) -> BlowUpCheck {
    let exponent = slope.ceil() as i32 + 1;
    let mut pts = window.to_vec();
    pts.sort_by_key(|p| p.0);
    let ratios: Vec<f64> = pts
        .iter()
        .map(|&(r, v)| v / (r as f64).powi(exponent))
        .collect();
    let half = ratios.len() / 2;
    let max = |s: &[f64]| s.iter().copied().fold(0.0, f64::max);
    let (lower, upper) = (max(&ratios[..half]), max(&ratios[half..]));
    BlowUpCheck {
        exponent,
        lower_half_max: lower,
        upper_half_max: upper,
        flagged: upper > lower * (1.0 + 1e-9),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepOptions {
    pub norm: NormOptions,
}

impl Default for SweepOptions {
    /// The inverse has nearly degenerate top singular values, so sweeps need
    /// a much longer iteration budget than single norm calls.
    fn default() -> Self {
        SweepOptions {
            norm: NormOptions {
                tol: 1e-10,
                max_iter: 200_000,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormSweep {
    pub records: Vec<NormGrowthRecord>,
    pub fit: Option<GrowthFit>,
    pub fit_error: Option<String>,
    pub blow_up: Option<BlowUpCheck>,
}

fn norm_record(params: &CableParams, opts: &SweepOptions) -> Result<NormGrowthRecord> {
    let det_modulus = numeric_det(&build_rm(params).eval()).norm();
    rt_matrix_e_basis(params)?;
    let inv_norm = operator_norm(&FactoredRtInverse::new(params)?, opts.norm)?.norm;
    let rt_norm = operator_norm(&FactoredRt::new(params), opts.norm)?.norm;
    Ok(NormGrowthRecord {
        p: params.p(),
        q: params.q() as i64,
        r: params.r() as i64,
        m: Some(params.m()),
        det_modulus: Some(det_modulus),
        inv_norm: Some(inv_norm),
        rt_norm: Some(rt_norm),
        tv_cable: Some(tv_cable_of_solid_torus(params)),
        status: RecordStatus::Ok,
        detail: None,
    })
}

/// One record per requested level, then a log–log fit of the inverse norm
/// against `r` over the upper two thirds of the admissible range.
///
/// Inadmissible levels are recorded as skipped, failed computations as
/// failed; only internal consistency failures abort the sweep.
pub fn norm_growth_sweep(p: i64, q: i64, r_list: &[i64], opts: &SweepOptions) -> Result<NormSweep> {
    let mut records = Vec::with_capacity(r_list.len());
    for &r in r_list {
        let rec = match classify_level(p, q, r) {
            Err((status, why)) => NormGrowthRecord::empty(p, q, r, status, why),
            Ok(params) => match norm_record(&params, opts) {
                Ok(rec) => rec,
                Err(e) if e.is_internal() => return Err(e),
                Err(e) => {
                    let mut rec =
                        NormGrowthRecord::empty(p, q, r, RecordStatus::Failed, e.to_string());
                    rec.m = Some(params.m());
                    rec
                }
            },
        };
        records.push(rec);
    }
    let points: Vec<(i64, f64, f64)> = records
        .iter()
        .filter(|rec| rec.status == RecordStatus::Ok)
        .map(|rec| (rec.r, (rec.r as f64).ln(), rec.inv_norm.unwrap().ln()))
        .collect();
    let window = upper_window(&points);
    let (fit, fit_error, blow_up) = match fit_line(&window) {
        Ok(fit) => {
            let w: Vec<(i64, f64)> = window.iter().map(|p| (p.0, p.2.exp())).collect();
            (Some(fit), None, Some(blow_up_check(&w, fit.slope)))
        }
        Err(e) => (None, Some(e.to_string()), None),
    };
    Ok(NormSweep {
        records,
        fit,
        fit_error,
        blow_up,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TvRecord {
    pub p: i64,
    pub q: i64,
    pub r: i64,
    pub m: Option<u32>,
    pub color: u32,
    pub tv: Option<f64>,
    /// `(2π/r)·ln tv`
    pub scaled_log: Option<f64>,
    pub status: RecordStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TvSweep {
    pub color: u32,
    pub records: Vec<TvRecord>,
    /// Linear fit of `(2π/r)·ln tv` against `r`.
    pub fit: Option<GrowthFit>,
    pub fit_error: Option<String>,
}

/// `‖RT·e_color‖²` per level and the trend of `(2π/r)·ln` of it.
pub fn tv_growth_sweep(p: i64, q: i64, r_list: &[i64], color: u32) -> Result<TvSweep> {
    let mut records = Vec::with_capacity(r_list.len());
    for &r in r_list {
        let blank = |status, detail: String| TvRecord {
            p,
            q,
            r,
            m: None,
            color,
            tv: None,
            scaled_log: None,
            status,
            detail: Some(detail),
        };
        let rec = match classify_level(p, q, r) {
            Err((status, why)) => blank(status, why),
            Ok(params) => match colored_tv(&params, color) {
                Err(e) => blank(RecordStatus::Failed, e.to_string()),
                Ok(tv) if tv <= 0.0 => blank(RecordStatus::Failed, "vanishing norm".into()),
                Ok(tv) => TvRecord {
                    p,
                    q,
                    r,
                    m: Some(params.m()),
                    color,
                    tv: Some(tv),
                    scaled_log: Some(2.0 * std::f64::consts::PI / r as f64 * tv.ln()),
                    status: RecordStatus::Ok,
                    detail: None,
                },
            },
        };
        records.push(rec);
    }
    let points: Vec<(i64, f64, f64)> = records
        .iter()
        .filter_map(|rec| rec.scaled_log.map(|s| (rec.r, rec.r as f64, s)))
        .collect();
    let (fit, fit_error) = match fit_line(&points) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(TvSweep {
        color,
        records,
        fit,
        fit_error,
    })
}

/// A unit boundary vector standing in for the state of the glued piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BoundaryVector {
    Basis {
        i: u32,
    },
    /// Drawn independently for every level from a stream keyed by the seed
    /// and `r`.
    Random {
        seed: u64,
    },
}

impl BoundaryVector {
    /// Coordinates for level `r` with `m` basis vectors, or `None` if the
    /// basis index exceeds `m`.
    pub fn realize(&self, r: u32, m: usize) -> Option<CVec> {
        match *self {
            BoundaryVector::Basis { i } => {
                let i = i as usize;
                (1..=m).contains(&i).then(|| {
                    let mut v = CVec::zeros(m);
                    v[i - 1] = Complex64::new(1.0, 0.0);
                    v
                })
            }
            BoundaryVector::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(r as u64);
                let v = CVec::from_fn(m, |_, _| {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                });
                let n = v.norm();
                Some(v.unscale(n))
            }
        }
    }
}

impl std::fmt::Display for BoundaryVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryVector::Basis { i } => write!(f, "e_{i}"),
            BoundaryVector::Random { seed } => write!(f, "random(seed={seed})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioRecord {
    pub r: i64,
    /// `‖RT·v‖² / ‖v‖²`
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichSeries {
    pub vector: BoundaryVector,
    pub records: Vec<RatioRecord>,
    /// Log–log fit of the ratio against `r`.
    pub fit: GrowthFit,
    /// `⌈|slope|⌉`
    pub fitted_n: u32,
    /// `max_r ratio / r^N`
    pub upper_constant: f64,
    /// `max_r 1 / (r^N · ratio)`
    pub lower_constant: f64,
    /// `|slope|` exceeds the declared exponent by more than 0.5.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub p: i64,
    pub q: i64,
    pub declared_n: u32,
    pub series: Vec<SandwichSeries>,
    pub skipped: Vec<(i64, RecordStatus)>,
}

impl SandwichReport {
    pub fn any_flagged(&self) -> bool {
        self.series.iter().any(|s| s.flagged)
    }
}

/// Ratio `‖RT·v‖²/‖v‖²` across levels for each boundary vector, with the
/// smallest exponent `N` and constant `C` making `r^{−N}/C ≤ ratio ≤ C·r^N`
/// hold on the sample.
pub fn sandwich_check(
    p: i64,
    q: i64,
    r_list: &[i64],
    vectors: &[BoundaryVector],
    declared_n: u32,
) -> Result<SandwichReport> {
    let mut ops = Vec::new();
    let mut skipped = Vec::new();
    for &r in r_list {
        match classify_level(p, q, r) {
            Ok(params) => ops.push((params, FactoredRt::new(&params))),
            Err((status, _)) => skipped.push((r, status)),
        }
    }
    let mut series = Vec::with_capacity(vectors.len());
    for &vector in vectors {
        let records: Vec<RatioRecord> = ops
            .iter()
            .filter_map(|(params, op)| {
                let v = vector.realize(params.r(), params.m() as usize)?;
                Some(RatioRecord {
                    r: params.r() as i64,
                    ratio: op.apply(&v).norm_squared() / v.norm_squared(),
                })
            })
            .collect();
        let points: Vec<(i64, f64, f64)> = records
            .iter()
            .map(|rec| (rec.r, (rec.r as f64).ln(), rec.ratio.ln()))
            .collect();
        let fit = fit_line(&points)?;
        // Slopes within rounding of an integer do not raise N.
        let fitted_n = (fit.slope.abs() - 1e-9).ceil().max(0.0) as u32;
        let rn = |r: i64| (r as f64).powi(fitted_n as i32);
        let upper_constant = records
            .iter()
            .map(|x| x.ratio / rn(x.r))
            .fold(0.0, f64::max);
        let lower_constant = records
            .iter()
            .map(|x| 1.0 / (rn(x.r) * x.ratio))
            .fold(0.0, f64::max);
        series.push(SandwichSeries {
            vector,
            records,
            fitted_n,
            upper_constant,
            lower_constant,
            flagged: fit.slope.abs() > declared_n as f64 + 0.5,
            fit,
        });
    }
    Ok(SandwichReport {
        p,
        q,
        declared_n,
        series,
        skipped,
    })
}

/// Odd levels in `[lo, hi]`.
pub fn odd_range(lo: i64, hi: i64) -> Vec<i64> {
    (lo..=hi).filter(|r| r.rem_euclid(2) == 1).collect()
}
