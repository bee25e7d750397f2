//! Sparsity structure of `R_m`.
//!
//! When `gcd(r, q) = 1`, `R_m` has at most two nonzeros per row and column,
//! every nonzero is a root of unity, and for `r > q + 6` exactly two rows
//! (`i_−`, `i_+`) carry a single nonzero. That makes `det R_m` computable by
//! expanding along single-entry rows until nothing is left: the result is a
//! single signed monomial. When `gcd(r, q) = d > 1`, rows `d, 2d, …` vanish.
//!
//! All checks here compare supports (absolute indices), never signs.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::cabling::{build_rm, CableParams, RmMatrix};
use crate::cyclotomic::{CycElem, Monomial};
use crate::error::{Error, Result};
use crate::skein::{reduce_index, PlusMinus, ReducedIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Category {
    /// even quotient, remainder `≤ m`
    Ce,
    /// even quotient, remainder `> m`
    De,
    /// odd quotient, remainder `≤ m`
    Co,
    /// odd quotient, remainder `> m`
    Do,
}

impl Category {
    /// `C` categories reduce through the direct form `ql − kr ± 1`.
    pub fn is_direct(self) -> bool {
        matches!(self, Category::Ce | Category::Co)
    }
}

/// Which closed form gives the reduced index: `g = ql − kr ± 1` (remainder
/// `≤ m`) or `h = (k+1)r − ql ∓ 1` (remainder `> m`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum IndexForm {
    G,
    H,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub l: i64,
    pub pm: PlusMinus,
    pub category: Category,
    /// `ql ± 1 = k·r + j`, `0 ≤ j < r`
    pub k: i64,
    pub j: i64,
    pub form: IndexForm,
    /// Value of the `g` or `h` form, i.e. the reduced index.
    pub index: i64,
    pub reduced: ReducedIndex,
}

pub fn classify(l: i64, pm: PlusMinus, params: &CableParams) -> Result<Classification> {
    let m = params.m() as i64;
    if !(1..m).contains(&l) {
        return Err(Error::out_of_range("l", l, 1, m - 1));
    }
    let r = params.r() as i64;
    let q = params.q() as i64;
    let raw = q * l + pm.offset();
    let (k, j) = (raw.div_euclid(r), raw.rem_euclid(r));
    let even = k % 2 == 0;
    let (category, form, index) = if j <= m {
        let cat = if even { Category::Ce } else { Category::Co };
        (cat, IndexForm::G, q * l - k * r + pm.offset())
    } else {
        let cat = if even { Category::De } else { Category::Do };
        (cat, IndexForm::H, (k + 1) * r - q * l - pm.offset())
    };
    let reduced = reduce_index(raw, &params.sys());
    if reduced.j as i64 != index {
        return Err(Error::Consistency(format!(
            "closed form gives index {index} but reduction gives {} for l = {l}",
            reduced.j
        )));
    }
    Ok(Classification {
        l,
        pm,
        category,
        k,
        j,
        form,
        index,
        reduced,
    })
}

fn require_coprime(params: &CableParams) -> Result<()> {
    if params.gcd_rq() != 1 {
        return Err(Error::Precondition(format!(
            "gcd(r, q) = gcd({}, {}) = {} is not 1",
            params.r(),
            params.q(),
            params.gcd_rq()
        )));
    }
    Ok(())
}

fn require_admissible(params: &CableParams) -> Result<()> {
    require_coprime(params)?;
    if !params.is_large_level() {
        return Err(Error::Precondition(format!(
            "r = {} must exceed q + 6 = {}",
            params.r(),
            params.q() + 6
        )));
    }
    Ok(())
}

/// Returns `(g, x, y)` with `a·x + b·y = g = gcd(a, b)`.
fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i64, 0i64);
    let (mut old_t, mut t) = (0i64, 1i64);
    while r != 0 {
        let quot = old_r / r;
        (old_r, r) = (r, old_r - quot * r);
        (old_s, s) = (s, old_s - quot * s);
        (old_t, t) = (t, old_t - quot * t);
    }
    (old_r, old_s, old_t)
}

/// The unique `l ∈ [1, m]` with `r | ql + 1` or `r | ql − 1`.
///
/// Found by a linear scan and independently from a Bézout solution of
/// `qx − ry = 1`; the two must agree.
pub fn find_lstar(params: &CableParams) -> Result<u32> {
    require_coprime(params)?;
    let r = params.r() as i64;
    let q = params.q() as i64;
    let m = params.m() as i64;

    let scan: Vec<i64> = (1..=m)
        .filter(|&l| (q * l + 1) % r == 0 || (q * l - 1) % r == 0)
        .collect();
    if scan.len() != 1 {
        return Err(Error::Structure(format!(
            "expected a unique l* in [1, {m}], found {scan:?}"
        )));
    }

    // q·x ≡ 1 (mod r) solves qx' − ry' = 1; r − x solves ry − qx = 1.
    let (_, x, _) = ext_gcd(q, r);
    let s = x.rem_euclid(r);
    let bezout = if s <= m { s } else { r - s };
    if bezout != scan[0] {
        return Err(Error::Consistency(format!(
            "l* by scan is {} but Bézout gives {bezout}",
            scan[0]
        )));
    }
    Ok(bezout as u32)
}

/// Closed forms for the two rows of `R_m` with a single nonzero:
/// `q/2 ∓ 1` for even `q`, `m − (q+1)/2` and `m − (q−3)/2` for odd `q`.
///
/// The values are returned as computed; for `q ≤ 2` they fall outside
/// `[1, m]`.
pub fn sentinel_rows(params: &CableParams) -> Result<(i64, i64)> {
    require_admissible(params)?;
    let q = params.q() as i64;
    let m = params.m() as i64;
    Ok(if q % 2 == 0 {
        (q / 2 - 1, q / 2 + 1)
    } else {
        (m - (q + 1) / 2, m - (q - 3) / 2)
    })
}

/// The unique `l ∈ [1, m−1]` whose column has two nonzeros in adjacent
/// rows; those rows are `m − 1` and `m`.
pub fn find_lprime(params: &CableParams) -> Result<u32> {
    let rm = build_rm(params);
    find_lprime_in(params, &rm)
}

fn find_lprime_in(params: &CableParams, rm: &RmMatrix) -> Result<u32> {
    require_admissible(params)?;
    let m = params.m();
    let candidates: Vec<u32> = (2..=m as usize)
        .filter(|&c| {
            let s = rm.as_columns().col(c).support();
            s.len() == 2 && s[1] - s[0] == 1
        })
        .map(|c| c as u32 - 1)
        .collect();
    let [lp] = candidates[..] else {
        return Err(Error::Structure(format!(
            "expected one column with adjacent nonzero rows, found l in {candidates:?}"
        )));
    };
    let support = rm.as_columns().col(lp as usize + 1).support();
    if support != [m - 1, m] {
        return Err(Error::Structure(format!(
            "column l' + 1 = {} has support {support:?}, expected [{}, {m}]",
            lp + 1,
            m - 1
        )));
    }
    // Rows m − 1 and m are hit together exactly when ql' ≡ m or m + 1 (mod r).
    let m = m as i64;
    let residue = (params.q() as i64 * lp as i64).rem_euclid(params.r() as i64);
    if residue != m && residue != m + 1 {
        return Err(Error::Consistency(format!(
            "l' = {lp} has ql' ≡ {residue} (mod r), expected m or m + 1"
        )));
    }
    Ok(lp)
}

/// Rows `d, 2d, …` (with `d = gcd(r, q) > 1`), each verified to be zero.
pub fn zero_rows(params: &CableParams) -> Result<Vec<u32>> {
    let d = params.gcd_rq();
    if d == 1 {
        return Err(Error::Precondition(format!(
            "r = {} and q = {} are coprime",
            params.r(),
            params.q()
        )));
    }
    let rm = build_rm(params);
    let rows: Vec<u32> = (d..=params.m()).step_by(d as usize).collect();
    for &row in &rows {
        if !rm.as_columns().row_support(row as usize).is_empty() {
            return Err(Error::Consistency(format!("row {row} of R_m is not zero")));
        }
    }
    Ok(rows)
}

/// One cofactor expansion: row `row` had a single live entry in column `col`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EliminationStep {
    pub row: usize,
    pub col: usize,
    pub entry: Monomial,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Elimination {
    pub det: Monomial,
    pub trace: Vec<EliminationStep>,
}

/// Row selection rule for [`eliminate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowOrder {
    /// Smallest-index live row with exactly one live nonzero.
    Greedy,
    /// Rows in the given order; each must have one live nonzero when reached.
    Fixed(Vec<u32>),
}

/// Determinant of `R_m` by repeated expansion along single-entry rows.
///
/// Each step multiplies the accumulator by `(−1)^{i+j}·entry`, where `i`, `j`
/// are the positions of the row and column inside the current minor.
pub fn eliminate(rm: &RmMatrix, order: &RowOrder) -> Result<Elimination> {
    let sys = rm.params().sys();
    let n = rm.dim();
    let cols = rm.as_columns();
    let rows: Vec<Vec<(usize, &CycElem)>> = (1..=n)
        .map(|row| {
            cols.row_support(row)
                .into_iter()
                .map(|c| (c, cols.entry(row, c).expect("in support")))
                .collect()
        })
        .collect();

    let mut live_rows = vec![true; n + 1];
    let mut live_cols = vec![true; n + 1];
    live_rows[0] = false;
    live_cols[0] = false;
    let live_in = |row: usize, live_cols: &[bool]| -> Vec<(usize, &CycElem)> {
        rows[row - 1]
            .iter()
            .filter(|(c, _)| live_cols[*c])
            .copied()
            .collect()
    };

    let mut det = Monomial::ONE;
    let mut trace = Vec::with_capacity(n);
    for step in 0..n {
        let row = match order {
            RowOrder::Greedy => {
                let mut pick = None;
                for row in (1..=n).filter(|&i| live_rows[i]) {
                    match live_in(row, &live_cols).len() {
                        0 => {
                            return Err(Error::EliminationStalled {
                                remaining: n - step,
                                zero_row: Some(row),
                            })
                        }
                        1 if pick.is_none() => pick = Some(row),
                        _ => {}
                    }
                }
                pick.ok_or(Error::EliminationStalled {
                    remaining: n - step,
                    zero_row: None,
                })?
            }
            RowOrder::Fixed(rows) => {
                let row = *rows.get(step).ok_or_else(|| {
                    Error::Structure(format!("row order ends after {step} of {n} rows"))
                })? as usize;
                if !(1..=n).contains(&row) || !live_rows[row] {
                    return Err(Error::Structure(format!(
                        "step {}: row {row} is not a live row",
                        step + 1
                    )));
                }
                row
            }
        };
        let live = live_in(row, &live_cols);
        let [(col, entry)] = live[..] else {
            return Err(Error::Structure(format!(
                "step {}: row {row} has {} live nonzeros",
                step + 1,
                live.len()
            )));
        };
        let entry = entry.as_monomial().ok_or_else(|| {
            Error::Structure(format!(
                "pivot ({row}, {col}) is not a single root of unity"
            ))
        })?;
        let pos_r = (1..row).filter(|&i| live_rows[i]).count();
        let pos_c = (1..col).filter(|&c| live_cols[c]).count();
        let sign = if (pos_r + pos_c) % 2 == 0 { 1 } else { -1 };
        det = sys.mono_mul(det, sys.monomial(sign * entry.sign(), entry.exp() as i64));
        live_rows[row] = false;
        live_cols[col] = false;
        trace.push(EliminationStep { row, col, entry });
    }
    Ok(Elimination { det, trace })
}

fn down(from: i64, to: i64) -> impl Iterator<Item = i64> {
    std::iter::successors(Some(from), |x| Some(x - 2)).take_while(move |&x| x >= to)
}

fn up(from: i64, to: i64) -> impl Iterator<Item = i64> {
    std::iter::successors(Some(from), |x| Some(x + 2)).take_while(move |&x| x <= to)
}

/// The explicit four-step row order, chosen by `q mod 4` and the parity of `m`:
/// start at `i_−`, descend by two, climb from `i_+` by two, then sweep the
/// remaining parity class downward.
///
/// Applies when `r > q + 6`, `gcd(r, q) = 1` and both sentinel rows lie in
/// `[1, m]` (so `q ≥ 3`).
pub fn explicit_schedule(params: &CableParams) -> Result<Vec<u32>> {
    let (im, ip) = sentinel_rows(params)?;
    let m = params.m() as i64;
    if !(1..=m).contains(&im) || !(1..=m).contains(&ip) {
        return Err(Error::Precondition(format!(
            "sentinel rows ({im}, {ip}) are not rows of a {m}x{m} matrix"
        )));
    }
    let even = m % 2 == 0;
    let pick = |a, b| if even { a } else { b };
    let mut rows = vec![im];
    match params.q() % 4 {
        0 => {
            rows.extend(down(im - 2, 1));
            rows.extend(up(ip, pick(m - 1, m)));
            rows.extend(down(pick(m, m - 1), 2));
        }
        1 => {
            rows.extend(down(im - 2, pick(1, 2)));
            rows.extend(up(ip, m - 1));
            rows.extend(down(m, pick(2, 1)));
        }
        2 => {
            rows.extend(down(im - 2, 2));
            rows.extend(up(ip, pick(m, m - 1)));
            // For odd m the last sweep must start at m itself, otherwise row m
            // is never expanded.
            rows.extend(down(pick(m - 1, m), 1));
        }
        _ => {
            rows.extend(down(im - 2, pick(2, 1)));
            rows.extend(up(ip, m));
            rows.extend(down(m - 1, pick(1, 2)));
        }
    }
    Ok(rows.into_iter().map(|x| x as u32).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ScheduleCheck {
    /// Replaying the explicit order succeeded with the same determinant.
    Validated {
        rows: Vec<u32>,
        /// Whether the last expansion is the single entry of column `l* + 1`.
        ends_at_lstar_column: bool,
    },
    NotApplicable {
        reason: String,
    },
    Violated {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CofactorDet {
    pub det: Monomial,
    pub trace: Vec<EliminationStep>,
    pub schedule: ScheduleCheck,
}

/// `det R_m` as a signed monomial, for `gcd(r, q) = 1` and `r > q + 6`.
pub fn cofactor_det(params: &CableParams) -> Result<CofactorDet> {
    require_admissible(params)?;
    let rm = build_rm(params);
    let greedy = eliminate(&rm, &RowOrder::Greedy)?;
    let schedule = match explicit_schedule(params) {
        Err(e) => ScheduleCheck::NotApplicable {
            reason: e.to_string(),
        },
        Ok(rows) => match find_lstar(params) {
            Ok(ls) if ls == params.m() => ScheduleCheck::NotApplicable {
                reason: "l* = m leaves no single-entry column".into(),
            },
            Err(e) => ScheduleCheck::NotApplicable {
                reason: e.to_string(),
            },
            Ok(ls) => match eliminate(&rm, &RowOrder::Fixed(rows.clone())) {
                Ok(run) if run.det == greedy.det => ScheduleCheck::Validated {
                    ends_at_lstar_column: run.trace.last().map(|s| s.col) == Some(ls as usize + 1),
                    rows,
                },
                Ok(run) => {
                    return Err(Error::Consistency(format!(
                        "explicit order gives det {} but greedy gives {}",
                        run.det, greedy.det
                    )))
                }
                Err(e) => ScheduleCheck::Violated {
                    reason: e.to_string(),
                },
            },
        },
    };
    Ok(CofactorDet {
        det: greedy.det,
        trace: greedy.trace,
        schedule,
    })
}

/// A coincidence of two reduced `f̃^±` components that contradicts one of
/// the pairing rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairViolation {
    pub index: i64,
    pub first: Classification,
    pub second: Classification,
    pub rule: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairingReport {
    pub q: u32,
    pub r: u32,
    /// Coinciding component pairs examined.
    pub coincidences: usize,
    /// Equal-sign coincidences outside `Ce↔Do`, `De↔Co`, or opposite-sign
    /// coincidences across categories.
    pub category_violations: Vec<PairViolation>,
    /// Coincidences of type `g^± = g^±`, `g^± = h^∓` or `h^± = h^±`.
    pub form_violations: Vec<PairViolation>,
}

/// Exhaustive check of the pairing rules over all `1 ≤ l₁ < l₂ ≤ m−1` and
/// sign choices whose reduced components land on the same basis vector.
pub fn pairing_check(params: &CableParams) -> Result<PairingReport> {
    require_coprime(params)?;
    let m = params.m() as i64;
    let mut comps = Vec::new();
    for l in 1..m {
        for pm in [PlusMinus::Plus, PlusMinus::Minus] {
            let c = classify(l, pm, params)?;
            if c.index != 0 {
                comps.push(c);
            }
        }
    }
    let mut report = PairingReport {
        q: params.q(),
        r: params.r(),
        coincidences: 0,
        category_violations: Vec::new(),
        form_violations: Vec::new(),
    };
    for (n, a) in comps.iter().enumerate() {
        for b in &comps[n + 1..] {
            if a.l == b.l || a.index != b.index {
                continue;
            }
            report.coincidences += 1;
            let same_sign = a.pm == b.pm;
            let cats = (a.category, b.category);
            let category_ok = if same_sign {
                use Category::*;
                matches!(cats, (Ce, Do) | (Do, Ce) | (De, Co) | (Co, De))
            } else {
                a.category == b.category
            };
            if !category_ok {
                report.category_violations.push(PairViolation {
                    index: a.index,
                    first: *a,
                    second: *b,
                    rule: if same_sign {
                        "equal-sign pair within or across wrong categories"
                    } else {
                        "opposite-sign pair across categories"
                    },
                });
            }
            let same_form = a.form == b.form;
            if same_sign == same_form {
                report.form_violations.push(PairViolation {
                    index: a.index,
                    first: *a,
                    second: *b,
                    rule: match (same_sign, a.form) {
                        (true, IndexForm::G) => "g = g with equal signs",
                        (true, IndexForm::H) => "h = h with equal signs",
                        _ => "g = h with opposite signs",
                    },
                });
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClauseStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClauseResult {
    pub clause: &'static str,
    pub status: ClauseStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Clause names in report order. The first group needs only
/// `gcd(r, q) = 1`; the second also needs `r > q + 6`.
pub const BASIC_CLAUSES: [&str; 7] = [
    "columns_at_most_two_nonzeros",
    "rows_at_most_two_nonzeros",
    "first_column_is_e1",
    "column_rows_within_two",
    "unique_lstar_single_entry_column",
    "entries_are_roots_of_unity",
    "two_nonzeros_except_first_and_lstar_columns",
];

pub const LARGE_LEVEL_CLAUSES: [&str; 7] = [
    "sentinel_rows_single",
    "sentinel_columns_distinct",
    "sentinel_column_coincidences",
    "other_rows_two_nonzeros",
    "unique_adjacent_column",
    "lstar_below_m",
    "nonzero_count_2m_minus_2",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureReport {
    pub p: i64,
    pub q: u32,
    pub r: u32,
    pub m: u32,
    pub gcd_rq: u32,
    pub l_star: Option<u32>,
    pub l_prime: Option<u32>,
    pub i_minus: Option<i64>,
    pub i_plus: Option<i64>,
    /// Rows with exactly one nonzero, found by scanning.
    pub single_entry_rows: Vec<usize>,
    pub l_minus_col: Option<usize>,
    pub l_plus_col: Option<usize>,
    pub row_counts: Vec<usize>,
    pub col_counts: Vec<usize>,
    pub nnz: usize,
    pub zero_rows: Vec<u32>,
    pub clause_results: Vec<ClauseResult>,
    pub det_monomial: Option<Monomial>,
    pub det_error: Option<String>,
    pub schedule: Option<ScheduleCheck>,
    pub schedule_trace: Vec<EliminationStep>,
    pub flags: Vec<String>,
}

impl StructureReport {
    pub fn clause(&self, name: &str) -> Option<&ClauseResult> {
        self.clause_results.iter().find(|c| c.clause == name)
    }

    pub fn failed_clauses(&self) -> Vec<&'static str> {
        self.clause_results
            .iter()
            .filter(|c| c.status == ClauseStatus::Fail)
            .map(|c| c.clause)
            .collect()
    }

    /// Every evaluated clause passed and none was skipped.
    pub fn all_pass(&self) -> bool {
        self.clause_results
            .iter()
            .all(|c| c.status == ClauseStatus::Pass)
    }
}

struct Clauses(Vec<ClauseResult>);

impl Clauses {
    fn record(&mut self, clause: &'static str, ok: bool, detail: impl FnOnce() -> String) {
        self.0.push(ClauseResult {
            clause,
            status: if ok {
                ClauseStatus::Pass
            } else {
                ClauseStatus::Fail
            },
            detail: (!ok).then(detail),
        });
    }

    fn skip(&mut self, clause: &'static str, why: &str) {
        self.0.push(ClauseResult {
            clause,
            status: ClauseStatus::Skipped,
            detail: Some(why.to_string()),
        });
    }
}

/// Evaluates every sparsity clause on the built `R_m`. Failures are
/// recorded in the report, never returned as errors.
pub fn verify_structure(params: &CableParams) -> StructureReport {
    let rm = build_rm(params);
    let cols = rm.as_columns();
    let sys = params.sys();
    let m = params.m() as usize;
    let row_counts = cols.row_counts();
    let col_counts = cols.col_counts();
    let single_entry_rows: Vec<usize> = (1..=m).filter(|&i| row_counts[i - 1] == 1).collect();
    let mut flags = Vec::new();
    let mut cl = Clauses(Vec::new());

    let zero_rows = if params.gcd_rq() > 1 {
        let rows = zero_rows(params).unwrap_or_default();
        flags.push(format!(
            "gcd(r, q) = {}: rows {rows:?} vanish and R_m is singular",
            params.gcd_rq()
        ));
        rows
    } else {
        Vec::new()
    };

    cl.record(
        "columns_at_most_two_nonzeros",
        col_counts.iter().all(|&c| c <= 2),
        || format!("column counts {col_counts:?}"),
    );
    cl.record(
        "rows_at_most_two_nonzeros",
        row_counts.iter().all(|&c| c <= 2),
        || format!("row counts {row_counts:?}"),
    );
    let first_ok = cols.col(1).support() == [1] && rm.monomial(1, 1) == Some(Monomial::ONE);
    cl.record("first_column_is_e1", first_ok, || {
        "column 1 is not [1, 0, …, 0]".into()
    });
    let gaps_ok = cols.columns().iter().all(|c| {
        let s = c.support();
        s.len() != 2 || s[1] - s[0] <= 2
    });
    cl.record("column_rows_within_two", gaps_ok, || {
        "a two-entry column spans more than two rows".into()
    });

    let l_star = find_lstar(params);
    let lstar_ok = match &l_star {
        Ok(ls) if (*ls as usize) < m => {
            let c = *ls as usize + 1;
            cols.col(c).support() == [2] && rm.monomial(2, c).is_some()
        }
        Ok(_) => true,
        Err(_) => false,
    };
    cl.record(
        "unique_lstar_single_entry_column",
        lstar_ok,
        || match &l_star {
            Ok(ls) => format!(
                "column l* + 1 = {} is {:?}",
                ls + 1,
                cols.col(*ls as usize + 1).support()
            ),
            Err(e) => e.to_string(),
        },
    );
    let l_star = l_star.ok();

    let mut bad_entry = None;
    for (c, col) in cols.columns().iter().enumerate() {
        for (row, x) in col.entries() {
            let unit = x
                .as_monomial()
                .map(|mo| (sys.eval_mono(mo).norm() - 1.0).abs() < 1e-12)
                .unwrap_or(false);
            if !unit && bad_entry.is_none() {
                bad_entry = Some((row, c + 1));
            }
        }
    }
    cl.record("entries_are_roots_of_unity", bad_entry.is_none(), || {
        format!("entry {bad_entry:?} is not a root of unity")
    });
    let two_ok = match l_star {
        Some(ls) => (1..=m).all(|c| {
            let expect = if c == 1 || (ls as usize) < m && c == ls as usize + 1 {
                1
            } else {
                2
            };
            col_counts[c - 1] == expect
        }),
        None => false,
    };
    cl.record(
        "two_nonzeros_except_first_and_lstar_columns",
        two_ok,
        || format!("column counts {col_counts:?} with l* = {l_star:?}"),
    );

    let mut report = StructureReport {
        p: params.p(),
        q: params.q(),
        r: params.r(),
        m: params.m(),
        gcd_rq: params.gcd_rq(),
        l_star,
        l_prime: None,
        i_minus: None,
        i_plus: None,
        single_entry_rows: single_entry_rows.clone(),
        l_minus_col: None,
        l_plus_col: None,
        row_counts: row_counts.clone(),
        col_counts,
        nnz: cols.nnz(),
        zero_rows,
        clause_results: Vec::new(),
        det_monomial: None,
        det_error: None,
        schedule: None,
        schedule_trace: Vec::new(),
        flags,
    };

    if !params.is_admissible() {
        let why = if params.gcd_rq() > 1 {
            "gcd(r, q) > 1"
        } else {
            "r <= q + 6"
        };
        for clause in LARGE_LEVEL_CLAUSES {
            cl.skip(clause, why);
        }
        if params.gcd_rq() == 1 {
            match eliminate(&rm, &RowOrder::Greedy) {
                Ok(e) => {
                    report.det_monomial = Some(e.det);
                    report.schedule_trace = e.trace;
                }
                Err(e) => report.det_error = Some(e.to_string()),
            }
        } else {
            report.det_error = Some(format!("singular: rows {:?} vanish", report.zero_rows));
        }
        report.clause_results = cl.0;
        return report;
    }

    let (im, ip) = sentinel_rows(params).expect("admissible");
    report.i_minus = Some(im);
    report.i_plus = Some(ip);
    let in_range = |i: i64| (1..=m as i64).contains(&i);
    let single_col = |i: i64| -> Option<usize> {
        if in_range(i) && row_counts[i as usize - 1] == 1 {
            cols.row_support(i as usize).first().copied()
        } else {
            None
        }
    };
    report.l_minus_col = single_col(im);
    report.l_plus_col = single_col(ip);
    if single_entry_rows != [im as usize, ip as usize] || !in_range(im) || !in_range(ip) {
        report.flags.push(format!(
            "single-entry rows found by scan {single_entry_rows:?} disagree with closed forms ({im}, {ip})"
        ));
    }
    cl.record(
        "sentinel_rows_single",
        report.l_minus_col.is_some() && report.l_plus_col.is_some(),
        || format!("rows ({im}, {ip}) do not both have exactly one nonzero (single rows: {single_entry_rows:?})"),
    );
    let (lm, lp) = (report.l_minus_col, report.l_plus_col);
    cl.record(
        "sentinel_columns_distinct",
        lm.is_some() && lm != lp,
        || format!("sentinel columns {lm:?}, {lp:?}"),
    );

    let q = params.q();
    let lstar_col = l_star.map(|ls| ls as usize + 1);
    let coincide_ok = match (lm, lp) {
        (Some(a), Some(b)) if q.is_multiple_of(2) => {
            let iff_first = (a == 1) == (q == 4);
            let iff_lstar = (Some(a) == lstar_col) == (q == 6);
            let apart = q < 8 || (Some(a) != lstar_col && Some(b) != lstar_col);
            iff_first && iff_lstar && apart
        }
        (Some(a), Some(b)) => ![Some(a), Some(b)].contains(&lstar_col) && a != 1 && b != 1,
        _ => false,
    };
    cl.record("sentinel_column_coincidences", coincide_ok, || {
        format!("sentinel columns {lm:?}, {lp:?}; l* + 1 = {lstar_col:?}; q = {q}")
    });
    let others_ok = (1..=m)
        .filter(|&i| i as i64 != im && i as i64 != ip)
        .all(|i| row_counts[i - 1] == 2);
    cl.record("other_rows_two_nonzeros", others_ok, || {
        format!("row counts {row_counts:?} outside rows ({im}, {ip})")
    });
    let l_prime = find_lprime_in(params, &rm);
    cl.record("unique_adjacent_column", l_prime.is_ok(), || {
        l_prime.clone().unwrap_err().to_string()
    });
    report.l_prime = l_prime.ok();
    cl.record(
        "lstar_below_m",
        l_star.is_some_and(|ls| ls >= 1 && (ls as usize) < m),
        || format!("l* = {l_star:?}, m = {m}"),
    );
    cl.record("nonzero_count_2m_minus_2", report.nnz == 2 * m - 2, || {
        format!("{} nonzeros, expected {}", report.nnz, 2 * m - 2)
    });

    match cofactor_det(params) {
        Ok(d) => {
            report.det_monomial = Some(d.det);
            report.schedule_trace = d.trace;
            if let ScheduleCheck::Violated { reason } = &d.schedule {
                report
                    .flags
                    .push(format!("explicit elimination order failed: {reason}"));
            }
            report.schedule = Some(d.schedule);
        }
        Err(e) => report.det_error = Some(e.to_string()),
    }
    report.clause_results = cl.0;
    report
}

/// Nonsingularity verdict for a level `r ≤ q + 6`, where the sparsity
/// theory gives no guarantee.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallLevelVerdict {
    pub r: u32,
    pub m: u32,
    pub gcd_rq: u32,
    pub elimination_completed: bool,
    pub det_monomial: Option<Monomial>,
    pub numeric_det_modulus: f64,
    pub nonsingular: bool,
}

/// Probes every odd `3 ≤ r ≤ q + 6` coprime to `q`.
pub fn explore_small_levels(p: i64, q: i64) -> Result<Vec<SmallLevelVerdict>> {
    let mut out = Vec::new();
    for r in (3..=q + 6).filter(|r| r % 2 == 1) {
        let params = CableParams::new(p, q, r)?;
        if params.gcd_rq() != 1 {
            continue;
        }
        let rm = build_rm(&params);
        let elim = eliminate(&rm, &RowOrder::Greedy).ok();
        let modulus = crate::analysis::numeric_det(&rm.eval()).norm();
        out.push(SmallLevelVerdict {
            r: params.r(),
            m: params.m(),
            gcd_rq: 1,
            elimination_completed: elim.is_some(),
            det_monomial: elim.map(|e| e.det),
            numeric_det_modulus: modulus,
            nonsingular: modulus > 1e-9,
        });
    }
    Ok(out)
}

/// Set of rows with exactly one nonzero.
pub fn single_entry_rows(rm: &RmMatrix) -> BTreeSet<usize> {
    rm.as_columns()
        .row_counts()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == 1)
        .map(|(i, _)| i + 1)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(p: i64, q: i64, r: i64) -> CableParams {
        CableParams::new(p, q, r).unwrap()
    }

    #[test]
    fn classify_examples() {
        let pr = params(2, 3, 13);
        let c = classify(1, PlusMinus::Plus, &pr).unwrap();
        assert_eq!((c.k, c.j, c.category, c.index), (0, 4, Category::Ce, 4));
        let c = classify(4, PlusMinus::Plus, &pr).unwrap();
        assert_eq!((c.k, c.j, c.category, c.index), (1, 0, Category::Co, 0));
        assert!(c.reduced.is_zero());
        let c = classify(5, PlusMinus::Plus, &pr).unwrap();
        assert_eq!((c.k, c.j, c.category), (1, 3, Category::Co));
        let c = classify(3, PlusMinus::Plus, &pr).unwrap();
        assert_eq!(
            (c.j, c.category, c.form, c.index),
            (10, Category::De, IndexForm::H, 3)
        );
        assert!(classify(0, PlusMinus::Plus, &pr).is_err());
        assert!(classify(6, PlusMinus::Plus, &pr).is_err());
    }

    #[test]
    fn lstar_examples() {
        assert_eq!(find_lstar(&params(2, 3, 13)).unwrap(), 4);
        assert_eq!(find_lstar(&params(1, 2, 9)).unwrap(), 4);
        // q = 1: q·1 − 1 = 0 is a multiple of r.
        for r in [3, 9, 21, 101] {
            assert_eq!(find_lstar(&params(3, 1, r)).unwrap(), 1);
        }
        assert!(matches!(
            find_lstar(&params(2, 3, 9)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn lstar_is_m_for_q_two() {
        for r in [9, 11, 45, 201] {
            let pr = params(3, 2, r);
            assert_eq!(find_lstar(&pr).unwrap(), pr.m());
        }
    }

    #[test]
    fn sentinel_examples() {
        assert_eq!(sentinel_rows(&params(1, 4, 11)).unwrap(), (1, 3));
        assert_eq!(sentinel_rows(&params(1, 6, 13)).unwrap(), (2, 4));
        assert_eq!(sentinel_rows(&params(2, 3, 13)).unwrap(), (4, 6));
        assert!(sentinel_rows(&params(1, 4, 9)).is_err());
        assert!(sentinel_rows(&params(2, 3, 15)).is_err());
    }

    #[test]
    fn lprime_examples() {
        let pr = params(2, 3, 13);
        let lp = find_lprime(&pr).unwrap();
        assert_eq!(lp, 2);
        let rm = build_rm(&pr);
        assert_eq!(rm.as_columns().col(lp as usize + 1).support(), vec![5, 6]);
        let e = find_lprime(&params(1, 2, 11));
        assert!(e.is_ok(), "{e:?}");
        assert!(matches!(
            find_lprime(&params(1, 4, 9)),
            Err(Error::Precondition(_))
        ));
        // q = 1 has no column with adjacent rows.
        assert!(matches!(
            find_lprime(&params(1, 1, 11)),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn zero_row_examples() {
        // m = 4, so 3 is the only multiple of 3 among the rows.
        assert_eq!(zero_rows(&params(2, 3, 9)).unwrap(), vec![3]);
        assert_eq!(zero_rows(&params(2, 3, 15)).unwrap(), vec![3, 6]);
        assert_eq!(zero_rows(&params(2, 5, 15)).unwrap(), vec![5]);
        assert!(matches!(
            zero_rows(&params(3, 2, 11)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn verify_passes_on_regular_case() {
        let rep = verify_structure(&params(2, 3, 13));
        assert!(rep.all_pass(), "{:?}", rep.failed_clauses());
        assert_eq!(rep.l_star, Some(4));
        assert_eq!(rep.l_prime, Some(2));
        assert_eq!((rep.i_minus, rep.i_plus), (Some(4), Some(6)));
        assert_eq!(rep.nnz, 10);
        assert!(matches!(
            rep.schedule,
            Some(ScheduleCheck::Validated { .. })
        ));
        assert!(rep.det_monomial.is_some());
    }

    #[test]
    fn verify_q_two_flags_closed_form_rows() {
        let rep = verify_structure(&params(3, 2, 11));
        assert_eq!(rep.l_star, Some(5));
        assert_eq!(rep.single_entry_rows, vec![2]);
        assert_eq!(rep.nnz, 9);
        assert!(!rep.flags.is_empty());
        for clause in BASIC_CLAUSES {
            assert_eq!(
                rep.clause(clause).unwrap().status,
                ClauseStatus::Pass,
                "{clause}"
            );
        }
        assert_eq!(
            rep.clause("lstar_below_m").unwrap().status,
            ClauseStatus::Fail
        );
        assert_eq!(
            rep.clause("sentinel_rows_single").unwrap().status,
            ClauseStatus::Fail
        );
        // The determinant is still a single root of unity.
        assert!(rep.det_monomial.is_some());
        assert!(matches!(
            rep.schedule,
            Some(ScheduleCheck::NotApplicable { .. })
        ));
    }

    #[test]
    fn verify_records_zero_rows() {
        let rep = verify_structure(&params(2, 3, 9));
        assert_eq!(rep.zero_rows, vec![3]);
        assert!(rep.det_monomial.is_none());
        assert_eq!(
            rep.clause("lstar_below_m").unwrap().status,
            ClauseStatus::Skipped
        );
        assert_eq!(
            rep.clause("unique_lstar_single_entry_column")
                .unwrap()
                .status,
            ClauseStatus::Fail
        );
    }

    #[test]
    fn cofactor_det_examples() {
        let pr = params(2, 3, 13);
        let d = cofactor_det(&pr).unwrap();
        let z = crate::analysis::numeric_det(&build_rm(&pr).eval());
        let v = pr.sys().eval_mono(d.det);
        assert!((v - z).norm() < 1e-9);
        assert!((z.norm() - 1.0).abs() < 1e-9);

        let d = cofactor_det(&params(3, 2, 11)).unwrap();
        assert_eq!(d.trace.len(), 5);

        assert!(matches!(
            cofactor_det(&params(2, 3, 9)),
            Err(Error::Precondition(_))
        ));
        let stalled = eliminate(&build_rm(&params(2, 3, 9)), &RowOrder::Greedy);
        assert!(matches!(stalled, Err(Error::EliminationStalled { .. })));
    }

    #[test]
    fn schedule_matches_single_row_order() {
        for q in 3..=8 {
            for r in (q + 7..=101).filter(|r| r % 2 == 1) {
                let pr = params(1, q, r);
                if pr.gcd_rq() != 1 {
                    continue;
                }
                let rows = explicit_schedule(&pr).unwrap();
                let mut sorted = rows.clone();
                sorted.sort();
                assert_eq!(sorted, (1..=pr.m()).collect::<Vec<_>>(), "q={q} r={r}");
                let run = eliminate(&build_rm(&pr), &RowOrder::Fixed(rows));
                assert!(run.is_ok(), "q={q} r={r}: {run:?}");
            }
        }
    }

    #[test]
    fn schedule_q_six_odd_m_ends_at_row_m_sweep() {
        // m = 9: the last sweep is 9, 7, …, 1.
        let rows = explicit_schedule(&params(1, 6, 19)).unwrap();
        assert_eq!(rows, vec![2, 4, 6, 8, 9, 7, 5, 3, 1]);
    }

    #[test]
    fn pairing_forms_hold_and_example_category_pair() {
        let rep = pairing_check(&params(1, 3, 11)).unwrap();
        assert!(rep.form_violations.is_empty());
        // f_1^+ = e_4 (Ce) and f_2^+ = e_7 → e_4 (De) coincide with equal signs.
        assert!(rep.category_violations.iter().any(|v| {
            v.index == 4
                && v.first.l == 1
                && v.second.l == 2
                && v.first.category == Category::Ce
                && v.second.category == Category::De
        }));
    }

    #[test]
    fn small_level_probe_runs() {
        let v = explore_small_levels(2, 7).unwrap();
        assert!(v.iter().all(|x| x.r <= 13));
        assert!(v.iter().all(|x| !x.elimination_completed || x.nonsingular));
    }

    fn admissible() -> impl Strategy<Value = CableParams> {
        // 2·((q+7)/2) + 1 is the smallest odd level above q + 6.
        (-6i64..=6, 1i64..=8, 0i64..=80)
            .prop_map(|(p, q, k)| (p, q, 2 * ((q + 7) / 2 + k) + 1))
            .prop_filter("admissible", |&(p, q, r)| {
                crate::cabling::gcd(p, q) == 1 && crate::cabling::gcd(q, r) == 1
            })
            .prop_map(|(p, q, r)| params(p, q, r))
    }

    proptest! {
        #[test]
        fn determinant_is_a_root_of_unity(pr in admissible()) {
            let d = cofactor_det(&pr).unwrap();
            let z = crate::analysis::numeric_det(&build_rm(&pr).eval());
            prop_assert!((pr.sys().eval_mono(d.det) - z).norm() < 1e-9);
            prop_assert!((z.norm() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn large_q_structure(pr in admissible().prop_filter("q >= 3", |pr| pr.q() >= 3)) {
            let rep = verify_structure(&pr);
            prop_assert!(rep.all_pass(), "{:?}", rep.failed_clauses());
            prop_assert_eq!(rep.nnz, 2 * pr.m() as usize - 2);
            prop_assert!(rep.l_star.unwrap() < pr.m());
            let validated = matches!(rep.schedule, Some(ScheduleCheck::Validated { .. }));
            prop_assert!(validated);
        }

        #[test]
        fn form_exclusions_hold(pr in admissible()) {
            prop_assert!(pairing_check(&pr).unwrap().form_violations.is_empty());
        }
    }
}
