//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Two criteria cannot hold as stated (see `KNOWN_GAPS`). They are still run
//! in full and print FAIL; the process only exits nonzero when a criterion
//! fails in a way other than the documented one.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::Instant;

use rtcable::analysis::{
    colored_tv, full_inverse, norm_growth_sweep, numeric_det, odd_range, tv_cable_of_solid_torus,
    tv_growth_sweep, RecordStatus, SweepOptions,
};
use rtcable::cabling::{
    build_rm, factor_matrices, gcd, inverse_factors, rt_matrix_factored, rt_matrix_morton,
    IntMatrix,
};
use rtcable::cli::{parse, run, Parsed};
use rtcable::structure::{cofactor_det, pairing_check, verify_structure, zero_rows};
use rtcable::CableParams;

const P_VALUES: [i64; 7] = [1, -1, 2, -2, 3, -3, 5];
const Q_MAX: i64 = 8;
const R_MAX: i64 = 201;
const R_MAX_LONG: i64 = 401;

const DET_TOL: f64 = 1e-9;
const RUNTIME_LIMIT_SECS: f64 = 300.0;
const INVERSE_TOL: f64 = 1e-8;
const U_INV_MAX_M: u32 = 200;
const NORM_PAIRS: [(i64, i64); 4] = [(3, 2), (2, 3), (3, 4), (2, 5)];
const TV_TOL: f64 = 1e-9;
const TV_COLORS: [u32; 2] = [2, 3];
const TV_TREND_TOL: f64 = 0.05;

/// Criteria expected to fail, with the shape of the expected failure.
const KNOWN_GAPS: [(u32, &str); 2] = [
    (
        3,
        "closed-form sentinel rows leave [1, m] for q <= 2; every tuple with q >= 3 passes",
    ),
    (
        7,
        "category pairing rule is violated; the g/h form exclusions have zero violations",
    ),
];

type Criterion = (u32, &'static str, fn() -> Verdict);

struct Verdict {
    passed: bool,
    detail: String,
    /// For a known gap: whether the failure has exactly the documented shape.
    gap_shape_matches: Option<bool>,
}

impl Verdict {
    fn plain(passed: bool, detail: String) -> Self {
        Verdict {
            passed,
            detail,
            gap_shape_matches: None,
        }
    }
}

fn pq_pairs() -> Vec<(i64, i64)> {
    (1..=Q_MAX)
        .flat_map(|q| P_VALUES.iter().map(move |&p| (p, q)))
        .filter(|&(p, q)| gcd(p, q) == 1)
        .collect()
}

fn tuples(r_max: i64) -> Vec<CableParams> {
    pq_pairs()
        .into_iter()
        .flat_map(|(p, q)| {
            odd_range(q + 7, r_max)
                .into_iter()
                .map(move |r| CableParams::new(p, q, r).unwrap())
        })
        .collect()
}

fn label(pr: &CableParams) -> String {
    format!("({},{},{})", pr.p(), pr.q(), pr.r())
}

fn invertibility_dichotomy() -> Verdict {
    let start = Instant::now();
    let (mut regular, mut singular) = (0, 0);
    let mut bad = Vec::new();
    for pr in tuples(R_MAX) {
        let rm = build_rm(&pr);
        let det = numeric_det(&rm.eval());
        let d = pr.gcd_rq();
        if d == 1 {
            regular += 1;
            let ok = (det.norm() - 1.0).abs() <= DET_TOL
                && cofactor_det(&pr)
                    .map(|c| (pr.sys().eval_mono(c.det) - det).norm() <= DET_TOL)
                    .unwrap_or(false);
            if !ok {
                bad.push(label(&pr));
            }
        } else {
            singular += 1;
            let expected: Vec<u32> = (1..=pr.m()).filter(|i| i % d == 0).collect();
            let rows_zero = expected
                .iter()
                .all(|&i| rm.as_columns().row_support(i as usize).is_empty());
            let ok = rows_zero && zero_rows(&pr).ok() == Some(expected) && det.norm() < DET_TOL;
            if !ok {
                bad.push(label(&pr));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict::plain(
        bad.is_empty() && secs < RUNTIME_LIMIT_SECS,
        format!(
            "{regular} coprime tuples with |det| = 1 and matching cofactor value, \
             {singular} tuples with vanishing rows and |det| < {DET_TOL:e}, {secs:.1}s \
             (limit {RUNTIME_LIMIT_SECS}s), failures {bad:?}"
        ),
    )
}

fn assembly_equality() -> Verdict {
    let mut bad = Vec::new();
    let all = tuples(R_MAX);
    for pr in &all {
        if rt_matrix_morton(pr) != rt_matrix_factored(pr) {
            bad.push(label(pr));
        }
    }
    Verdict::plain(
        bad.is_empty(),
        format!(
            "{} tuples compared exactly in the group ring, mismatches {bad:?}",
            all.len()
        ),
    )
}

fn structure_clauses() -> Verdict {
    let mut failing: BTreeMap<u32, (usize, BTreeMap<&'static str, usize>)> = BTreeMap::new();
    let mut total = 0;
    for pr in tuples(R_MAX).into_iter().filter(|pr| pr.gcd_rq() == 1) {
        total += 1;
        let rep = verify_structure(&pr);
        if !rep.all_pass() {
            let entry = failing.entry(pr.q()).or_default();
            entry.0 += 1;
            for c in rep.failed_clauses() {
                *entry.1.entry(c).or_default() += 1;
            }
        }
    }
    let failed: usize = failing.values().map(|f| f.0).sum();
    let high_q_failures: usize = failing.range(3..).map(|(_, f)| f.0).sum();
    let by_q: Vec<String> = failing
        .iter()
        .map(|(q, (n, clauses))| {
            format!("q={q}: {n} tuples {:?}", clauses.keys().collect::<Vec<_>>())
        })
        .collect();
    Verdict {
        passed: failed == 0,
        detail: format!(
            "{} of {total} coprime tuples pass every clause; q >= 3 failures: {high_q_failures}; {}",
            total - failed,
            if by_q.is_empty() { "no failures".to_string() } else { by_q.join("; ") }
        ),
        gap_shape_matches: Some(high_q_failures == 0 && failing.keys().all(|&q| q <= 2)),
    }
}

fn inverse_residual() -> Verdict {
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    let mut count = 0;
    for pr in tuples(R_MAX_LONG).into_iter().filter(|pr| pr.gcd_rq() == 1) {
        count += 1;
        match full_inverse(&pr) {
            Ok(inv) if inv.residual < INVERSE_TOL => worst = worst.max(inv.residual),
            _ => bad.push(label(&pr)),
        }
    }
    let mut u_bad = Vec::new();
    for m in 1..=U_INV_MAX_M {
        let pr = CableParams::new(1, 1, 2 * m as i64 + 1).unwrap();
        let prod = factor_matrices(&pr)
            .u
            .to_int()
            .mul(&inverse_factors(&pr).u_inv);
        if prod != IntMatrix::identity(m as usize) {
            u_bad.push(m);
        }
    }
    Verdict::plain(
        bad.is_empty() && u_bad.is_empty(),
        format!(
            "{count} admissible tuples up to r = {R_MAX_LONG}, max residual {worst:.2e} \
             (tol {INVERSE_TOL:e}), failures {bad:?}; U*U_inv = I for m <= {U_INV_MAX_M}, failures {u_bad:?}"
        ),
    )
}

fn norm_growth() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, q) in NORM_PAIRS {
        let start = Instant::now();
        let sweep = match norm_growth_sweep(
            p,
            q,
            &odd_range(q + 7, R_MAX_LONG),
            &SweepOptions::default(),
        ) {
            Ok(s) => s,
            Err(e) => {
                ok = false;
                parts.push(format!("({p},{q}): {e}"));
                continue;
            }
        };
        let failed: Vec<i64> = sweep
            .records
            .iter()
            .filter(|x| x.status == RecordStatus::Failed)
            .map(|x| x.r)
            .collect();
        let fit_ok = sweep
            .fit
            .is_some_and(|f| f.slope.is_finite() && f.residual.is_finite());
        let blow = sweep.blow_up.map(|b| b.flagged).unwrap_or(true);
        ok &= failed.is_empty() && fit_ok && !blow;
        let fit = sweep.fit.map_or("no fit".into(), |f| {
            format!(
                "slope {:.4} residual {:.2e} over r in {:?}",
                f.slope, f.residual, f.r_range
            )
        });
        parts.push(format!(
            "({p},{q}): {fit}, blow-up flag {blow}, failed r {failed:?}, {:.1}s",
            start.elapsed().as_secs_f64()
        ));
    }
    Verdict::plain(ok, parts.join("; "))
}

fn tv_plumbing() -> Verdict {
    let all = tuples(R_MAX_LONG);
    let bad: Vec<String> = all
        .iter()
        .filter(|pr| (tv_cable_of_solid_torus(pr) - 1.0).abs() > TV_TOL)
        .map(label)
        .collect();
    let mut max_slope = f64::NEG_INFINITY;
    let mut trend_bad = Vec::new();
    for (p, q) in pq_pairs() {
        for color in TV_COLORS {
            match tv_growth_sweep(p, q, &odd_range(q + 7, R_MAX_LONG), color) {
                Ok(s) => match s.fit {
                    Some(f) => {
                        max_slope = max_slope.max(f.slope);
                        if f.slope > TV_TREND_TOL {
                            trend_bad.push(format!("({p},{q}) e_{color}: {:.3e}", f.slope));
                        }
                    }
                    None => trend_bad.push(format!("({p},{q}) e_{color}: no fit")),
                },
                Err(e) => trend_bad.push(format!("({p},{q}) e_{color}: {e}")),
            }
        }
    }
    // Oracle for one colored value: two unit entries.
    let two = colored_tv(&CableParams::new(2, 3, 13).unwrap(), 2).unwrap();
    let spot = (two - 2.0).abs() <= TV_TOL;
    Verdict::plain(
        bad.is_empty() && trend_bad.is_empty() && spot,
        format!(
            "solid-torus value 1 within {TV_TOL:e} on {} tuples (failures {bad:?}); \
             colored trend slopes for e_2, e_3 up to r = {R_MAX_LONG}: max {max_slope:.3e} \
             (tol {TV_TREND_TOL}), violations {trend_bad:?}",
            all.len()
        ),
    )
}

fn pairing_exclusions() -> Verdict {
    let (mut cat, mut form, mut pairs, mut levels) = (0usize, 0usize, 0usize, 0usize);
    let mut example = None;
    for q in 1..=Q_MAX {
        for r in odd_range(q + 7, R_MAX) {
            let pr = CableParams::new(1, q, r).unwrap();
            if pr.gcd_rq() != 1 {
                continue;
            }
            levels += 1;
            let rep = pairing_check(&pr).unwrap();
            pairs += rep.coincidences;
            cat += rep.category_violations.len();
            form += rep.form_violations.len();
            if example.is_none() {
                example = rep.category_violations.first().map(|v| {
                    format!(
                        "q={q} r={r}: l={} {:?} and l={} {:?} both reach e_{}",
                        v.first.l, v.first.category, v.second.l, v.second.category, v.index
                    )
                });
            }
        }
    }
    Verdict {
        passed: cat == 0 && form == 0,
        detail: format!(
            "{levels} coprime (q, r) levels, {pairs} coinciding pairs: category-rule violations {cat}, \
             g/h form violations {form}; first category violation: {}",
            example.unwrap_or_else(|| "none".into())
        ),
        gap_shape_matches: Some(form == 0 && cat > 0),
    }
}

const DETERMINISM_COMMANDS: [&[&str]; 9] = [
    &[
        "matrix", "--kind", "rm", "--p", "2", "--q", "3", "--r", "13",
    ],
    &[
        "matrix", "--kind", "rt", "--p", "-3", "--q", "4", "--r", "17",
    ],
    &["verify", "--p", "2", "--q", "3", "--r", "13"],
    &["det", "--p", "2", "--q", "3", "--r", "9"],
    &["det", "--p", "5", "--q", "7", "--r", "31"],
    &["sweep-norm", "--p", "3", "--q", "2", "--r-max", "61"],
    &[
        "sweep-tv", "--p", "2", "--q", "5", "--r-max", "81", "--color", "3",
    ],
    &[
        "sandwich", "--p", "3", "--q", "2", "--r-max", "61", "--seed", "17",
    ],
    &["explore-small-r", "--p", "2", "--q", "7"],
];

fn binary_payload(args: &[&str]) -> Option<serde_json::Value> {
    let out = Command::new(env!("CARGO_BIN_EXE_rtcable"))
        .args(args)
        .output()
        .ok()?;
    if !out.status.success() {
        return None;
    }
    let mut v: serde_json::Value = serde_json::from_slice(&out.stdout).ok()?;
    v.as_object_mut()?.remove("timestamp");
    Some(v)
}

fn determinism() -> Verdict {
    let mut bad = Vec::new();
    for args in DETERMINISM_COMMANDS {
        let cfg = match parse(std::iter::once("rtcable").chain(args.iter().copied())) {
            Parsed::Run(c) => c,
            _ => {
                bad.push(args.join(" "));
                continue;
            }
        };
        let same_in_process = match (run(&cfg), run(&cfg)) {
            (Ok(a), Ok(b)) => a == b,
            _ => false,
        };
        let a = binary_payload(args);
        let same_binary = a.is_some() && a == binary_payload(args);
        if !(same_in_process && same_binary) {
            bad.push(args.join(" "));
        }
    }
    Verdict::plain(
        bad.is_empty(),
        format!(
            "{} commands repeated in process and through the binary, differing payloads {bad:?}",
            DETERMINISM_COMMANDS.len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "invertibility dichotomy", invertibility_dichotomy),
        (2, "assembly equality", assembly_equality),
        (3, "structure clauses", structure_clauses),
        (4, "inverse residual", inverse_residual),
        (5, "inverse norm growth", norm_growth),
        (6, "TV plumbing and colored trend", tv_plumbing),
        (7, "pairing exclusions", pairing_exclusions),
        (8, "CLI determinism", determinism),
    ];
    let mut unexpected = Vec::new();
    for (id, name, check) in criteria {
        let start = Instant::now();
        let v = check();
        let status = if v.passed { "PASS" } else { "FAIL" };
        println!(
            "{status} [{id}] {name}: {} ({:.1}s)",
            v.detail,
            start.elapsed().as_secs_f64()
        );
        if !v.passed {
            match (KNOWN_GAPS.iter().find(|g| g.0 == id), v.gap_shape_matches) {
                (Some((_, shape)), Some(true)) => println!("     known gap [{id}]: {shape}"),
                _ => unexpected.push(id),
            }
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: all criteria pass except documented gaps");
    } else {
        println!("acceptance: unexpected failures in criteria {unexpected:?}");
        std::process::exit(1);
    }
}
