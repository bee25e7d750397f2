//! Command-line front end.
//!
//! Every command produces a JSON payload wrapped in a [`ReportEnvelope`];
//! the sweep commands can emit CSV instead. Exit status is 0 on success,
//! 1 for rejected input (with a JSON error object on stdout) and 2 for an
//! internal consistency failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::analysis::{
    norm_growth_sweep, numeric_det, odd_range, sandwich_check, tv_growth_sweep, BoundaryVector,
    NormSweep, SweepOptions, TvSweep,
};
use crate::cabling::{build_rm, gcd, rt_matrix_e_basis, CableParams, MatrixDump};
use crate::cyclotomic::Monomial;
use crate::error::{Error, Result};
use crate::structure::{cofactor_det, explore_small_levels, verify_structure, zero_rows};

pub const TOOL: &str = "rtcable";

#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = TOOL, version, about = "Exact SO(3) quantum operator of (p,q)-cable spaces")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Seed for random boundary vectors.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Also write a two-column `r value` file for plotting (sweeps only).
    #[arg(long, global = true)]
    pub gnuplot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    /// the change-of-basis matrix `R_m`
    Rm,
    /// the operator in the `e`-basis
    Rt,
}

#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct CableArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub p: i64,
    #[arg(long)]
    pub q: i64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LevelArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub cable: CableArgs,
    #[arg(long)]
    pub r: i64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RangeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub cable: CableArgs,
    /// Smallest level, default `q + 7`.
    #[arg(long)]
    pub r_min: Option<i64>,
    #[arg(long, default_value_t = 201)]
    pub r_max: i64,
}

impl RangeArgs {
    pub fn levels(&self) -> Vec<i64> {
        odd_range(self.r_min.unwrap_or(self.cable.q + 7), self.r_max)
    }
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Dump `R_m` or the operator as JSON monomial records.
    Matrix {
        #[command(flatten)]
        #[serde(flatten)]
        level: LevelArgs,
        #[arg(long, value_enum, default_value_t = MatrixKind::Rt)]
        kind: MatrixKind,
    },
    /// Check the sparsity structure of `R_m`.
    Verify {
        #[command(flatten)]
        #[serde(flatten)]
        level: LevelArgs,
    },
    /// Cofactor and numeric determinants of `R_m`.
    Det {
        #[command(flatten)]
        #[serde(flatten)]
        level: LevelArgs,
    },
    /// Operator norms of the inverse over a range of levels.
    SweepNorm {
        #[command(flatten)]
        #[serde(flatten)]
        range: RangeArgs,
    },
    /// Squared norms of colored solid-torus images over a range of levels.
    SweepTv {
        #[command(flatten)]
        #[serde(flatten)]
        range: RangeArgs,
        #[arg(long, default_value_t = 2)]
        color: u32,
    },
    /// Norm ratios `‖RT·v‖²/‖v‖²` for basis and random boundary vectors.
    Sandwich {
        #[command(flatten)]
        #[serde(flatten)]
        range: RangeArgs,
        #[arg(long, default_value_t = 3)]
        declared_n: u32,
    },
    /// Nonsingularity probe for levels `r ≤ q + 6`.
    ExploreSmallR {
        #[command(flatten)]
        #[serde(flatten)]
        cable: CableArgs,
    },
}

impl Command {
    fn cable(&self) -> &CableArgs {
        match self {
            Command::Matrix { level, .. } | Command::Verify { level } | Command::Det { level } => {
                &level.cable
            }
            Command::SweepNorm { range }
            | Command::SweepTv { range, .. }
            | Command::Sandwich { range, .. } => &range.cable,
            Command::ExploreSmallR { cable } => cable,
        }
    }

    fn is_sweep(&self) -> bool {
        matches!(self, Command::SweepNorm { .. } | Command::SweepTv { .. })
    }
}

/// Outcome of argument parsing.
#[derive(Debug)]
pub enum Parsed {
    Run(RunConfig),
    /// Help or version text; print and exit 0.
    Info(String),
    Rejected(Error),
}

/// Parses arguments and applies the coprimality and format checks.
pub fn parse<I, T>(args: I) -> Parsed
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Parsed::Info(e.to_string()),
                _ => Parsed::Rejected(Error::Precondition(
                    e.kind().to_string() + ": " + &first_line(&e.to_string()),
                )),
            };
        }
    };
    let CableArgs { p, q } = *config.command.cable();
    if q < 1 || gcd(p, q) != 1 {
        return Parsed::Rejected(Error::InvalidCable { p, q });
    }
    if config.format == Format::Csv && !config.command.is_sweep() {
        return Parsed::Rejected(Error::Precondition(
            "--format csv applies to sweep-norm and sweep-tv".into(),
        ));
    }
    if config.gnuplot.is_some() && !config.command.is_sweep() {
        return Parsed::Rejected(Error::Precondition(
            "--gnuplot applies to sweep-norm and sweep-tv".into(),
        ));
    }
    Parsed::Run(config)
}

fn first_line(s: &str) -> String {
    s.lines()
        .next()
        .unwrap_or_default()
        .trim_start_matches("error: ")
        .to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetReport {
    pub p: i64,
    pub q: u32,
    pub r: u32,
    pub m: u32,
    pub gcd_rq: u32,
    pub cofactor: Option<Monomial>,
    /// `[re, im]` of the evaluated cofactor determinant.
    pub cofactor_value: Option<[f64; 2]>,
    pub cofactor_error: Option<String>,
    pub numeric: [f64; 2],
    pub det_modulus: f64,
    pub zero_rows: Vec<u32>,
}

/// Agreement tolerance between the cofactor and numeric determinants.
pub const DET_AGREEMENT_TOL: f64 = 1e-9;

pub fn det_report(params: &CableParams) -> Result<DetReport> {
    let numeric = numeric_det(&build_rm(params).eval());
    let (cofactor, cofactor_value, cofactor_error) = match cofactor_det(params) {
        Ok(d) => {
            let v = params.sys().eval_mono(d.det);
            if (v - numeric).norm() > DET_AGREEMENT_TOL {
                return Err(Error::Consistency(format!(
                    "cofactor determinant {v} disagrees with numeric {numeric}"
                )));
            }
            (Some(d.det), Some([v.re, v.im]), None)
        }
        Err(e) if e.is_internal() => return Err(e),
        Err(e) => (None, None, Some(e.to_string())),
    };
    Ok(DetReport {
        p: params.p(),
        q: params.q(),
        r: params.r(),
        m: params.m(),
        gcd_rq: params.gcd_rq(),
        cofactor,
        cofactor_value,
        cofactor_error,
        numeric: [numeric.re, numeric.im],
        det_modulus: numeric.norm(),
        zero_rows: if params.gcd_rq() > 1 {
            zero_rows(params)?
        } else {
            Vec::new()
        },
    })
}

/// One CSV row of a sweep.
#[derive(Debug, Clone, Serialize)]
struct CsvRow {
    p: i64,
    q: i64,
    r: i64,
    m: Option<u32>,
    det_modulus: Option<f64>,
    inv_norm: Option<f64>,
    rt_norm: Option<f64>,
    tv_cable: Option<f64>,
    status: &'static str,
}

fn to_csv(rows: &[CsvRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::Consistency(format!("csv encoding: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Consistency(format!("csv encoding: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn norm_rows(s: &NormSweep) -> Vec<CsvRow> {
    s.records
        .iter()
        .map(|x| CsvRow {
            p: x.p,
            q: x.q,
            r: x.r,
            m: x.m,
            det_modulus: x.det_modulus,
            inv_norm: x.inv_norm,
            rt_norm: x.rt_norm,
            tv_cable: x.tv_cable,
            status: x.status.as_str(),
        })
        .collect()
}

fn tv_rows(s: &TvSweep) -> Vec<CsvRow> {
    s.records
        .iter()
        .map(|x| CsvRow {
            p: x.p,
            q: x.q,
            r: x.r,
            m: x.m,
            det_modulus: None,
            inv_norm: None,
            rt_norm: None,
            tv_cable: x.tv,
            status: x.status.as_str(),
        })
        .collect()
}

fn gnuplot_text(points: impl Iterator<Item = (i64, f64)>) -> String {
    points.map(|(r, v)| format!("{r} {v:e}\n")).collect()
}

/// Everything a command produced, before it is written anywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub payload: Value,
    pub csv: Option<String>,
    pub gnuplot: Option<String>,
}

fn to_value<T: Serialize>(x: &T) -> Result<Value> {
    serde_json::to_value(x).map_err(|e| Error::Consistency(format!("json encoding: {e}")))
}

/// Executes a command. The result depends only on the configuration.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    let mut out = RunOutput {
        payload: Value::Null,
        csv: None,
        gnuplot: None,
    };
    match &config.command {
        Command::Matrix { level, kind } => {
            let params = level_params(level)?;
            let dump = match kind {
                MatrixKind::Rm => MatrixDump::new(&params, build_rm(&params).as_columns()),
                MatrixKind::Rt => MatrixDump::new(&params, &rt_matrix_e_basis(&params)?),
            };
            out.payload = to_value(&dump)?;
        }
        Command::Verify { level } => {
            out.payload = to_value(&verify_structure(&level_params(level)?))?;
        }
        Command::Det { level } => {
            out.payload = to_value(&det_report(&level_params(level)?)?)?;
        }
        Command::SweepNorm { range } => {
            let s = norm_growth_sweep(
                range.cable.p,
                range.cable.q,
                &range.levels(),
                &SweepOptions::default(),
            )?;
            out.csv = Some(to_csv(&norm_rows(&s))?);
            out.gnuplot = Some(gnuplot_text(
                s.records
                    .iter()
                    .filter_map(|x| x.inv_norm.map(|v| (x.r, v))),
            ));
            out.payload = to_value(&s)?;
        }
        Command::SweepTv { range, color } => {
            let s = tv_growth_sweep(range.cable.p, range.cable.q, &range.levels(), *color)?;
            out.csv = Some(to_csv(&tv_rows(&s))?);
            out.gnuplot = Some(gnuplot_text(
                s.records
                    .iter()
                    .filter_map(|x| x.scaled_log.map(|v| (x.r, v))),
            ));
            out.payload = to_value(&s)?;
        }
        Command::Sandwich { range, declared_n } => {
            let vectors = [
                BoundaryVector::Basis { i: 1 },
                BoundaryVector::Basis { i: 2 },
                BoundaryVector::Basis { i: 3 },
                BoundaryVector::Random { seed: config.seed },
            ];
            let rep = sandwich_check(
                range.cable.p,
                range.cable.q,
                &range.levels(),
                &vectors,
                *declared_n,
            )?;
            out.payload = to_value(&rep)?;
        }
        Command::ExploreSmallR { cable } => {
            out.payload = to_value(&explore_small_levels(cable.p, cable.q)?)?;
        }
    }
    Ok(out)
}

fn level_params(level: &LevelArgs) -> Result<CableParams> {
    CableParams::new(level.cable.p, level.cable.q, level.r)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportEnvelope<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: &'a RunConfig,
    pub timestamp: String,
    pub payload: Value,
}

#[derive(Debug, Serialize)]
struct ErrorObject {
    error: ErrorBody,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    kind: &'static str,
    message: String,
    internal: bool,
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidLevel(_) => "invalid-level",
        Error::InvalidCable { .. } => "invalid-cable",
        Error::OutOfRange { .. } => "out-of-range",
        Error::Precondition(_) => "precondition",
        Error::Structure(_) => "structure",
        Error::Singular(_) => "singular",
        Error::EliminationStalled { .. } => "elimination-stalled",
        Error::NonConvergence { .. } => "non-convergence",
        Error::InsufficientData { .. } => "insufficient-data",
        Error::Consistency(_) => "consistency",
    }
}

/// JSON error object printed on failure.
pub fn error_json(e: &Error) -> String {
    serde_json::to_string(&ErrorObject {
        error: ErrorBody {
            kind: error_kind(e),
            message: e.to_string(),
            internal: e.is_internal(),
        },
    })
    .expect("error object serializes")
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_internal() {
        2
    } else {
        1
    }
}

fn write_text(path: &Option<PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Error::Precondition(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(config: &RunConfig) -> Result<()> {
    let out = run(config)?;
    if let (Some(path), Some(text)) = (&config.gnuplot, &out.gnuplot) {
        write_text(&Some(path.clone()), text)?;
    }
    let text = match config.format {
        Format::Csv => out.csv.expect("sweeps produce csv"),
        Format::Json => {
            let env = ReportEnvelope {
                tool: TOOL,
                version: env!("CARGO_PKG_VERSION"),
                config,
                timestamp: chrono::Utc::now().to_rfc3339(),
                payload: out.payload,
            };
            serde_json::to_string_pretty(&env).expect("envelope serializes") + "\n"
        }
    };
    write_text(&config.output, &text)
}

/// Entry point for the binary; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let result = match parse(args) {
        Parsed::Info(text) => {
            print!("{text}");
            return 0;
        }
        Parsed::Rejected(e) => Err(e),
        Parsed::Run(config) => execute(&config),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            println!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}
