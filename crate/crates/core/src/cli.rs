//! Command-line front end: parses JSON problem files and writes CSV/JSON
//! reports.
//!
//! Exit codes: 0 success, 2 parse error, 3 operand/contract error,
//! 4 mathematical-validity error. Warnings go to stderr; data streams carry
//! only data.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bloch::{band_structure, Truncation};
use crate::dual_lattice::{ConditionCReport, QuasiMatrix};
use crate::error::Error;
use crate::harmonics::t_spectrum;
use crate::jsonio::{
    deformation_from_json, field_from_json, problem_from_json, weight_from_json, DeformationJson,
    FieldJson, ProblemJson, WeightJson,
};
use crate::quasi_dynamics::{
    density_kernel_test, exact_mean, mean_value_estimate, phi2_lhs_estimate, phi2_rhs,
    DensityVerdict,
};

#[derive(Debug, Parser)]
#[command(
    name = "quasibloch",
    about = "Sobolev compactness diagnostics and Bloch band computations for quasiperiodic operators"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List a sublevel set of a dual-lattice weight as CSV.
    Enumerate(EnumerateArgs),
    /// Probe finiteness of sublevel sets across levels and windows.
    Compactness(CompactnessArgs),
    /// Sweep Bloch eigenvalues over a grid of quasimomenta.
    Bands(BandsArgs),
    /// Birkhoff box averages of a field against its exact mean.
    MeanValue(MeanValueArgs),
    /// Check the orbit-density kernel of a frequency matrix.
    Ergodic(ErgodicArgs),
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    /// Weight JSON file.
    #[arg(long)]
    pub input: PathBuf,
    /// Sublevel radius d.
    #[arg(long)]
    pub d: f64,
    /// Truncation windows; the first is used when the weight needs one.
    #[arg(long, value_delimiter = ',')]
    pub windows: Vec<i64>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompactnessArgs {
    /// Weight JSON file.
    #[arg(long)]
    pub input: PathBuf,
    /// Sublevel radii to probe.
    #[arg(long, value_delimiter = ',', required = true)]
    pub levels: Vec<f64>,
    /// Truncation windows per level.
    #[arg(long, value_delimiter = ',')]
    pub windows: Vec<i64>,
    /// Output JSON path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BandsArgs {
    /// Bloch problem JSON file.
    #[arg(long)]
    pub input: PathBuf,
    /// Quasimomentum grid, one start:stop:count triple per axis.
    #[arg(long = "theta-grid", required = true)]
    pub theta_grid: Vec<String>,
    /// Number of eigenvalues per grid point.
    #[arg(long, default_value_t = 1)]
    pub eigs: usize,
    /// Worker threads; defaults to the rayon global pool.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MeanValueArgs {
    /// Field JSON file, optionally followed by a deformation JSON file.
    #[arg(long, required = true, num_args = 1..=2)]
    pub input: Vec<PathBuf>,
    /// Flow matrix rows for the undeformed run, as a:b;c:d style rows
    /// (entries ':'-separated, rows ';'-separated).
    #[arg(long)]
    pub lambda: Option<String>,
    /// Box sizes t.
    #[arg(long = "t-list", value_delimiter = ',', required = true)]
    pub t_list: Vec<f64>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ErgodicArgs {
    /// JSON file holding {"lambda": [[...]]}.
    #[arg(long)]
    pub input: PathBuf,
    /// Scan radius for kernel frequencies.
    #[arg(long, value_delimiter = ',', default_value = "50")]
    pub windows: Vec<i64>,
    /// Kernel tolerance on |Lambda^T k|.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Output JSON path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Maps an error to the process exit code contract.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::EllipticityViolation { .. }
        | Error::InvalidDeformation(_)
        | Error::NonPositiveDenominator(_)
        | Error::EigensolverFailure { .. } => 4,
        _ => 3,
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Parse(format!("malformed JSON in {}: {e}", path.display())))
}

/// A CLI failure carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Parse(String),
    Lib(Error),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Parse(msg) => write!(f, "{msg}"),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Lib(e) => exit_code(e),
            CliError::Io(_) => 3,
        }
    }
}

fn write_output(path: Option<&Path>, data: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, data)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(data.as_bytes())?;
        }
    }
    Ok(())
}

/// 17-significant-digit decimal form; round-trips every finite double.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Enumerate(args) => cmd_enumerate(args),
        Command::Compactness(args) => cmd_compactness(args),
        Command::Bands(args) => cmd_bands(args),
        Command::MeanValue(args) => cmd_mean_value(args),
        Command::Ergodic(args) => cmd_ergodic(args),
    }
}

fn cmd_enumerate(args: EnumerateArgs) -> Result<(), CliError> {
    let weight_json: WeightJson = read_json(&args.input)?;
    let weight = weight_from_json(&weight_json)?;
    let window = args.windows.first().copied();
    let set = weight.enumerate_sublevel(args.d, window)?;
    let m = set
        .freqs
        .first()
        .map(|k| k.dim())
        .or_else(|| weight.dim())
        .or(window.map(|w| w as usize))
        .unwrap_or(0);
    let mut out = String::new();
    let header: Vec<String> = (1..=m).map(|j| format!("k_{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for k in &set.freqs {
        let row: Vec<String> = k.entries().iter().map(|e| e.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out.push_str(&format!("count,{}\n", set.freqs.len()));
    out.push_str(&format!("exact,{}\n", set.exact));
    write_output(args.output.as_deref(), &out)
}

#[derive(Serialize)]
struct CompactnessOut {
    report: ConditionCReport,
    t_spectrum_window: i64,
    t_spectrum_head: Vec<f64>,
}

fn cmd_compactness(args: CompactnessArgs) -> Result<(), CliError> {
    let weight_json: WeightJson = read_json(&args.input)?;
    let weight = weight_from_json(&weight_json)?;
    let report = weight.condition_c_report(&args.levels, &args.windows)?;
    // Head of the T spectrum at the largest window that still enumerates;
    // open-ended rule weights grow exponentially in the window.
    let mut candidates: Vec<i64> = args.windows.clone();
    candidates.sort_unstable();
    candidates.dedup();
    if candidates.is_empty() {
        candidates.push(10);
    }
    let (spec_window, head) = candidates
        .iter()
        .rev()
        .find_map(|&w| t_spectrum(&weight, w, 16).ok().map(|s| (w, s)))
        .map_or_else(
            || -> Result<_, CliError> {
                let fallback = 3;
                Ok((fallback, t_spectrum(&weight, fallback, 16)?))
            },
            Ok,
        )?;
    let out = CompactnessOut {
        report,
        t_spectrum_window: spec_window,
        t_spectrum_head: head,
    };
    let mut text = serde_json::to_string_pretty(&out)
        .map_err(|e| CliError::Parse(format!("serialization failed: {e}")))?;
    text.push('\n');
    write_output(args.output.as_deref(), &text)
}

fn parse_axis(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Parse(format!(
            "theta grid axis must be start:stop:count, got {spec:?}"
        )));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::Parse(format!("bad axis start {:?}", parts[0])))?;
    let stop: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::Parse(format!("bad axis stop {:?}", parts[1])))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|_| CliError::Parse(format!("bad axis count {:?}", parts[2])))?;
    if count == 0 {
        return Err(CliError::Parse("axis count must be positive".into()));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let h = (stop - start) / (count - 1) as f64;
    Ok((0..count).map(|i| start + h * i as f64).collect())
}

fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut grid = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(grid.len() * axis.len());
        for prefix in &grid {
            for &v in axis {
                let mut row = prefix.clone();
                row.push(v);
                next.push(row);
            }
        }
        grid = next;
    }
    grid
}

fn cmd_bands(args: BandsArgs) -> Result<(), CliError> {
    let problem_json: ProblemJson = read_json(&args.input)?;
    let problem = problem_from_json(&problem_json)?;
    let n = problem.lambda.cols();
    if args.theta_grid.len() != n {
        return Err(CliError::Lib(Error::DimensionMismatch {
            expected: n,
            got: args.theta_grid.len(),
        }));
    }
    if let Truncation::Sublevel { weight, d } = &problem.truncation {
        let probe = weight.enumerate_sublevel(*d, None);
        if !matches!(&probe, Ok(s) if s.exact) {
            eprintln!(
                "warning: truncation weight admits no certified finite sublevel set; \
                 the H^1 space need not embed compactly in L^2, so the Galerkin \
                 truncation carries no convergence guarantee"
            );
        }
    }
    let axes = args
        .theta_grid
        .iter()
        .map(|s| parse_axis(s))
        .collect::<Result<Vec<_>, _>>()?;
    let thetas = cartesian(&axes);
    let results = match args.workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| CliError::Parse(format!("worker pool: {e}")))?;
            pool.install(|| band_structure(&problem, &thetas, args.eigs))?
        }
        None => band_structure(&problem, &thetas, args.eigs)?,
    };
    let mut out = String::new();
    let mut header: Vec<String> = (1..=n).map(|j| format!("theta_{j}")).collect();
    header.extend((0..args.eigs).map(|j| format!("lambda_{j}")));
    out.push_str(&header.join(","));
    out.push('\n');
    for (theta, band) in thetas.iter().zip(&results) {
        let mut row: Vec<String> = theta.iter().map(|&v| fmt_f64(v)).collect();
        row.extend(band.eigenvalues.iter().map(|&v| fmt_f64(v)));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_output(args.output.as_deref(), &out)
}

fn parse_lambda_rows(spec: &str) -> Result<QuasiMatrix, CliError> {
    let rows = spec
        .split(';')
        .map(|row| {
            row.split(':')
                .map(|e| {
                    e.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::Parse(format!("bad lambda entry {e:?}")))
                })
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(QuasiMatrix::from_rows(&rows)?)
}

fn cmd_mean_value(args: MeanValueArgs) -> Result<(), CliError> {
    let field_json: FieldJson = read_json(&args.input[0])?;
    let field = field_from_json(&field_json)?;
    let mut out = String::new();
    out.push_str("t,estimate,reference,abs_error\n");
    if args.input.len() == 2 {
        let def_json: DeformationJson = read_json(&args.input[1])?;
        let def = deformation_from_json(&def_json)?;
        let rhs = phi2_rhs(&field, &def)?;
        for &t in &args.t_list {
            let lhs = phi2_lhs_estimate(&field, &def, t)?;
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(t),
                fmt_f64(lhs),
                fmt_f64(rhs),
                fmt_f64((lhs - rhs).abs())
            ));
        }
    } else {
        let lambda = match &args.lambda {
            Some(spec) => parse_lambda_rows(spec)?,
            None => {
                return Err(CliError::Lib(Error::InvalidInput(
                    "undeformed runs need --lambda".into(),
                )))
            }
        };
        let omega0 = vec![0.0; field.dim()];
        let exact = exact_mean(&field);
        for &t in &args.t_list {
            let est = mean_value_estimate(&field, &lambda, &omega0, t)?;
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(t),
                fmt_f64(est.re),
                fmt_f64(exact.re),
                fmt_f64((est - exact).norm())
            ));
        }
    }
    write_output(args.output.as_deref(), &out)
}

#[derive(serde::Deserialize)]
struct LambdaDoc {
    lambda: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct ErgodicOut {
    window: i64,
    tol: f64,
    dense: bool,
    obstruction: Option<Vec<i64>>,
}

fn cmd_ergodic(args: ErgodicArgs) -> Result<(), CliError> {
    let doc: LambdaDoc = read_json(&args.input)?;
    let lambda = QuasiMatrix::from_rows(&doc.lambda)?;
    let window = args.windows.iter().copied().max().unwrap_or(50);
    let verdict = density_kernel_test(&lambda, window, args.tol)?;
    let out = match verdict {
        DensityVerdict::NoObstructionFound => ErgodicOut {
            window,
            tol: args.tol,
            dense: true,
            obstruction: None,
        },
        DensityVerdict::Obstruction(k) => ErgodicOut {
            window,
            tol: args.tol,
            dense: false,
            obstruction: Some(k.entries().to_vec()),
        },
    };
    let mut text = serde_json::to_string_pretty(&out)
        .map_err(|e| CliError::Parse(format!("serialization failed: {e}")))?;
    text.push('\n');
    write_output(args.output.as_deref(), &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_endpoints_inclusive() {
        let axis = parse_axis("0:0.5:11").unwrap();
        assert_eq!(axis.len(), 11);
        assert_eq!(axis[0], 0.0);
        assert_eq!(axis[10], 0.5);
    }

    #[test]
    fn axis_rejects_malformed() {
        assert!(parse_axis("0:0.5").is_err());
        assert!(parse_axis("0:0.5:0").is_err());
        assert!(parse_axis("a:b:3").is_err());
    }

    #[test]
    fn cartesian_order_is_row_major() {
        let grid = cartesian(&[vec![0.0, 1.0], vec![10.0, 20.0]]);
        assert_eq!(
            grid,
            vec![
                vec![0.0, 10.0],
                vec![0.0, 20.0],
                vec![1.0, 10.0],
                vec![1.0, 20.0]
            ]
        );
    }

    #[test]
    fn float_format_round_trips() {
        for &x in &[0.1, 1.0 / 3.0, 2f64.sqrt(), -1e-300, 6.25] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn lambda_row_parser() {
        let m = parse_lambda_rows("1:1.5;0:2").unwrap();
        assert_eq!(m.rows(), 2);
        assert_eq!(m.cols(), 2);
        assert_eq!(m.matrix()[(0, 1)], 1.5);
    }
}
