//! Command-line front end: analyze a joint distribution, evaluate a bound,
//! run the seeded verification sweeps or tabulate a bound for plotting.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use pinertia::error_rate::{
    entropy, fano_error_rate, jk_error_rate_lower, mutual_information, SolverParams,
};
use pinertia::fn_bounds::{pe_m_bound, pe_m_bruteforce, FunctionMeasure, BRUTEFORCE_MAX_M};
use pinertia::inertia::chi_squared_direct;
use pinertia::oracle::{bayes_error, certify_bounds, CertifiedBound};
use pinertia::pe_bounds::{
    advantage_bound, corollary_maxcorr_bound, corollary_uniform_bound, lp_sigma_oracle,
    theorem3_bound, InertiaBoundInput, UniformEvidence,
};
use pinertia::verify::{run_verification, Sweep, VerifyConfig};
use pinertia::{decompose, BoundValue, JointDistribution, ProbabilityVector};

mod input;
pub mod output;

use output::{emit, envelope, Format};

/// Exit status for a failed verification.
pub const EXIT_VIOLATION: i32 = 1;
/// Exit status for unusable flags (the same status clap uses).
pub const EXIT_USAGE: i32 = 2;
/// Exit status for input that fails validation.
pub const EXIT_INPUT: i32 = 3;
/// Exit status for solver or I/O failures.
pub const EXIT_RUNTIME: i32 = 4;

const CERT_TOL: f64 = 1e-9;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input(_) => EXIT_INPUT,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Input(m) => write!(f, "invalid input: {m}"),
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn input_err(e: pinertia::Error) -> CliError {
    CliError::Input(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "pinertia",
    version,
    about = "Principal inertias and Bayes-error lower bounds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inertias, maximal correlation, chi-square, k-correlations and Bayes error.
    Analyze(AnalyzeArgs),
    /// Evaluate one lower bound on the error probability.
    Bound(BoundArgs),
    /// Run the seeded verification sweeps.
    Verify(VerifyArgs),
    /// Tabulate a bound against a swept parameter as CSV.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Inertia,
    Maxcorr,
    Chi2,
    Mi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Param {
    Theta,
    Lambda1,
    #[value(name = "M")]
    M,
}

#[derive(Debug, Args)]
pub struct Source {
    /// Joint pmf: JSON `{"pmf": [[...]]}` or a headerless CSV grid.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Marginal of X as a comma-separated list, used instead of `--input`.
    #[arg(long, value_delimiter = ',', conflicts_with = "input")]
    pub p: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Largest k in the k-correlation table (defaults to all components).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, value_enum, default_value = "inertia")]
    pub measure: Measure,
    /// Budget on the measure; taken from `--input` when omitted.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Range size of the function of X to be estimated.
    #[arg(long = "M", alias = "functions", value_name = "M")]
    pub m_range: Option<usize>,
    /// With `--measure inertia` and `--theta`, bound through the k-correlation program.
    #[arg(long)]
    pub k: Option<usize>,
    /// Fixed beta for the maximal-correlation corollary instead of optimizing.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Principal inertias, comma-separated, non-increasing.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub instances: usize,
    /// Worker threads (0 = one per core). Does not change the report.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Run only the function-estimation sweep.
    #[arg(long)]
    pub functions: bool,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, value_enum, default_value = "maxcorr")]
    pub measure: Measure,
    #[arg(long, value_enum, default_value = "theta")]
    pub param: Param,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long = "M", alias = "functions", value_name = "M")]
    pub m_range: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub from: Option<f64>,
    #[arg(long)]
    pub to: Option<f64>,
    #[arg(long, default_value_t = 11)]
    pub steps: usize,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

/// Runs a parsed command, writing the report to `out`. Returns the exit code.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    match cli.command {
        Command::Analyze(a) => analyze(a, out),
        Command::Bound(a) => bound(a, out),
        Command::Verify(a) => verify(a, out),
        Command::Sweep(a) => sweep(a, out),
    }
}

#[derive(Serialize)]
struct KCorrelation {
    k: usize,
    value: f64,
}

#[derive(Serialize)]
struct AnalyzeReport {
    rows: usize,
    cols: usize,
    p_x: Vec<f64>,
    p_y: Vec<f64>,
    lambdas: Vec<f64>,
    max_correlation: f64,
    chi_squared: f64,
    k_correlations: Vec<KCorrelation>,
    mutual_information_bits: f64,
    bayes_error: f64,
    certified_bounds: Vec<CertifiedBound>,
}

fn analyze(args: AnalyzeArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let joint = input::load(&args.input)?;
    let dec = decompose(&joint).map_err(input_err)?;
    let top = args.k.unwrap_or(dec.d()).min(dec.d());
    let k_correlations = (1..=top)
        .map(|k| {
            Ok(KCorrelation {
                k,
                value: dec.k_correlation(k)?,
            })
        })
        .collect::<pinertia::Result<Vec<_>>>()
        .map_err(input_err)?;
    let report = AnalyzeReport {
        rows: joint.rows(),
        cols: joint.cols(),
        p_x: joint.row_marginal().as_slice().to_vec(),
        p_y: joint.col_marginal().as_slice().to_vec(),
        lambdas: dec.lambdas().to_vec(),
        max_correlation: dec.max_correlation(),
        chi_squared: chi_squared_direct(&joint).map_err(input_err)?,
        k_correlations,
        mutual_information_bits: mutual_information(&joint),
        bayes_error: bayes_error(&joint),
        certified_bounds: certify_bounds(&joint).map_err(input_err)?.certified_bounds,
    };
    emit(out, &envelope("analyze", &report)?, args.format)?;
    Ok(0)
}

/// The marginal of X (canonical order) and, when a file was given, the joint.
fn resolve(source: &Source) -> Result<(ProbabilityVector, Option<JointDistribution>), CliError> {
    match (&source.input, &source.p) {
        (Some(path), _) => {
            let joint = input::load(path)?;
            let p = joint.row_marginal().canonical().0;
            Ok((p, Some(joint)))
        }
        (None, Some(p)) => {
            let p = ProbabilityVector::new(p.clone()).map_err(input_err)?;
            Ok((p.canonical().0, None))
        }
        (None, None) => Err(CliError::Usage("one of --input or --p is required".into())),
    }
}

fn budget(
    theta: Option<f64>,
    joint: Option<&JointDistribution>,
    measure: Measure,
) -> Result<f64, CliError> {
    if let Some(t) = theta {
        if t < 0.0 || !t.is_finite() {
            return Err(CliError::Input(format!(
                "--theta must be finite and nonnegative, got {t}"
            )));
        }
        return Ok(t);
    }
    let joint = joint.ok_or_else(|| {
        CliError::Usage("--theta is required unless --input supplies the distribution".into())
    })?;
    Ok(match measure {
        Measure::Maxcorr => decompose(joint).map_err(input_err)?.max_correlation(),
        Measure::Chi2 => chi_squared_direct(joint).map_err(input_err)?,
        Measure::Mi => mutual_information(joint),
        Measure::Inertia => unreachable!("inertia budgets come from --lambdas"),
    })
}

#[derive(Serialize)]
struct Certificate {
    name: &'static str,
    exact: f64,
    bound: f64,
    slack: f64,
    holds: bool,
}

impl Certificate {
    fn new(name: &'static str, exact: f64, bound: f64) -> Self {
        Self {
            name,
            exact,
            bound,
            slack: exact - bound,
            holds: exact - bound >= -CERT_TOL,
        }
    }
}

#[derive(Serialize)]
struct BoundReport {
    measure: Measure,
    bound: &'static str,
    theta: Option<f64>,
    #[serde(rename = "M")]
    m_range: Option<usize>,
    k: Option<usize>,
    p: Vec<f64>,
    bound_raw: f64,
    bound_clamped: f64,
    details: Value,
    certificates: Vec<Certificate>,
}

struct Evaluated {
    name: &'static str,
    value: BoundValue,
    details: Value,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// `P_{e,M}` exactly, when the alphabet is small enough to enumerate.
fn exact_pe_m(joint: &JointDistribution, m_range: usize) -> Result<Option<f64>, CliError> {
    if joint.rows() > BRUTEFORCE_MAX_M {
        return Ok(None);
    }
    match pe_m_bruteforce(joint, m_range) {
        Ok(r) => Ok(Some(r.value)),
        Err(pinertia::Error::TooLarge { .. }) => Ok(None),
        Err(e) => Err(input_err(e)),
    }
}

fn function_bound(
    p: &ProbabilityVector,
    theta: f64,
    m_range: usize,
    measure: Measure,
) -> Result<Evaluated, CliError> {
    let (fm, name) = match measure {
        Measure::Maxcorr => (FunctionMeasure::MaxCorrelation, "function_maxcorr"),
        Measure::Mi => (FunctionMeasure::MutualInformation, "function_fano"),
        _ => {
            return Err(CliError::Usage(
                "--M applies to --measure maxcorr or mi".into(),
            ))
        }
    };
    let value = pe_m_bound(p, theta, m_range, fm).map_err(input_err)?;
    Ok(Evaluated {
        name,
        value,
        details: Value::Null,
    })
}

fn inertia_bound(
    p: &ProbabilityVector,
    lambdas: Option<&[f64]>,
    joint: Option<&JointDistribution>,
) -> Result<Evaluated, CliError> {
    let input = match (lambdas, joint) {
        (Some(l), _) => InertiaBoundInput::padded(p.clone(), l).map_err(input_err)?,
        (None, Some(j)) => InertiaBoundInput::from_joint(j).map_err(input_err)?,
        (None, None) => {
            return Err(CliError::Usage(
                "--measure inertia needs --lambdas, --input, or --theta with --k".into(),
            ))
        }
    };
    let result = theorem3_bound(&input);
    let lp = lp_sigma_oracle(&input).map_err(input_err)?;
    Ok(Evaluated {
        name: "inertia_spectrum",
        value: BoundValue::from_raw(result.raw),
        details: serde_json::json!({
            "lambdas": input.lambdas(),
            "solution": to_value(&result),
            "lp_certificate": to_value(&lp),
        }),
    })
}

fn jk_bound(p: &ProbabilityVector, theta: f64, k: usize) -> Result<Evaluated, CliError> {
    let sol = jk_error_rate_lower(p, theta, k, &SolverParams::default()).map_err(|e| match e {
        pinertia::Error::SolverFailure { .. } => CliError::Runtime(e.to_string()),
        other => input_err(other),
    })?;
    Ok(Evaluated {
        name: "k_correlation_program",
        value: BoundValue::from_raw(sol.lower_bound),
        details: to_value(&sol),
    })
}

fn maxcorr_bound(
    p: &ProbabilityVector,
    rho: f64,
    beta: Option<f64>,
) -> Result<Evaluated, CliError> {
    if rho > 1.0 {
        return Err(CliError::Input(format!(
            "maximal correlation {rho} exceeds 1"
        )));
    }
    let r = corollary_maxcorr_bound(p, rho * rho, beta).map_err(input_err)?;
    Ok(Evaluated {
        name: "maximal_correlation",
        value: BoundValue {
            raw: r.raw,
            value: r.value,
        },
        details: serde_json::json!({
            "solution": to_value(&r),
            "advantage_bound": advantage_bound(p, rho * rho),
        }),
    })
}

fn chi2_bound(p: &ProbabilityVector, chi2: f64) -> Result<Evaluated, CliError> {
    if p.is_uniform(1e-12) {
        let value = corollary_uniform_bound(p.len(), UniformEvidence::ChiSquared(chi2));
        return Ok(Evaluated {
            name: "uniform_chi_squared",
            value,
            details: Value::Null,
        });
    }
    // every inertia is at most their sum
    let cap = chi2.min(1.0);
    let input = InertiaBoundInput::new(p.clone(), vec![cap; p.len() - 1]).map_err(input_err)?;
    let result = theorem3_bound(&input);
    Ok(Evaluated {
        name: "chi_squared_spectrum",
        value: BoundValue::from_raw(result.raw),
        details: to_value(&result),
    })
}

fn mi_bound(p: &ProbabilityVector, theta: f64) -> Result<Evaluated, CliError> {
    let d = match fano_error_rate(p, theta) {
        Err(pinertia::Error::DegenerateSupport) => 0.0,
        other => other.map_err(input_err)?,
    };
    Ok(Evaluated {
        name: "fano",
        value: BoundValue::from_raw(d),
        details: serde_json::json!({ "entropy_bits": entropy(p) }),
    })
}

struct Query<'a> {
    p: &'a ProbabilityVector,
    joint: Option<&'a JointDistribution>,
    measure: Measure,
    theta: Option<f64>,
    m_range: Option<usize>,
    k: Option<usize>,
    beta: Option<f64>,
    lambdas: Option<&'a [f64]>,
}

/// The bound selected by the flags, and the budget actually used.
fn evaluate(q: &Query) -> Result<(Evaluated, Option<f64>), CliError> {
    if let Some(m) = q.m_range {
        let theta = budget(q.theta, q.joint, q.measure)?;
        return Ok((function_bound(q.p, theta, m, q.measure)?, Some(theta)));
    }
    match q.measure {
        Measure::Inertia => match (q.theta, q.k) {
            (Some(theta), Some(k)) => Ok((
                jk_bound(q.p, budget(Some(theta), None, q.measure)?, k)?,
                Some(theta),
            )),
            (Some(_), None) => Err(CliError::Usage(
                "--theta with --measure inertia needs --k".into(),
            )),
            _ => Ok((inertia_bound(q.p, q.lambdas, q.joint)?, None)),
        },
        Measure::Maxcorr => {
            let rho = budget(q.theta, q.joint, q.measure)?;
            Ok((maxcorr_bound(q.p, rho, q.beta)?, Some(rho)))
        }
        Measure::Chi2 => {
            let chi2 = budget(q.theta, q.joint, q.measure)?;
            Ok((chi2_bound(q.p, chi2)?, Some(chi2)))
        }
        Measure::Mi => {
            let theta = budget(q.theta, q.joint, q.measure)?;
            Ok((mi_bound(q.p, theta)?, Some(theta)))
        }
    }
}

fn bound(args: BoundArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let (p, joint) = resolve(&args.source)?;
    let query = Query {
        p: &p,
        joint: joint.as_ref(),
        measure: args.measure,
        theta: args.theta,
        m_range: args.m_range,
        k: args.k,
        beta: args.beta,
        lambdas: args.lambdas.as_deref(),
    };
    let (eval, theta) = evaluate(&query)?;
    let mut certificates = Vec::new();
    if let Some(j) = &joint {
        match args.m_range {
            Some(m) => {
                if let Some(exact) = exact_pe_m(j, m)? {
                    certificates.push(Certificate::new(
                        "function_bayes_error",
                        exact,
                        eval.value.value,
                    ));
                }
            }
            None => certificates.push(Certificate::new(
                "bayes_error",
                bayes_error(j),
                eval.value.value,
            )),
        }
    }
    let report = BoundReport {
        measure: args.measure,
        bound: eval.name,
        theta,
        m_range: args.m_range,
        k: args.k,
        p: p.as_slice().to_vec(),
        bound_raw: eval.value.raw,
        bound_clamped: eval.value.value,
        details: eval.details,
        certificates,
    };
    emit(out, &envelope("bound", &report)?, args.format)?;
    Ok(0)
}

fn verify(args: VerifyArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let config = VerifyConfig {
        seed: args.seed,
        instances: args.instances,
        jobs: args.jobs,
        sweeps: if args.functions {
            vec![Sweep::Functions]
        } else {
            Sweep::ALL.to_vec()
        },
    };
    let report = run_verification(&config);
    emit(out, &envelope("verify", &report)?, args.format)?;
    Ok(if report.passed { 0 } else { EXIT_VIOLATION })
}

#[derive(Serialize)]
struct SweepRow {
    param: f64,
    bound_raw: f64,
    bound_clamped: f64,
    exact_if_available: Option<f64>,
}

fn grid(from: f64, to: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![from],
        n => (0..n)
            .map(|i| from + (to - from) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

fn sweep(args: SweepArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let (p, joint) = resolve(&args.source)?;
    let base = Query {
        p: &p,
        joint: joint.as_ref(),
        measure: args.measure,
        theta: args.theta,
        m_range: args.m_range,
        k: args.k,
        beta: None,
        lambdas: None,
    };
    let mut rows = Vec::new();
    match args.param {
        Param::Theta => {
            let exact = match (&joint, args.m_range) {
                (Some(j), Some(m)) => exact_pe_m(j, m)?,
                (Some(j), None) => Some(bayes_error(j)),
                _ => None,
            };
            let k = match args.measure {
                Measure::Inertia => Some(args.k.unwrap_or(1)),
                _ => args.k,
            };
            for theta in grid(args.from.unwrap_or(0.0), args.to.unwrap_or(1.0), args.steps) {
                let q = Query {
                    theta: Some(theta),
                    k,
                    ..base
                };
                let (e, _) = evaluate(&q)?;
                rows.push(SweepRow {
                    param: theta,
                    bound_raw: e.value.raw,
                    bound_clamped: e.value.value,
                    exact_if_available: exact,
                });
            }
        }
        Param::Lambda1 => {
            if !matches!(args.measure, Measure::Inertia | Measure::Maxcorr) {
                return Err(CliError::Usage(
                    "--param lambda1 needs --measure inertia or maxcorr".into(),
                ));
            }
            let exact = joint.as_ref().map(bayes_error);
            for l1 in grid(args.from.unwrap_or(0.0), args.to.unwrap_or(1.0), args.steps) {
                if !(0.0..=1.0).contains(&l1) {
                    return Err(CliError::Input(format!("lambda1 {l1} outside [0, 1]")));
                }
                let value = match args.measure {
                    Measure::Inertia => {
                        let input = InertiaBoundInput::max_correlation_only(p.clone(), l1)
                            .map_err(input_err)?;
                        BoundValue::from_raw(theorem3_bound(&input).raw)
                    }
                    _ => maxcorr_bound(&p, l1.sqrt(), None)?.value,
                };
                rows.push(SweepRow {
                    param: l1,
                    bound_raw: value.raw,
                    bound_clamped: value.value,
                    exact_if_available: exact,
                });
            }
        }
        Param::M => {
            let lo = args.from.map_or(1, |v| v.max(1.0) as usize);
            let hi = args.to.map_or(p.len(), |v| (v as usize).min(p.len()));
            let theta = budget(args.theta, joint.as_ref(), args.measure)?;
            for m in lo..=hi {
                let e = function_bound(&p, theta, m, args.measure)?;
                let exact = match &joint {
                    Some(j) => exact_pe_m(j, m)?,
                    None => None,
                };
                rows.push(SweepRow {
                    param: m as f64,
                    bound_raw: e.value.raw,
                    bound_clamped: e.value.value,
                    exact_if_available: exact,
                });
            }
        }
    }
    match args.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["param", "bound_raw", "bound_clamped", "exact_if_available"])?;
            for r in &rows {
                w.write_record([
                    r.param.to_string(),
                    r.bound_raw.to_string(),
                    r.bound_clamped.to_string(),
                    r.exact_if_available
                        .map(|v| v.to_string())
                        .unwrap_or_default(),
                ])?;
            }
            w.flush()?;
        }
        format => {
            let body = serde_json::json!({
                "measure": args.measure,
                "param": args.param,
                "rows": to_value(&rows),
            });
            emit(out, &envelope("sweep", &body)?, format)?;
        }
    }
    Ok(0)
}
