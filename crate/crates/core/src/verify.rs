//! Seeded verification sweeps. Every instance draws from its own generator so
//! the report does not depend on how many workers run it.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::{
    instance_seed, random_degradation, random_joint_with, random_probability_vector,
    random_stochastic, seeded_rng, JointDistribution, ProbabilityVector,
};
use crate::error::Result;
use crate::error_rate::{entropy, mix_permutations, mutual_information, schur_probe, NamedBound};
use crate::fn_bounds::{pe_m_bound, pe_m_bruteforce, FunctionMeasure};
use crate::inertia::{
    ace_maxcorr, chi_squared_direct, decompose, leading_singular_value, total_inertia_spatial,
};
use crate::oracle::{certify_bounds, convexity_probe, dpi_verify};
use crate::pe_bounds::{f0_star, lp_sigma_oracle, InertiaBoundInput};

/// Tolerance of every identity and inequality except the ACE agreement.
pub const CHECK_TOL: f64 = 1e-9;
/// Allowed gap between ACE and `sqrt(lambda_1)`.
pub const ACE_TOL: f64 = 1e-6;
const ACE_ITER_TOL: f64 = 1e-13;
const ACE_MAX_ITER: usize = 200_000;
const CONCENTRATION: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    Soundness,
    LpDuality,
    Decomposition,
    Dpi,
    Convexity,
    Schur,
    Functions,
}

impl Sweep {
    pub const ALL: [Sweep; 7] = [
        Sweep::Soundness,
        Sweep::LpDuality,
        Sweep::Decomposition,
        Sweep::Dpi,
        Sweep::Convexity,
        Sweep::Schur,
        Sweep::Functions,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Sweep::Soundness => "soundness",
            Sweep::LpDuality => "lp_duality",
            Sweep::Decomposition => "decomposition",
            Sweep::Dpi => "dpi",
            Sweep::Convexity => "convexity",
            Sweep::Schur => "schur",
            Sweep::Functions => "functions",
        }
    }

    fn stream(self) -> u64 {
        self as u64 + 1
    }

    /// Instances of this sweep for a budget of `n`.
    pub fn instances(self, n: usize) -> usize {
        let scaled = match self {
            Sweep::Soundness | Sweep::LpDuality => n,
            Sweep::Decomposition | Sweep::Schur | Sweep::Functions => n / 5,
            Sweep::Dpi => n / 2,
            Sweep::Convexity => n / 10,
        };
        if n > 0 {
            scaled.max(1)
        } else {
            0
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub seed: u64,
    pub instances: usize,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
    pub sweeps: Vec<Sweep>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            instances: 1000,
            jobs: 0,
            sweeps: Sweep::ALL.to_vec(),
        }
    }
}

/// One failed check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub sweep: &'static str,
    pub instance: usize,
    pub check: String,
    /// The side that must be larger (or equal, for identities).
    pub expected: f64,
    pub observed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub sweep: &'static str,
    pub instances: usize,
    pub checks: usize,
    pub violations: usize,
    /// Largest amount by which any check missed, 0 if none did.
    pub worst_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub instances: usize,
    pub sweeps: Vec<SweepSummary>,
    pub violations: Vec<Violation>,
    pub passed: bool,
}

#[derive(Default)]
struct Outcome {
    checks: usize,
    worst_excess: f64,
    failures: Vec<(String, f64, f64)>,
}

impl Outcome {
    /// `lower <= upper + tol`.
    fn at_most(&mut self, check: impl Into<String>, lower: f64, upper: f64, tol: f64) {
        self.checks += 1;
        let excess = lower - upper;
        if excess > tol || excess.is_nan() {
            self.worst_excess = self.worst_excess.max(excess);
            self.failures.push((check.into(), upper, lower));
        }
    }

    fn close(&mut self, check: impl Into<String>, expected: f64, observed: f64, tol: f64) {
        self.checks += 1;
        let excess = (expected - observed).abs();
        if excess > tol || excess.is_nan() {
            self.worst_excess = self.worst_excess.max(excess);
            self.failures.push((check.into(), expected, observed));
        }
    }

    fn error(&mut self, check: &str, err: crate::Error) {
        self.checks += 1;
        self.failures
            .push((format!("{check}: {err}"), f64::NAN, f64::NAN));
    }

    fn absorb<T>(&mut self, check: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.error(check, e);
                None
            }
        }
    }
}

fn dims<R: Rng + ?Sized>(rng: &mut R, lo: usize, hi: usize) -> (usize, usize) {
    (rng.random_range(lo..=hi), rng.random_range(lo..=hi))
}

fn sorted_lambdas<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    let mut l: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
    l.sort_by(|a, b| b.total_cmp(a));
    l
}

fn soundness(rng: &mut impl Rng) -> Outcome {
    let mut out = Outcome::default();
    let (m, n) = dims(rng, 2, 6);
    let joint = random_joint_with(rng, m, n, CONCENTRATION);
    if let Some(report) = out.absorb("certify", certify_bounds(&joint)) {
        for c in report.certified_bounds {
            out.at_most(c.name, c.bound, c.exact, CHECK_TOL);
        }
    }
    out
}

fn lp_duality(rng: &mut impl Rng) -> Outcome {
    let mut out = Outcome::default();
    let m = rng.random_range(2..=6);
    let p = random_probability_vector(rng, m, CONCENTRATION)
        .canonical()
        .0;
    let lambdas = sorted_lambdas(rng, m - 1);
    let Some(input) = out.absorb("input", InertiaBoundInput::new(p, lambdas)) else {
        return out;
    };
    if let Some(cert) = out.absorb("lp", lp_sigma_oracle(&input)) {
        let closed = f0_star(&input);
        out.close("primal=f0*", closed, cert.primal, CHECK_TOL);
        out.close("dual=f0*", closed, cert.dual, CHECK_TOL);
    }
    out
}

fn decomposition(rng: &mut impl Rng) -> Outcome {
    let mut out = Outcome::default();
    let (m, n) = dims(rng, 2, 6);
    let joint = random_joint_with(rng, m, n, CONCENTRATION);
    let Some(dec) = out.absorb("decompose", decompose(&joint)) else {
        return out;
    };
    if let Some(s) = out.absorb("leading", leading_singular_value(&joint)) {
        out.close("leading_singular_value", 1.0, s, CHECK_TOL);
    }
    if let Some(chi2) = out.absorb("chi2", chi_squared_direct(&joint)) {
        out.close("J_d=chi2", chi2, dec.total_inertia(), CHECK_TOL);
        if let Some(spatial) = out.absorb("spatial", total_inertia_spatial(&joint)) {
            out.close("spatial=chi2", chi2, spatial, CHECK_TOL);
        }
    }
    if let Some(ace) = out.absorb("ace", ace_maxcorr(&joint, ACE_ITER_TOL, ACE_MAX_ITER)) {
        out.close("ace=rho", dec.max_correlation(), ace, ACE_TOL);
    }
    out
}

fn dpi(rng: &mut impl Rng) -> Outcome {
    let mut out = Outcome::default();
    let (m, n) = dims(rng, 2, 6);
    let m_out = rng.random_range(1..=6);
    let joint = random_joint_with(rng, m, n, CONCENTRATION);
    let map = random_degradation(rng, m_out, m, CONCENTRATION);
    if let Some(report) = out.absorb("dpi", dpi_verify(&joint, &map)) {
        for c in report.certified_bounds {
            out.at_most(c.name, c.bound, c.exact, CHECK_TOL);
        }
    }
    out
}

fn convexity(rng: &mut impl Rng) -> Outcome {
    let mut out = Outcome::default();
    let (m, n) = dims(rng, 2, 6);
    let p = random_probability_vector(rng, m, CONCENTRATION);
    let w0 = random_stochastic(rng, m, n, CONCENTRATION);
    let w1 = random_stochastic(rng, m, n, CONCENTRATION);
    let grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let d = m.min(n) - 1;
    let mut ks = vec![1, d];
    ks.dedup();
    for k in ks {
        if let Some(report) = out.absorb("convexity", convexity_probe(&p, &w0, &w1, &grid, k)) {
            for c in report.certified_bounds {
                out.at_most(format!("k={k} {}", c.name), c.bound, c.exact, CHECK_TOL);
            }
        }
    }
    out
}

fn schur(rng: &mut impl Rng) -> Outcome {
    let mut out = Outcome::default();
    let m = rng.random_range(2..=6);
    let (p, q) = majorization_pair(rng, m);
    let h = entropy(&p);
    let pairs = [(p, q)];
    let bound = NamedBound::Fano;
    for theta in [0.0, 0.25 * h, 0.5 * h] {
        if let Some(report) = out.absorb(bound.name(), schur_probe(bound, &pairs, theta)) {
            out.checks += report.checked;
            for v in report.violations {
                out.worst_excess = out.worst_excess.max(v.bound_p - v.bound_q);
                out.failures.push((
                    format!("{} theta={theta}", bound.name()),
                    v.bound_p,
                    v.bound_q,
                ));
            }
        }
    }
    out
}

fn functions(rng: &mut impl Rng) -> Outcome {
    let mut out = Outcome::default();
    let (m, n) = dims(rng, 2, 5);
    let joint = random_joint_with(rng, m, n, CONCENTRATION);
    check_function_bounds(&joint, &mut out);
    out
}

fn check_function_bounds(joint: &JointDistribution, out: &mut Outcome) {
    let Some(dec) = out.absorb("decompose", decompose(joint)) else {
        return;
    };
    let rho = dec.max_correlation();
    let info = mutual_information(joint);
    let p = joint.row_marginal().canonical().0;
    for range in [2, 3].into_iter().filter(|&r| r <= joint.rows()) {
        let Some(exact) = out.absorb("bruteforce", pe_m_bruteforce(joint, range)) else {
            continue;
        };
        for (measure, theta, label) in [
            (FunctionMeasure::MaxCorrelation, rho, "maxcorr"),
            (FunctionMeasure::MutualInformation, info, "mi"),
        ] {
            if let Some(b) = out.absorb(label, pe_m_bound(&p, theta, range, measure)) {
                out.at_most(
                    format!("M={range} {label}"),
                    b.value,
                    exact.value,
                    CHECK_TOL,
                );
            }
        }
    }
}

fn run_instance(sweep: Sweep, seed: u64, index: usize) -> Outcome {
    let mut rng = seeded_rng(instance_seed(seed, sweep.stream(), index as u64));
    match sweep {
        Sweep::Soundness => soundness(&mut rng),
        Sweep::LpDuality => lp_duality(&mut rng),
        Sweep::Decomposition => decomposition(&mut rng),
        Sweep::Dpi => dpi(&mut rng),
        Sweep::Convexity => convexity(&mut rng),
        Sweep::Schur => schur(&mut rng),
        Sweep::Functions => functions(&mut rng),
    }
}

fn run_sweep(sweep: Sweep, config: &VerifyConfig) -> (SweepSummary, Vec<Violation>) {
    let count = sweep.instances(config.instances);
    let outcomes: Vec<Outcome> = (0..count)
        .into_par_iter()
        .map(|i| run_instance(sweep, config.seed, i))
        .collect();
    let mut summary = SweepSummary {
        sweep: sweep.name(),
        instances: count,
        checks: 0,
        violations: 0,
        worst_excess: 0.0,
    };
    let mut violations = Vec::new();
    for (instance, o) in outcomes.into_iter().enumerate() {
        summary.checks += o.checks;
        summary.worst_excess = summary.worst_excess.max(o.worst_excess);
        for (check, expected, observed) in o.failures {
            violations.push(Violation {
                sweep: sweep.name(),
                instance,
                check,
                expected,
                observed,
            });
        }
    }
    summary.violations = violations.len();
    (summary, violations)
}

/// Runs the selected sweeps on a pool of `config.jobs` workers.
pub fn run_verification(config: &VerifyConfig) -> VerifyReport {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .expect("thread pool");
    pool.install(|| {
        let mut sweeps = Vec::new();
        let mut violations = Vec::new();
        for &sweep in &config.sweeps {
            let (s, v) = run_sweep(sweep, config);
            sweeps.push(s);
            violations.extend(v);
        }
        VerifyReport {
            seed: config.seed,
            instances: config.instances,
            passed: violations.is_empty(),
            sweeps,
            violations,
        }
    })
}

/// Every function-bound check for one joint, exposed for exhaustive tests.
pub fn function_bound_violations(joint: &JointDistribution) -> Vec<String> {
    let mut out = Outcome::default();
    check_function_bounds(joint, &mut out);
    out.failures.into_iter().map(|(c, _, _)| c).collect()
}

/// Builds a majorization pair `(p, q)` with `p` majorizing `q`.
pub fn majorization_pair<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
) -> (ProbabilityVector, ProbabilityVector) {
    let p = random_probability_vector(rng, m, CONCENTRATION)
        .canonical()
        .0;
    let terms = rng.random_range(1..=4);
    let q = mix_permutations(rng, &p, terms);
    (p, q)
}
