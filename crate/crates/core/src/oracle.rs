//! Exact ground truth used to certify the bounds, and empirical checks of the
//! data-processing and convexity properties of the principal inertias.

use serde::Serialize;

use crate::dist::{
    degrade, pushforward, DegradationMap, JointDistribution, ProbabilityVector, StochasticMatrix,
    Surjection,
};
use crate::error::{Error, Result};
use crate::inertia::{channel_k_correlation, decompose};
use crate::pe_bounds::{
    advantage_bound, corollary_maxcorr_bound, theorem3_bound, InertiaBoundInput,
};

/// Slack below which a certified entry counts as a violation.
pub const CERTIFY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

/// A bound next to the exact value it must not exceed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifiedBound {
    pub name: String,
    pub exact: f64,
    pub bound: f64,
    /// `exact - bound`.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub quantity: NamedValue,
    pub certified_bounds: Vec<CertifiedBound>,
    pub violations: Vec<CertifiedBound>,
}

impl OracleReport {
    fn new(quantity: NamedValue) -> Self {
        Self {
            quantity,
            certified_bounds: Vec::new(),
            violations: Vec::new(),
        }
    }

    fn certify(&mut self, name: impl Into<String>, exact: f64, bound: f64) {
        let entry = CertifiedBound {
            name: name.into(),
            exact,
            bound,
            slack: exact - bound,
        };
        if entry.slack < -CERTIFY_TOL {
            self.violations.push(entry.clone());
        }
        self.certified_bounds.push(entry);
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `1 - sum_y max_x p(x, y)`, the error of the maximum-likelihood guess.
pub fn bayes_error(joint: &JointDistribution) -> f64 {
    let mut best: Vec<f64> = joint
        .matrix()
        .column_iter()
        .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    // summing in sorted order makes the result independent of column order
    best.sort_by(f64::total_cmp);
    (1.0 - best.iter().sum::<f64>()).max(0.0)
}

/// Bayes error of estimating `f(X)` from `Y`.
pub fn function_bayes_error(joint: &JointDistribution, f: &Surjection) -> Result<f64> {
    Ok(bayes_error(&pushforward(joint, f)?))
}

/// Bayes error of `joint` against every bound that needs only `p_X` and the
/// inertias.
pub fn certify_bounds(joint: &JointDistribution) -> Result<OracleReport> {
    let exact = bayes_error(joint);
    let mut report = OracleReport::new(NamedValue {
        name: "bayes_error".into(),
        value: exact,
    });
    let input = InertiaBoundInput::from_joint(joint)?;
    let p = input.p().clone();
    let lambda1 = input.lambdas().first().copied().unwrap_or(0.0);
    report.certify("theorem3", exact, theorem3_bound(&input).lower_bound);
    let mc = corollary_maxcorr_bound(&p, lambda1, None)?;
    report.certify("maxcorr_optimized", exact, mc.value);
    report.certify("maxcorr_weak", exact, mc.weak_value);
    // |1 - p(1) - P_e| <= advantage bound, checked as a lower bound on P_e
    let blind = 1.0 - p.get(0);
    report.certify("advantage", exact, blind - advantage_bound(&p, lambda1));
    Ok(report)
}

fn padded(lambdas: &[f64], len: usize) -> Vec<f64> {
    let mut v = lambdas.to_vec();
    v.resize(len, 0.0);
    v
}

/// Compares the inertias of `joint` and of `degrade(joint, map)` componentwise.
pub fn dpi_verify(joint: &JointDistribution, map: &DegradationMap) -> Result<OracleReport> {
    let before = decompose(joint)?;
    let after_joint = degrade(joint, map)?;
    let after = decompose(&after_joint)?;
    let len = before.d().max(after.d());
    let lb = padded(before.lambdas(), len);
    let la = padded(after.lambdas(), len);
    let mut report = OracleReport::new(NamedValue {
        name: "total_inertia".into(),
        value: before.total_inertia(),
    });
    for (i, (b, a)) in lb.iter().zip(&la).enumerate() {
        report.certify(format!("lambda_{}", i + 1), *b, *a);
    }
    Ok(report)
}

/// Checks `J_k(p, t W0 + (1-t) W1) <= t J_k(p, W0) + (1-t) J_k(p, W1)` on a
/// grid of mixture weights.
pub fn convexity_probe(
    p: &ProbabilityVector,
    w0: &StochasticMatrix,
    w1: &StochasticMatrix,
    t_grid: &[f64],
    k: usize,
) -> Result<OracleReport> {
    if w0.shape() != w1.shape() || w0.shape().0 != p.len() {
        return Err(Error::ShapeMismatch(format!(
            "channels {:?} and {:?} for input of size {}",
            w0.shape(),
            w1.shape(),
            p.len()
        )));
    }
    let j0 = channel_k_correlation(p, w0, k)?;
    let j1 = channel_k_correlation(p, w1, k)?;
    let mut report = OracleReport::new(NamedValue {
        name: format!("J_{k}"),
        value: j0,
    });
    for &t in t_grid {
        let mixed = channel_k_correlation(p, &w0.mix(w1, t)?, k)?;
        report.certify(format!("t={t}"), t * j0 + (1.0 - t) * j1, mixed);
    }
    Ok(report)
}
