//! Lower bounds on the Bayes error `P_e` from `p_X` and principal inertias.
//!
//! All routines expect `p` sorted in non-increasing order. Supplied inertias
//! are read as componentwise upper bounds on the true ones.

use serde::Serialize;

use crate::dist::{JointDistribution, ProbabilityVector};
use crate::error::{Error, Result};
use crate::inertia::decompose;
use crate::BoundValue;

/// Slack allowed in the `p(k) >= p^T p` test that defines `k*`. At a tie the
/// slope of `f0` in `alpha` vanishes, so either choice gives the same `f0*`.
const KSTAR_TOL: f64 = 1e-12;

/// Marginal `p` (canonical, length `m`) and `m - 1` inertia upper bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InertiaBoundInput {
    p: ProbabilityVector,
    lambdas: Vec<f64>,
}

impl InertiaBoundInput {
    /// Requires exactly `m - 1` non-increasing values in `[0, 1]`.
    pub fn new(p: ProbabilityVector, lambdas: Vec<f64>) -> Result<Self> {
        if !p.is_canonical() {
            return Err(Error::NotCanonical);
        }
        let expected = p.len() - 1;
        if lambdas.len() != expected {
            return Err(Error::InvalidInertias(format!(
                "expected {expected} values, got {}",
                lambdas.len()
            )));
        }
        let mut clean = Vec::with_capacity(lambdas.len());
        for (i, &l) in lambdas.iter().enumerate() {
            if !l.is_finite() || !(-1e-9..=1.0 + 1e-9).contains(&l) {
                return Err(Error::InvalidInertias(format!("lambda_{} = {l}", i + 1)));
            }
            clean.push(l.clamp(0.0, 1.0));
        }
        if clean.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidInertias(
                "values must be non-increasing".into(),
            ));
        }
        Ok(Self { p, lambdas: clean })
    }

    /// Only the leading components are known; the rest are zero.
    pub fn padded(p: ProbabilityVector, top: &[f64]) -> Result<Self> {
        let d = p.len() - 1;
        if top.len() > d {
            return Err(Error::InvalidInertias(format!(
                "{} values supplied for {d} components",
                top.len()
            )));
        }
        let mut lambdas = top.to_vec();
        lambdas.resize(d, 0.0);
        Self::new(p, lambdas)
    }

    /// Only the maximal correlation is known; every component is bounded by
    /// `lambda_1`.
    pub fn max_correlation_only(p: ProbabilityVector, lambda1: f64) -> Result<Self> {
        let d = p.len() - 1;
        Self::new(p, vec![lambda1; d])
    }

    /// Canonical marginal and zero-padded inertias of a joint distribution.
    pub fn from_joint(joint: &JointDistribution) -> Result<Self> {
        let dec = decompose(joint)?;
        let (p, _) = joint.row_marginal().canonical();
        Self::padded(p, dec.lambdas())
    }

    pub fn p(&self) -> &ProbabilityVector {
        &self.p
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// `lambda_i` with 1-based index, `lambda_0 = 1` and `lambda_m = 0`.
    fn lambda(&self, i: usize) -> f64 {
        if i == 0 {
            1.0
        } else {
            self.lambdas.get(i - 1).copied().unwrap_or(0.0)
        }
    }
}

/// Bound value together with the certificate of how it was reached.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundResult {
    /// `max(0, 1 - u1)`.
    pub lower_bound: f64,
    /// `1 - u1` before clamping.
    pub raw: f64,
    pub beta_star: f64,
    pub alpha_star: f64,
    pub k_star: usize,
    pub f0_star: f64,
    pub u1: f64,
}

/// Largest 1-based `k` with `p(k) >= p^T p`.
pub fn kstar(p: &ProbabilityVector) -> usize {
    let pp = p.sum_of_squares();
    p.as_slice()
        .iter()
        .rposition(|&pk| pk - pp >= -KSTAR_TOL)
        .map_or(1, |i| i + 1)
}

fn positive_part(x: f64) -> f64 {
    x.max(0.0)
}

/// `f0(alpha, p, lambda)` with `c_i = [lambda_i - alpha]^+` and `c_m = 0`.
pub fn f0(alpha: f64, input: &InertiaBoundInput) -> f64 {
    let p = input.p.as_slice();
    let m = p.len();
    let c = |i: usize| -> f64 {
        // 1-based, c_m = 0
        if i >= m {
            0.0
        } else {
            positive_part(input.lambda(i) - alpha)
        }
    };
    let mut total = p[0] * (c(1) + alpha) - alpha * input.p.sum_of_squares();
    for i in 2..=m {
        total += p[i - 1] * (input.lambda(i - 1) + c(i) - c(i - 1));
    }
    total
}

/// Closed-form minimum of `f0` over `alpha`.
pub fn f0_star(input: &InertiaBoundInput) -> f64 {
    let p = input.p.as_slice();
    let m = p.len();
    let k = kstar(&input.p);
    let head: f64 = (1..=k).map(|i| input.lambda(i) * p[i - 1]).sum();
    let tail: f64 = (k + 1..=m).map(|i| input.lambda(i - 1) * p[i - 1]).sum();
    head + tail - input.lambda(k) * input.p.sum_of_squares()
}

fn u0(beta: f64, p: &[f64], f0_value: f64) -> f64 {
    let spread: f64 = p.iter().map(|&pi| positive_part(pi - beta).powi(2)).sum();
    beta + (f0_value + spread).max(0.0).sqrt()
}

/// Exact minimizer of `beta + sqrt(f0 + sum([p_i - beta]^+)^2)` over
/// `[0, beta_max]`.
///
/// Between consecutive breakpoints the active set `{i : p_i > beta}` is fixed,
/// so a stationary point satisfies `sum_active (p_i - beta) = sqrt(g0)`, a
/// quadratic in `beta`. The function is convex, so the best of the interval
/// roots and the breakpoints is the global minimum.
pub(crate) fn minimize_u0(p: &[f64], f0_value: f64, beta_max: f64) -> (f64, f64) {
    let mut breaks: Vec<f64> = vec![0.0, beta_max];
    breaks.extend(p.iter().copied().filter(|&pi| pi > 0.0 && pi < beta_max));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut candidates = breaks.clone();
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let active: Vec<f64> = p.iter().copied().filter(|&pi| pi >= hi).collect();
        let j = active.len() as f64;
        if active.len() < 2 {
            continue;
        }
        let s1: f64 = active.iter().sum();
        let s2: f64 = active.iter().map(|x| x * x).sum();
        // (j^2 - j) beta^2 - 2 (j - 1) s1 beta + (s1^2 - s2 - f0) = 0
        let a = j * (j - 1.0);
        let b = -2.0 * (j - 1.0) * s1;
        let c = s1 * s1 - s2 - f0_value;
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            continue;
        }
        let sq = disc.sqrt();
        for root in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
            if root > lo && root < hi && s1 - j * root >= 0.0 {
                candidates.push(root);
            }
        }
    }

    candidates
        .into_iter()
        .map(|beta| (beta, u0(beta, p, f0_value)))
        .fold((0.0, f64::INFINITY), |best, cur| {
            if cur.1 < best.1 {
                cur
            } else {
                best
            }
        })
}

fn second_largest(p: &ProbabilityVector) -> f64 {
    p.as_slice().get(1).copied().unwrap_or(0.0)
}

/// `P_e >= 1 - U_1(p, lambda)`.
pub fn theorem3_bound(input: &InertiaBoundInput) -> BoundResult {
    let k_star = kstar(&input.p);
    let f0_star = f0_star(input);
    let (beta_star, u1) = minimize_u0(input.p.as_slice(), f0_star, second_largest(&input.p));
    let raw = 1.0 - u1;
    BoundResult {
        lower_bound: raw.clamp(0.0, 1.0),
        raw,
        beta_star,
        alpha_star: input.lambda(k_star),
        k_star,
        f0_star,
        u1,
    }
}

/// Evidence available for a uniformly distributed `X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum UniformEvidence {
    ChiSquared(f64),
    /// Largest principal inertia `lambda_1 = rho_m^2`.
    Lambda1(f64),
}

/// Bound for uniform `X` on `m` symbols from either `chi^2` or `lambda_1`.
pub fn corollary_uniform_bound(m: usize, evidence: UniformEvidence) -> BoundValue {
    assert!(m >= 2, "uniform corollary needs at least two symbols");
    let mf = m as f64;
    let raw = match evidence {
        UniformEvidence::ChiSquared(chi2) => {
            1.0 - 1.0 / mf - ((mf - 1.0) * chi2.max(0.0)).sqrt() / mf
        }
        UniformEvidence::Lambda1(l1) => (1.0 - 1.0 / mf) * (1.0 - l1.max(0.0).sqrt()),
    };
    BoundValue::from_raw(raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaxCorrBound {
    /// Clamped bound at `beta` (given or optimized).
    pub value: f64,
    pub raw: f64,
    pub beta: f64,
    /// `1 - p(1) - rho_m sqrt(1 - p^T p)`, clamped.
    pub weak_value: f64,
    pub weak_raw: f64,
}

/// Bound from `p` and the largest principal inertia alone.
pub fn corollary_maxcorr_bound(
    p: &ProbabilityVector,
    lambda1: f64,
    beta: Option<f64>,
) -> Result<MaxCorrBound> {
    if !p.is_canonical() {
        return Err(Error::NotCanonical);
    }
    if !(0.0..=1.0).contains(&lambda1) {
        return Err(Error::InvalidInertias(format!("lambda_1 = {lambda1}")));
    }
    let spread = 1.0 - p.sum_of_squares();
    let f = lambda1 * spread;
    let (beta, u) = match beta {
        Some(b) if b >= 0.0 => (b, u0(b, p.as_slice(), f)),
        Some(b) => return Err(Error::InvalidInertias(format!("beta = {b} is negative"))),
        None => minimize_u0(p.as_slice(), f, second_largest(p)),
    };
    let raw = 1.0 - u;
    let weak_raw = 1.0 - p.get(0) - lambda1.sqrt() * spread.max(0.0).sqrt();
    Ok(MaxCorrBound {
        value: raw.clamp(0.0, 1.0),
        raw,
        beta,
        weak_value: weak_raw.clamp(0.0, 1.0),
        weak_raw,
    })
}

/// Upper bound `rho_m sqrt(1 - p^T p)` on `|1 - p(1) - P_e|`.
pub fn advantage_bound(p: &ProbabilityVector, lambda1: f64) -> f64 {
    lambda1.max(0.0).sqrt() * (1.0 - p.sum_of_squares()).max(0.0).sqrt()
}

/// Primal and dual optima of the `sigma` allocation program.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpCertificate {
    pub primal: f64,
    pub dual: f64,
    pub sigma: Vec<f64>,
    /// Minimizing `alpha` of the dual.
    pub alpha: f64,
}

/// Solves `max sum lambda_i sigma_i` subject to `sum sigma_i = 1 - p^T p` and
/// `p(i+1) <= sigma_i <= p(i)` by greedy allocation, and evaluates the dual
/// at `y_i = [lambda_i - alpha]^+` over the breakpoints of `alpha`.
pub fn lp_sigma_oracle(input: &InertiaBoundInput) -> Result<LpCertificate> {
    const BOX_TOL: f64 = 1e-12;
    let p = input.p.as_slice();
    let d = p.len() - 1;
    let pp = input.p.sum_of_squares();
    let budget = 1.0 - pp;
    let lower_sum: f64 = p[1..].iter().sum();
    let upper_sum: f64 = p[..d].iter().sum();
    if lower_sum > budget + BOX_TOL || upper_sum < budget - BOX_TOL {
        return Err(Error::InfeasibleBox {
            budget,
            lower: lower_sum,
            upper: upper_sum,
        });
    }

    // start at the lower bounds, then top up in order of decreasing lambda
    let mut sigma: Vec<f64> = p[1..].to_vec();
    let mut remaining = (budget - lower_sum).max(0.0);
    for i in 0..d {
        let room = p[i] - p[i + 1];
        let take = room.min(remaining);
        sigma[i] += take;
        remaining -= take;
    }
    let primal = sigma.iter().zip(&input.lambdas).map(|(s, l)| s * l).sum();

    let dual_at = |alpha: f64| -> f64 {
        let mut total = alpha * (p[0] - pp);
        for i in 0..d {
            let delta = p[i] - p[i + 1];
            total += delta * positive_part(input.lambdas[i] - alpha) + input.lambdas[i] * p[i + 1];
        }
        total
    };
    let mut alphas = vec![0.0, 1.0];
    alphas.extend_from_slice(&input.lambdas);
    let (alpha, dual) =
        alphas
            .into_iter()
            .map(|a| (a, dual_at(a)))
            .fold((0.0, f64::INFINITY), |best, cur| {
                if cur.1 < best.1 {
                    cur
                } else {
                    best
                }
            });

    Ok(LpCertificate {
        primal,
        dual,
        sigma,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pv(v: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new(v.to_vec()).unwrap()
    }

    fn worked() -> InertiaBoundInput {
        InertiaBoundInput::new(pv(&[0.7, 0.2, 0.1]), vec![0.5, 0.3]).unwrap()
    }

    #[test]
    fn kstar_examples() {
        assert_eq!(kstar(&ProbabilityVector::uniform(4)), 4);
        assert_eq!(kstar(&pv(&[0.7, 0.2, 0.1])), 1);
        assert_eq!(kstar(&pv(&[0.5, 0.5])), 2);
        assert_eq!(kstar(&ProbabilityVector::uniform(3)), 3);
    }

    #[test]
    fn f0_examples() {
        let zero = InertiaBoundInput::new(pv(&[0.6, 0.3, 0.1]), vec![0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(f0(0.0, &zero), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f0(0.5, &worked()), 0.21, epsilon = 1e-12);

        // alpha = 1: every c_i vanishes
        let inp = worked();
        let p = inp.p().as_slice();
        let expected = 0.5 * p[1] + 0.3 * p[2] + p[0] - inp.p().sum_of_squares();
        assert_abs_diff_eq!(f0(1.0, &inp), expected, epsilon = 1e-15);
    }

    #[test]
    fn f0_star_examples() {
        assert_abs_diff_eq!(f0_star(&worked()), 0.21, epsilon = 1e-12);
        let zero = InertiaBoundInput::padded(pv(&[0.6, 0.3, 0.1]), &[]).unwrap();
        assert_eq!(f0_star(&zero), 0.0);
        let uni =
            InertiaBoundInput::new(ProbabilityVector::uniform(4), vec![0.6, 0.3, 0.2]).unwrap();
        assert_abs_diff_eq!(f0_star(&uni), 1.1 / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn lp_examples() {
        let cert = lp_sigma_oracle(&worked()).unwrap();
        assert_abs_diff_eq!(cert.sigma[0], 0.36, epsilon = 1e-12);
        assert_abs_diff_eq!(cert.sigma[1], 0.10, epsilon = 1e-12);
        assert_abs_diff_eq!(cert.primal, 0.21, epsilon = 1e-12);
        assert_abs_diff_eq!(cert.dual, 0.21, epsilon = 1e-12);

        let uni = InertiaBoundInput::new(ProbabilityVector::uniform(3), vec![0.6, 0.2]).unwrap();
        let cert = lp_sigma_oracle(&uni).unwrap();
        assert_abs_diff_eq!(cert.sigma[0], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cert.sigma[1], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cert.primal, 0.8 / 3.0, epsilon = 1e-12);

        let zero = InertiaBoundInput::padded(pv(&[0.5, 0.3, 0.2]), &[]).unwrap();
        assert_eq!(lp_sigma_oracle(&zero).unwrap().primal, 0.0);
    }

    #[test]
    fn theorem3_extreme_spectra() {
        let p = pv(&[0.5, 0.3, 0.15, 0.05]);
        let ones = InertiaBoundInput::max_correlation_only(p.clone(), 1.0).unwrap();
        assert_abs_diff_eq!(theorem3_bound(&ones).lower_bound, 0.0, epsilon = 1e-12);
        let zeros = InertiaBoundInput::padded(p, &[]).unwrap();
        assert_abs_diff_eq!(theorem3_bound(&zeros).lower_bound, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn theorem3_worked_instance() {
        let r = theorem3_bound(&worked());
        // grid minimization over beta in [0, 0.2] at step 1e-6
        let p = [0.7, 0.2, 0.1];
        let mut best = f64::INFINITY;
        for step in 0..=200_000 {
            let beta = step as f64 * 1e-6;
            best = best.min(u0(beta, &p, 0.21));
        }
        assert!((r.u1 - best).abs() < 1e-9);
        assert!(r.u1 <= best);
        assert_abs_diff_eq!(r.beta_star, 0.0698, epsilon = 1e-3);
        assert_abs_diff_eq!(r.u1, 0.860, epsilon = 1e-3);
        assert_abs_diff_eq!(r.lower_bound, 0.140, epsilon = 1e-3);
        assert_eq!(r.k_star, 1);
        assert_abs_diff_eq!(r.alpha_star, 0.5, epsilon = 0.0);
    }

    #[test]
    fn single_symbol_is_trivial() {
        let inp = InertiaBoundInput::padded(pv(&[1.0]), &[]).unwrap();
        let r = theorem3_bound(&inp);
        assert_abs_diff_eq!(r.lower_bound, 0.0, epsilon = 1e-15);
        assert_eq!(lp_sigma_oracle(&inp).unwrap().primal, 0.0);
    }

    #[test]
    fn input_validation() {
        assert_eq!(
            InertiaBoundInput::new(pv(&[0.2, 0.8]), vec![0.1]),
            Err(Error::NotCanonical)
        );
        assert!(InertiaBoundInput::new(pv(&[0.8, 0.2]), vec![0.1, 0.1]).is_err());
        assert!(InertiaBoundInput::new(pv(&[0.6, 0.3, 0.1]), vec![0.1, 0.2]).is_err());
        assert!(InertiaBoundInput::new(pv(&[0.8, 0.2]), vec![1.5]).is_err());
    }

    #[test]
    fn uniform_corollary_values() {
        use UniformEvidence::*;
        assert_abs_diff_eq!(
            corollary_uniform_bound(4, ChiSquared(0.0)).value,
            0.75,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            corollary_uniform_bound(4, ChiSquared(1.0)).value,
            0.75 - 3f64.sqrt() / 4.0,
            epsilon = 1e-12
        );
        let full = corollary_uniform_bound(4, ChiSquared(3.0));
        assert_abs_diff_eq!(full.value, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            corollary_uniform_bound(2, Lambda1(0.64)).value,
            0.1,
            epsilon = 1e-12
        );
    }

    #[test]
    fn maxcorr_corollary_values() {
        let b = corollary_maxcorr_bound(&pv(&[0.5, 0.5]), 0.0, Some(0.5)).unwrap();
        assert_abs_diff_eq!(b.value, 0.5, epsilon = 1e-12);
        let b = corollary_maxcorr_bound(&pv(&[0.6, 0.3, 0.1]), 1.0, None).unwrap();
        assert_abs_diff_eq!(b.value, 0.0, epsilon = 1e-12);
        assert_eq!(b.weak_value, 0.0);
        assert!(corollary_maxcorr_bound(&pv(&[0.3, 0.7]), 0.1, None).is_err());
    }

    #[test]
    fn advantage_values() {
        assert_eq!(advantage_bound(&pv(&[0.7, 0.3]), 0.0), 0.0);
        assert_abs_diff_eq!(
            advantage_bound(&pv(&[0.5, 0.5]), 0.64),
            0.8 * 0.5f64.sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            advantage_bound(&pv(&[0.5, 0.5]), 1.0),
            0.5f64.sqrt(),
            epsilon = 1e-12
        );
    }
}
