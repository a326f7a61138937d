//! Error-rate functions: the smallest Hamming distortion reachable by a channel
//! whose information measure stays within a budget `theta`.
//!
//! Mutual-information quantities are in bits.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::dist::{JointDistribution, ProbabilityVector};
use crate::error::{Error, Result};

/// `-sum p_i log2 p_i` with `0 log 0 = 0`.
pub fn entropy(p: &ProbabilityVector) -> f64 {
    p.as_slice()
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.log2())
        .sum()
}

pub fn binary_entropy(d: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    term(d) + term(1.0 - d)
}

/// `I(X;Y)` in bits, computed cell by cell.
pub fn mutual_information(joint: &JointDistribution) -> f64 {
    let px = joint.row_marginal();
    let py = joint.col_marginal();
    let mut total = 0.0;
    for i in 0..joint.rows() {
        for j in 0..joint.cols() {
            let pij = joint.get(i, j);
            if pij > 0.0 {
                total += pij * (pij / (px.get(i) * py.get(j))).log2();
            }
        }
    }
    total.max(0.0)
}

/// Smallest `d` in `[0, 1 - 1/M]` with `h_b(d) + d log2(M - 1) = max(H(p) - theta, 0)`,
/// where `M = p.len()`. A one-symbol alphabet yields `DegenerateSupport`; the
/// error rate there is zero.
pub fn fano_error_rate(p: &ProbabilityVector, theta: f64) -> Result<f64> {
    if theta < 0.0 {
        return Err(Error::NegativeTheta(theta));
    }
    let m = p.len();
    if m < 2 {
        return Err(Error::DegenerateSupport);
    }
    let target = (entropy(p) - theta).max(0.0);
    if target == 0.0 {
        return Ok(0.0);
    }
    let log_rest = ((m - 1) as f64).log2();
    let phi = |d: f64| binary_entropy(d) + d * log_rest;
    let (mut lo, mut hi) = (0.0, 1.0 - 1.0 / m as f64);
    // phi peaks at hi with zero slope, so rounding in H(p) for a uniform p
    // would otherwise shift the root by ~1e-8
    if phi(hi) <= target + 1e-14 {
        return Ok(hi);
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// True iff `p` majorizes `q`: every prefix sum of sorted `p` is at least the
/// matching prefix sum of sorted `q`, and the totals agree.
pub fn majorizes(q: &ProbabilityVector, p: &ProbabilityVector) -> Result<bool> {
    const TOL: f64 = 1e-9;
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: q.len(),
            right: p.len(),
        });
    }
    let (ps, _) = p.canonical();
    let (qs, _) = q.canonical();
    let (mut sp, mut sq) = (0.0, 0.0);
    for (a, b) in ps.as_slice().iter().zip(qs.as_slice()) {
        sp += a;
        sq += b;
        if sp < sq - TOL {
            return Ok(false);
        }
    }
    Ok((sp - sq).abs() <= TOL)
}

/// Convex combination of random permutations of `p`, sorted. The result is
/// majorized by `p`.
pub fn mix_permutations<R: Rng + ?Sized>(
    rng: &mut R,
    p: &ProbabilityVector,
    terms: usize,
) -> ProbabilityVector {
    let m = p.len();
    let weights = crate::dist::dirichlet(rng, terms.max(1), 1.0);
    let mut mixed = vec![0.0; m];
    let mut perm: Vec<usize> = (0..m).collect();
    for w in weights {
        perm.shuffle(rng);
        for (slot, &src) in perm.iter().enumerate() {
            mixed[slot] += w * p.get(src);
        }
    }
    let total: f64 = mixed.iter().sum();
    for v in &mut mixed {
        *v /= total;
    }
    let q = ProbabilityVector::new(mixed).expect("mixture of pmfs is a pmf");
    q.canonical().0
}

/// Lower-bound functions `L(p, theta)` that the Schur probe can check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NamedBound {
    /// `fano_error_rate(p, theta)` with theta in bits.
    Fano,
    /// `max(0, 1 - p(1) - theta sqrt(1 - p^T p))` with theta bounding `rho_m`.
    MaxCorrelation,
}

impl NamedBound {
    pub fn evaluate(self, p: &ProbabilityVector, theta: f64) -> Result<f64> {
        match self {
            NamedBound::Fano => match fano_error_rate(p, theta) {
                Err(Error::DegenerateSupport) => Ok(0.0),
                other => other,
            },
            NamedBound::MaxCorrelation => {
                let raw = 1.0 - p.max() - theta * (1.0 - p.sum_of_squares()).max(0.0).sqrt();
                Ok(raw.clamp(0.0, 1.0))
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NamedBound::Fano => "fano_error_rate",
            NamedBound::MaxCorrelation => "maxcorr_weak",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchurViolation {
    pub index: usize,
    pub bound_p: f64,
    pub bound_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchurReport {
    pub bound: &'static str,
    pub theta: f64,
    pub checked: usize,
    pub violations: Vec<SchurViolation>,
}

/// Checks `L(q, theta) >= L(p, theta) - 1e-9` for every pair where `p`
/// majorizes `q`.
pub fn schur_probe(
    bound: NamedBound,
    pairs: &[(ProbabilityVector, ProbabilityVector)],
    theta: f64,
) -> Result<SchurReport> {
    let mut violations = Vec::new();
    for (index, (p, q)) in pairs.iter().enumerate() {
        if !majorizes(q, p)? {
            return Err(Error::NotAMajorizationPair { index });
        }
        let bound_p = bound.evaluate(p, theta)?;
        let bound_q = bound.evaluate(q, theta)?;
        if bound_q < bound_p - 1e-9 {
            violations.push(SchurViolation {
                index,
                bound_p,
                bound_q,
            });
        }
    }
    Ok(SchurReport {
        bound: bound.name(),
        theta,
        checked: pairs.len(),
        violations,
    })
}

/// Parameters of the log-barrier method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    /// Stop once `(#inequalities) / t` is below this. If a late stage cannot
    /// be centered, the last centered stage is returned when its gap is
    /// below the square root of this.
    pub target_gap: f64,
    /// Factor applied to `t` after each centering.
    pub mu: f64,
    pub t0: f64,
    pub max_newton: usize,
    /// Centering stops when half the squared Newton decrement falls below this.
    pub newton_tol: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            target_gap: 1e-7,
            mu: 10.0,
            t0: 1.0,
            max_newton: 200,
            newton_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JkSolution {
    /// `max(0, objective - gap)`, a certified lower bound on the program optimum.
    pub lower_bound: f64,
    pub objective: f64,
    pub gap: f64,
    pub outer_iterations: usize,
    pub newton_steps: usize,
    /// Final channel, row-major `m x m`.
    pub channel: Vec<Vec<f64>>,
}

/// The perspective-constrained program over `m x m` row-stochastic `P`:
/// minimize `1 - sum_i p_i P(i|i)` subject to
/// `sum_{i<=rows} sum_j p_i P(j|i)^2 / y_j <= theta + 1`, `y_j = sum_i p_i P(j|i)`.
struct JkProgram<'a> {
    p: &'a [f64],
    /// Number of leading diagonal entries of `F F^T` in the constraint.
    rows: usize,
    /// `theta + sum_{i>rows} p_i`.
    allowance: f64,
}

impl JkProgram<'_> {
    fn m(&self) -> usize {
        self.p.len()
    }

    fn outputs(&self, x: &[f64]) -> Vec<f64> {
        let m = self.m();
        (0..m)
            .map(|j| (0..m).map(|i| self.p[i] * x[i * m + j]).sum())
            .collect()
    }

    /// `theta + 1` minus the constraint function, evaluated as
    /// `allowance - sum_{i<=rows} p_i sum_j (P(j|i) - y_j)^2 / y_j` so that no
    /// terms near 1 cancel when the budget is tiny.
    fn slack(&self, x: &[f64]) -> f64 {
        let m = self.m();
        let y = self.outputs(x);
        let used: f64 = (0..self.rows)
            .map(|i| {
                self.p[i]
                    * (0..m)
                        .map(|j| (x[i * m + j] - y[j]).powi(2) / y[j])
                        .sum::<f64>()
            })
            .sum();
        self.allowance - used
    }

    /// `sum_i p_i sum_{j != i} P(j|i)`, the same as `1 - sum_i p_i P(i|i)`.
    fn objective(&self, x: &[f64]) -> f64 {
        let m = self.m();
        (0..m)
            .map(|i| {
                self.p[i]
                    * (0..m)
                        .filter(|&j| j != i)
                        .map(|j| x[i * m + j])
                        .sum::<f64>()
            })
            .sum()
    }

    fn strictly_feasible(&self, x: &[f64]) -> bool {
        x.iter().all(|&v| v > 0.0) && self.slack(x) > 0.0
    }

    /// Barrier value at `to` minus the value at `from`, summed term by term
    /// so that small changes survive when `t f` is large.
    fn barrier_change(&self, from: &[f64], to: &[f64], t: f64) -> f64 {
        let diff: Vec<f64> = to.iter().zip(from).map(|(a, b)| a - b).collect();
        let logs: f64 = diff.iter().zip(from).map(|(d, b)| (d / b).ln_1p()).sum();
        t * self.objective(&diff) - logs - (self.slack(to) / self.slack(from)).ln()
    }

    /// Gradient and Hessian of the constraint function. The Hessian is
    /// block diagonal by output column.
    fn constraint_derivatives(&self, x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let m = self.m();
        let nv = m * m;
        let y = self.outputs(x);
        let mut grad = DVector::zeros(nv);
        let mut hess = DMatrix::zeros(nv, nv);
        for j in 0..m {
            let yj = y[j];
            let a: Vec<f64> = (0..m)
                .map(|i| {
                    if i < self.rows {
                        2.0 * self.p[i] * x[i * m + j]
                    } else {
                        0.0
                    }
                })
                .collect();
            let s: f64 = (0..self.rows)
                .map(|i| self.p[i] * x[i * m + j].powi(2))
                .sum();
            for i in 0..m {
                grad[i * m + j] = a[i] / yj - s * self.p[i] / (yj * yj);
                for l in 0..m {
                    let mut h = -(a[i] * self.p[l] + self.p[i] * a[l]) / (yj * yj)
                        + 2.0 * s * self.p[i] * self.p[l] / (yj * yj * yj);
                    if i == l && i < self.rows {
                        h += 2.0 * self.p[i] / yj;
                    }
                    hess[(i * m + j, l * m + j)] = h;
                }
            }
        }
        (grad, hess)
    }

    /// Newton centering for `t f - sum log x - log(slack)` subject to
    /// unit row sums. Returns the number of Newton steps taken and the squared
    /// Newton decrement left over when the line search stalls (0 otherwise).
    fn center(&self, x: &mut Vec<f64>, t: f64, params: &SolverParams) -> Option<(usize, f64)> {
        let m = self.m();
        let nv = m * m;
        let mut last = f64::INFINITY;
        for step in 0..params.max_newton {
            let slack = self.slack(x);
            let (cg, ch) = self.constraint_derivatives(x);
            let mut grad = &cg / slack;
            let mut hess = &ch / slack + (&cg * cg.transpose()) / (slack * slack);
            for v in 0..nv {
                grad[v] -= 1.0 / x[v];
                hess[(v, v)] += 1.0 / (x[v] * x[v]);
            }
            for i in 0..m {
                grad[i * m + i] -= t * self.p[i];
            }
            // Row-constant shifts of the gradient leave the step unchanged on the
            // feasible set; removing them keeps the multipliers small, so solve
            // errors in the row-sum equations do not swamp the step.
            for i in 0..m {
                let row = i * m..(i + 1) * m;
                let w: f64 = row.clone().map(|v| x[v] * x[v]).sum();
                let shift = row.clone().map(|v| x[v] * x[v] * grad[v]).sum::<f64>() / w;
                for v in row {
                    grad[v] -= shift;
                }
            }

            // Newton system in the scaled variables dx = diag(x) dz, which keeps
            // the barrier block near the identity as entries approach 0.
            let size = nv + m;
            let mut kkt = DMatrix::zeros(size, size);
            for a in 0..nv {
                for b in 0..nv {
                    kkt[(a, b)] = x[a] * hess[(a, b)] * x[b];
                }
            }
            let mut rhs = DVector::zeros(size);
            for v in 0..nv {
                rhs[v] = -grad[v] * x[v];
            }
            for i in 0..m {
                for j in 0..m {
                    let v = i * m + j;
                    kkt[(nv + i, v)] = x[v];
                    kkt[(v, nv + i)] = x[v];
                }
                let row_sum: f64 = x[i * m..(i + 1) * m].iter().sum();
                rhs[nv + i] = 1.0 - row_sum;
            }
            let sol = kkt.clone().lu().solve(&rhs)?;
            let dz = sol.rows(0, nv).into_owned();
            let decrement = dz.dot(&(kkt.view((0, 0), (nv, nv)) * &dz));
            if decrement / 2.0 <= params.newton_tol {
                return Some((step, 0.0));
            }
            last = decrement;
            let dx = DVector::from_iterator(nv, dz.iter().zip(x.iter()).map(|(d, v)| d * v));

            let slope = grad.dot(&dx);
            let mut s = 1.0;
            let mut accepted = false;
            for _ in 0..80 {
                let mut trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, b)| a + s * b).collect();
                // pull rounding drift in the row sums back to exactly 1
                for row in trial.chunks_mut(m) {
                    let total: f64 = row.iter().sum();
                    row.iter_mut().for_each(|v| *v /= total);
                }
                if trial == *x {
                    break;
                }
                if self.strictly_feasible(&trial)
                    && self.barrier_change(x, &trial, t) <= 0.25 * s * slope
                {
                    *x = trial;
                    accepted = true;
                    break;
                }
                s *= 0.5;
            }
            if !accepted {
                // no progress possible at working precision; accept the point
                // only if it is already close to the center
                return (decrement <= STALL_DECREMENT).then_some((step, decrement));
            }
        }
        (last <= STALL_DECREMENT).then_some((params.max_newton, last))
    }
}

/// Smallest budget handed to the barrier method. At `theta = 0` with
/// `k = m - 1` the feasible set has no interior; a larger budget can only
/// lower the optimum, so the result stays a valid lower bound.
const MIN_BUDGET: f64 = 1e-8;
/// Squared Newton decrement up to which a stalled line search still counts as
/// centered. The leftover decrement is added to the duality gap.
const STALL_DECREMENT: f64 = 0.5;

/// Certified lower bound on the relaxation of `e_{J_k}(p, theta)` obtained by
/// replacing the Ky Fan constraint with the sum of the first `k + 1` diagonal
/// entries of `F F^T`, solved with a log-barrier interior-point method.
pub fn jk_error_rate_lower(
    p: &ProbabilityVector,
    theta: f64,
    k: usize,
    params: &SolverParams,
) -> Result<JkSolution> {
    if theta < 0.0 {
        return Err(Error::NegativeTheta(theta));
    }
    let m = p.len();
    if k == 0 || k + 1 > m {
        return Err(Error::KOutOfRange {
            k,
            max: m.saturating_sub(1),
        });
    }
    let program = JkProgram {
        p: p.as_slice(),
        // the top eigenvalue of F F^T is the trivial 1, so J_k + 1 is the sum of
        // its k + 1 largest eigenvalues and dominates the first k + 1 diagonal entries
        rows: k + 1,
        allowance: theta.max(MIN_BUDGET) + p.as_slice()[k + 1..].iter().sum::<f64>(),
    };

    let uniform = 1.0 / m as f64;
    let start = |eps: f64| -> Vec<f64> {
        (0..m * m)
            .map(|v| (1.0 - eps) * uniform + if v / m == v % m { eps } else { 0.0 })
            .collect()
    };
    let mut eps = 0.5;
    let mut x = start(eps);
    while !program.strictly_feasible(&x) {
        eps *= 0.5;
        if eps < 1e-12 {
            x = start(0.0);
            if !program.strictly_feasible(&x) {
                return Err(Error::SolverFailure {
                    best_certified: 0.0,
                    gap: f64::INFINITY,
                });
            }
            break;
        }
        x = start(eps);
    }

    let inequalities = (m * m + 1) as f64;
    let mut t = params.t0;
    let mut outer = 0;
    let mut newton_steps = 0;
    let mut centered: Option<(Vec<f64>, f64)> = None;
    let finish = |x: Vec<f64>, gap: f64, outer: usize, newton_steps: usize| {
        let objective = program.objective(&x);
        JkSolution {
            lower_bound: (objective - gap).max(0.0),
            objective,
            gap,
            outer_iterations: outer,
            newton_steps,
            channel: x.chunks(m).map(<[f64]>::to_vec).collect(),
        }
    };
    loop {
        outer += 1;
        match program.center(&mut x, t, params) {
            Some((steps, residual)) => {
                newton_steps += steps;
                let gap = (inequalities + residual) / t;
                if gap <= params.target_gap {
                    return Ok(finish(x, gap, outer, newton_steps));
                }
                centered = Some((x.clone(), gap));
            }
            None => {
                // fall back to the last centered stage; its certificate still holds
                return match centered {
                    Some((prev, gap)) if gap <= params.target_gap.sqrt() => {
                        Ok(finish(prev, gap, outer, newton_steps))
                    }
                    Some((prev, gap)) => Err(Error::SolverFailure {
                        best_certified: (program.objective(&prev) - gap).max(0.0),
                        gap,
                    }),
                    None => Err(Error::SolverFailure {
                        best_certified: 0.0,
                        gap: f64::INFINITY,
                    }),
                };
            }
        }
        t *= params.mu;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::seeded_rng;
    use approx::assert_abs_diff_eq;

    fn pv(v: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn entropy_values() {
        assert_abs_diff_eq!(
            entropy(&ProbabilityVector::uniform(2)),
            1.0,
            epsilon = 1e-15
        );
        assert_eq!(entropy(&pv(&[1.0, 0.0])), 0.0);
        assert_abs_diff_eq!(entropy(&pv(&[0.9, 0.1])), 0.468_995_593_6, epsilon = 1e-9);
    }

    #[test]
    fn fano_values() {
        let p = pv(&[0.9, 0.1]);
        assert_eq!(fano_error_rate(&p, 1.0).unwrap(), 0.0);
        let d = fano_error_rate(&ProbabilityVector::uniform(2), 0.5).unwrap();
        assert_abs_diff_eq!(d, 0.1100, epsilon = 1e-3);
        assert_abs_diff_eq!(binary_entropy(d), 0.5, epsilon = 1e-9);
        let d = fano_error_rate(&ProbabilityVector::uniform(4), 0.0).unwrap();
        assert_abs_diff_eq!(d, 0.75, epsilon = 1e-9);
        assert_eq!(
            fano_error_rate(&pv(&[1.0]), 0.0),
            Err(Error::DegenerateSupport)
        );
        assert!(matches!(
            fano_error_rate(&p, -1.0),
            Err(Error::NegativeTheta(_))
        ));
    }

    #[test]
    fn majorization_examples() {
        assert!(majorizes(&pv(&[0.5, 0.5]), &pv(&[1.0, 0.0])).unwrap());
        assert!(!majorizes(&pv(&[1.0, 0.0]), &pv(&[0.5, 0.5])).unwrap());
        let p = pv(&[0.6, 0.3, 0.1]);
        assert!(majorizes(&p, &p).unwrap());
        assert!(majorizes(&pv(&[0.5, 0.4, 0.1]), &p).unwrap());
        assert!(matches!(
            majorizes(&p, &pv(&[0.5, 0.5])),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn schur_probe_examples() {
        let pairs = vec![(pv(&[1.0, 0.0]), pv(&[0.5, 0.5]))];
        let r = schur_probe(NamedBound::Fano, &pairs, 0.2).unwrap();
        assert!(r.violations.is_empty());
        let same = vec![(pv(&[0.7, 0.3]), pv(&[0.7, 0.3]))];
        assert!(schur_probe(NamedBound::Fano, &same, 0.1)
            .unwrap()
            .violations
            .is_empty());
        let reversed = vec![(pv(&[0.5, 0.5]), pv(&[1.0, 0.0]))];
        assert_eq!(
            schur_probe(NamedBound::Fano, &reversed, 0.1),
            Err(Error::NotAMajorizationPair { index: 0 })
        );
    }

    #[test]
    fn permutation_mixtures_are_majorized() {
        let mut rng = seeded_rng(4);
        let p = pv(&[0.5, 0.25, 0.15, 0.1]);
        for _ in 0..50 {
            let q = mix_permutations(&mut rng, &p, 3);
            assert!(majorizes(&q, &p).unwrap());
        }
    }

    #[test]
    fn jk_identity_feasible_gives_zero() {
        let p = pv(&[0.5, 0.3, 0.2]);
        let sol = jk_error_rate_lower(&p, 2.0, 2, &SolverParams::default()).unwrap();
        assert!(sol.lower_bound <= 1e-6, "{sol:?}");
        assert!(sol.objective < 1e-6);
    }

    #[test]
    fn jk_binary_matches_chi_squared_channel() {
        // for m = 2 the constraint is chi^2 <= theta, met by a BSC with
        // crossover (1 - sqrt(theta)) / 2
        let p = ProbabilityVector::uniform(2);
        for theta in [0.0, 0.16, 0.64] {
            let sol = jk_error_rate_lower(&p, theta, 1, &SolverParams::default()).unwrap();
            let expected = (1.0 - f64::sqrt(theta)) / 2.0;
            assert_abs_diff_eq!(sol.lower_bound, expected, epsilon = 1e-4);
            assert!(sol.lower_bound <= expected + 1e-9);
        }
    }

    #[test]
    fn jk_rejects_bad_k() {
        let p = pv(&[0.5, 0.5]);
        assert!(matches!(
            jk_error_rate_lower(&p, 0.1, 2, &SolverParams::default()),
            Err(Error::KOutOfRange { .. })
        ));
        assert!(matches!(
            jk_error_rate_lower(&p, -0.1, 1, &SolverParams::default()),
            Err(Error::NegativeTheta(_))
        ));
    }
}
