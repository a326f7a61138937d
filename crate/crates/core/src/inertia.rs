//! Principal-inertia decomposition of a joint distribution.
//!
//! The matrix `S = D_X^{-1/2} P D_Y^{-1/2}` always has leading singular value 1
//! with singular vectors `(sqrt(p_X), sqrt(p_Y))`. The squares of the remaining
//! singular values are the principal inertias `lambda_1 >= .. >= lambda_d`,
//! `d = min(m, n) - 1`. Sums of the leading inertias give the k-correlation;
//! `lambda_1` is the squared maximal correlation and the full sum is the
//! chi-squared statistic.
//!
//! The SVD is taken on `Q_X^T S Q_Y`, where `Q_X` and `Q_Y` are orthonormal
//! bases of the complements of `sqrt(p_X)` and `sqrt(p_Y)`. This pins the
//! leading pair exactly, even when `lambda_1 = 1` makes the top singular value
//! of `S` repeated.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use rand::Rng;
use serde::Serialize;

use crate::dist::{seeded_rng, JointDistribution, ProbabilityVector, StochasticMatrix};
use crate::error::{Error, Result};

/// Singular values below this are treated as exact zeros.
const SINGULAR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InertiaDecomposition {
    lambdas: Vec<f64>,
    #[serde(skip)]
    left_factor: DMatrix<f64>,
    #[serde(skip)]
    right_factor: DMatrix<f64>,
    sigma: Vec<f64>,
}

impl InertiaDecomposition {
    /// Principal inertias, non-increasing.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn d(&self) -> usize {
        self.lambdas.len()
    }

    /// `A~ = D_X^{1/2} U`, `m x (d+1)`, first column `p_X`.
    pub fn left_factor(&self) -> &DMatrix<f64> {
        &self.left_factor
    }

    /// `B~ = D_Y^{1/2} V`, `n x (d+1)`, first column `p_Y`.
    pub fn right_factor(&self) -> &DMatrix<f64> {
        &self.right_factor
    }

    /// `(1, sqrt(lambda_1), .., sqrt(lambda_d))`.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Maximal correlation `sqrt(lambda_1)`; zero when `d = 0`.
    pub fn max_correlation(&self) -> f64 {
        self.lambdas.first().map_or(0.0, |l| l.sqrt())
    }

    /// Sum of the `k` largest inertias.
    pub fn k_correlation(&self, k: usize) -> Result<f64> {
        if k == 0 || k > self.d() {
            return Err(Error::KOutOfRange { k, max: self.d() });
        }
        Ok(self.lambdas[..k].iter().sum())
    }

    /// Sum of all inertias, which is the chi-squared statistic.
    pub fn total_inertia(&self) -> f64 {
        self.lambdas.iter().sum()
    }

    /// `A~ diag(sigma) B~^T`, equal to the joint matrix.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let sigma = DMatrix::from_diagonal(&DVector::from_column_slice(&self.sigma));
        &self.left_factor * sigma * self.right_factor.transpose()
    }
}

fn scaled_matrix(joint: &JointDistribution) -> DMatrix<f64> {
    let px = joint.row_marginal();
    let py = joint.col_marginal();
    DMatrix::from_fn(joint.rows(), joint.cols(), |i, j| {
        joint.get(i, j) / (px.get(i) * py.get(j)).sqrt()
    })
}

/// Orthonormal basis of the orthogonal complement of the unit vector `u`,
/// taken from the columns `1..` of a Householder reflector.
fn complement_basis(u: &DVector<f64>) -> DMatrix<f64> {
    let len = u.len();
    let mut v = u.clone();
    let sign = if u[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += sign;
    let vv = v.norm_squared();
    let h = DMatrix::identity(len, len) - (&v * v.transpose()) * (2.0 / vv);
    h.columns(1, len - 1).into_owned()
}

pub fn decompose(joint: &JointDistribution) -> Result<InertiaDecomposition> {
    joint.require_positive_marginals()?;
    let (m, n) = (joint.rows(), joint.cols());
    let d = m.min(n) - 1;
    let sx = DVector::from_iterator(m, joint.row_marginal().as_slice().iter().map(|p| p.sqrt()));
    let sy = DVector::from_iterator(n, joint.col_marginal().as_slice().iter().map(|p| p.sqrt()));

    let mut u = DMatrix::zeros(m, d + 1);
    let mut v = DMatrix::zeros(n, d + 1);
    u.set_column(0, &sx);
    v.set_column(0, &sy);
    let mut singular = Vec::with_capacity(d);

    if d > 0 {
        let qx = complement_basis(&sx);
        let qy = complement_basis(&sy);
        let reduced = qx.transpose() * scaled_matrix(joint) * &qy;
        let svd = SVD::new(reduced, true, true);
        let uu = svd.u.expect("left singular vectors requested");
        let vt = svd.v_t.expect("right singular vectors requested");
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        for (slot, &idx) in order.iter().enumerate() {
            u.set_column(slot + 1, &(&qx * uu.column(idx)));
            v.set_column(slot + 1, &(&qy * vt.row(idx).transpose()));
            singular.push(svd.singular_values[idx]);
        }
    }

    let lambdas: Vec<f64> = singular
        .iter()
        .map(|&s| {
            if s < SINGULAR_FLOOR {
                0.0
            } else {
                (s * s).min(1.0)
            }
        })
        .collect();
    let mut sigma = vec![1.0];
    sigma.extend(lambdas.iter().map(|l| l.sqrt()));

    let dx = DMatrix::from_diagonal(&sx);
    let dy = DMatrix::from_diagonal(&sy);
    Ok(InertiaDecomposition {
        lambdas,
        left_factor: dx * u,
        right_factor: dy * v,
        sigma,
    })
}

/// Largest singular value of `D_X^{-1/2} P D_Y^{-1/2}`, computed on the full
/// matrix. Always 1 for a valid joint.
pub fn leading_singular_value(joint: &JointDistribution) -> Result<f64> {
    joint.require_positive_marginals()?;
    let svd = SVD::new(scaled_matrix(joint), false, false);
    Ok(svd.singular_values.iter().copied().fold(0.0, f64::max))
}

pub fn k_correlation(joint: &JointDistribution, k: usize) -> Result<f64> {
    decompose(joint)?.k_correlation(k)
}

/// k-correlation through the eigenvalues of
/// `K = D_X^{-1/2} P D_Y^{-1} P^T D_X^{-1/2}`. The spectrum of `K` is
/// `(1, lambda_1, .., lambda_d, 0, ..)`, so the sum of its `k + 1` largest
/// eigenvalues minus one equals the sum of the `k` largest inertias.
pub fn k_correlation_ky_fan(joint: &JointDistribution, k: usize) -> Result<f64> {
    joint.require_positive_marginals()?;
    let d = joint.inertia_count();
    if k == 0 || k > d {
        return Err(Error::KOutOfRange { k, max: d });
    }
    let s = scaled_matrix(joint);
    let gram = &s * s.transpose();
    let mut eig: Vec<f64> = SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    Ok(eig[..=k].iter().sum::<f64>() - 1.0)
}

/// k-correlation of the joint `D_X W` built from an input law and a channel.
pub fn channel_k_correlation(
    p: &ProbabilityVector,
    channel: &StochasticMatrix,
    k: usize,
) -> Result<f64> {
    k_correlation(&JointDistribution::from_channel(p, channel)?, k)
}

/// `sum_{i,j} (p(i,j) - p_X(i) p_Y(j))^2 / (p_X(i) p_Y(j))`, without any SVD.
pub fn chi_squared_direct(joint: &JointDistribution) -> Result<f64> {
    joint.require_positive_marginals()?;
    let px = joint.row_marginal();
    let py = joint.col_marginal();
    let mut total = 0.0;
    for i in 0..joint.rows() {
        for j in 0..joint.cols() {
            let indep = px.get(i) * py.get(j);
            let diff = joint.get(i, j) - indep;
            total += diff * diff / indep;
        }
    }
    Ok(total)
}

/// Moment of inertia of the row profiles `P_{Y|X}(.|x)` (masses `p_X(x)`)
/// around their barycenter `p_Y`, under the chi-square metric `D_Y^{-1}`:
/// `Tr(D_X C D_Y^{-1} C^T)` with `C = P_{Y|X} - 1 p_Y^T`.
pub fn total_inertia_spatial(joint: &JointDistribution) -> Result<f64> {
    joint.require_positive_marginals()?;
    let (m, n) = (joint.rows(), joint.cols());
    let px = joint.row_marginal();
    let py = joint.col_marginal();
    let centered = DMatrix::from_fn(m, n, |i, j| joint.get(i, j) / px.get(i) - py.get(j));
    let dx = DMatrix::from_diagonal(&DVector::from_column_slice(px.as_slice()));
    let metric = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        py.as_slice().iter().map(|p| 1.0 / p),
    ));
    Ok((dx * &centered * metric * centered.transpose()).trace())
}

/// Below this variance a conditional expectation is treated as constant.
const ACE_DEGENERATE_VAR: f64 = 1e-24;

fn standardize(values: &mut [f64], weights: &[f64]) -> f64 {
    let mean: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    for v in values.iter_mut() {
        *v -= mean;
    }
    let var: f64 = values.iter().zip(weights).map(|(v, w)| v * v * w).sum();
    if var > ACE_DEGENERATE_VAR {
        let sd = var.sqrt();
        for v in values.iter_mut() {
            *v /= sd;
        }
    }
    var
}

/// Maximal correlation by alternating conditional expectations.
///
/// Alternates `g <- E[f(X) | Y]` and `f <- E[g(Y) | X]`, standardizing each
/// under its marginal, until the change in `f` (in `L2(p_X)`) drops below
/// `tol`. Returns `E[f(X) g(Y)]` at convergence.
pub fn ace_maxcorr(joint: &JointDistribution, tol: f64, max_iter: usize) -> Result<f64> {
    joint.require_positive_marginals()?;
    let (m, n) = (joint.rows(), joint.cols());
    let px = joint.row_marginal().as_slice();
    let py = joint.col_marginal().as_slice();

    let cond_y = |f: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|y| (0..m).map(|x| joint.get(x, y) * f[x]).sum::<f64>() / py[y])
            .collect()
    };
    let cond_x = |g: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|x| (0..n).map(|y| joint.get(x, y) * g[y]).sum::<f64>() / px[x])
            .collect()
    };

    let mut f: Vec<f64> = (0..m).map(|x| if x == 0 { 1.0 } else { 0.0 }).collect();
    let start_var = standardize(&mut f, px);
    let mut g = cond_y(&f);
    if start_var <= ACE_DEGENERATE_VAR || standardize(&mut g, py) <= ACE_DEGENERATE_VAR {
        let mut rng = seeded_rng(0xACE);
        f = (0..m).map(|_| rng.random::<f64>() - 0.5).collect();
        if standardize(&mut f, px) <= ACE_DEGENERATE_VAR {
            return Ok(0.0);
        }
        g = cond_y(&f);
        if standardize(&mut g, py) <= ACE_DEGENERATE_VAR {
            return Ok(0.0);
        }
    }

    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let mut f_next = cond_x(&g);
        if standardize(&mut f_next, px) <= ACE_DEGENERATE_VAR {
            return Ok(0.0);
        }
        residual = f
            .iter()
            .zip(&f_next)
            .zip(px)
            .map(|((a, b), w)| (a - b) * (a - b) * w)
            .sum::<f64>()
            .sqrt();
        f = f_next;
        g = cond_y(&f);
        if standardize(&mut g, py) <= ACE_DEGENERATE_VAR {
            return Ok(0.0);
        }
        if residual <= tol {
            let corr = f
                .iter()
                .enumerate()
                .map(|(x, fx)| {
                    fx * g
                        .iter()
                        .enumerate()
                        .map(|(y, gy)| joint.get(x, y) * gy)
                        .sum::<f64>()
                })
                .sum();
            return Ok(corr);
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}
