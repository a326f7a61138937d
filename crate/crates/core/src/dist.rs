//! Finite probability vectors, joint distributions and channels.
//!
//! A [`JointDistribution`] is an `m x n` nonnegative matrix summing to one whose
//! rows index the hidden variable `X` and columns the observation `Y`. The
//! marginals are computed once at construction and cached.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance on normalization for externally supplied data.
pub const INGEST_TOL: f64 = 1e-9;
/// Tolerance on identities between internally computed quantities.
pub const IDENTITY_TOL: f64 = 1e-12;

/// A probability mass function over `{0, .., len-1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProbabilityVector {
    entries: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        for (index, &value) in entries.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidProbability { index, value });
            }
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > INGEST_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { entries })
    }

    pub fn uniform(len: usize) -> Self {
        assert!(len > 0, "uniform distribution needs a nonempty alphabet");
        Self {
            entries: vec![1.0 / len as f64; len],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries[index]
    }

    /// True when the entries are sorted in non-increasing order.
    pub fn is_canonical(&self) -> bool {
        self.entries.windows(2).all(|w| w[0] >= w[1])
    }

    /// `p^T p`.
    pub fn sum_of_squares(&self) -> f64 {
        self.entries.iter().map(|p| p * p).sum()
    }

    pub fn max(&self) -> f64 {
        self.entries
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sorted copy together with the permutation `order` such that
    /// `sorted[i] = self[order[i]]`. Ties keep their original relative order.
    pub fn canonical(&self) -> (ProbabilityVector, Vec<usize>) {
        let order = descending_order(&self.entries);
        let entries = order.iter().map(|&i| self.entries[i]).collect();
        (Self { entries }, order)
    }

    pub fn is_uniform(&self, tol: f64) -> bool {
        let u = 1.0 / self.len() as f64;
        self.entries.iter().all(|p| (p - u).abs() <= tol)
    }
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // `sort_by` is stable, so tied entries keep their original order.
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

/// Joint pmf of `(X, Y)` with cached marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    matrix: DMatrix<f64>,
    row_marginal: ProbabilityVector,
    col_marginal: ProbabilityVector,
}

/// Validates a row-major grid. Entries in `[-tolerance, 0)` are clamped to
/// zero and the matrix is renormalized.
pub fn load_joint(raw: &[Vec<f64>], tolerance: f64) -> Result<JointDistribution> {
    let rows = raw.len();
    let cols = raw.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyMatrix);
    }
    for (row, r) in raw.iter().enumerate() {
        if r.len() != cols {
            return Err(Error::Ragged {
                row,
                expected: cols,
                found: r.len(),
            });
        }
    }
    let matrix = DMatrix::from_fn(rows, cols, |i, j| raw[i][j]);
    JointDistribution::from_matrix(matrix, tolerance)
}

impl JointDistribution {
    pub fn from_matrix(mut matrix: DMatrix<f64>, tolerance: f64) -> Result<Self> {
        if matrix.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        let cols = matrix.ncols();
        for i in 0..matrix.nrows() {
            for j in 0..cols {
                let value = matrix[(i, j)];
                if !value.is_finite() {
                    return Err(Error::InvalidProbability {
                        index: i * cols + j,
                        value,
                    });
                }
                if value < -tolerance {
                    return Err(Error::NegativeMass {
                        row: i,
                        col: j,
                        value,
                    });
                }
                if value < 0.0 {
                    matrix[(i, j)] = 0.0;
                }
            }
        }
        let sum = matrix.sum();
        if (sum - 1.0).abs() > tolerance {
            return Err(Error::NotNormalized { sum });
        }
        if sum != 1.0 {
            matrix /= sum;
        }
        Ok(Self::from_normalized(matrix))
    }

    /// Builds the joint from `p_X` and a channel `P_{Y|X}`.
    pub fn from_channel(p: &ProbabilityVector, channel: &StochasticMatrix) -> Result<Self> {
        let w = channel.matrix();
        if w.nrows() != p.len() {
            return Err(Error::ShapeMismatch(format!(
                "channel has {} rows, input alphabet has {}",
                w.nrows(),
                p.len()
            )));
        }
        let matrix = DMatrix::from_fn(w.nrows(), w.ncols(), |i, j| p.get(i) * w[(i, j)]);
        Self::from_matrix(matrix, INGEST_TOL)
    }

    fn from_normalized(matrix: DMatrix<f64>) -> Self {
        let row_marginal = ProbabilityVector {
            entries: matrix.row_iter().map(|r| r.sum()).collect(),
        };
        let col_marginal = ProbabilityVector {
            entries: matrix.column_iter().map(|c| c.sum()).collect(),
        };
        Self {
            matrix,
            row_marginal,
            col_marginal,
        }
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    /// `p_X`.
    pub fn row_marginal(&self) -> &ProbabilityVector {
        &self.row_marginal
    }

    /// `p_Y`.
    pub fn col_marginal(&self) -> &ProbabilityVector {
        &self.col_marginal
    }

    /// Number of principal inertias, `min(m, n) - 1`.
    pub fn inertia_count(&self) -> usize {
        self.rows().min(self.cols()) - 1
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.matrix
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    pub fn permute(&self, row_order: &[usize], col_order: &[usize]) -> Self {
        let matrix = DMatrix::from_fn(self.rows(), self.cols(), |i, j| {
            self.matrix[(row_order[i], col_order[j])]
        });
        Self::from_normalized(matrix)
    }

    /// Fails with `ZeroMarginal` if some outcome of `X` or `Y` has zero mass.
    pub fn require_positive_marginals(&self) -> Result<()> {
        use crate::error::Axis;
        if let Some(index) = self.row_marginal.as_slice().iter().position(|&p| p <= 0.0) {
            return Err(Error::ZeroMarginal {
                axis: Axis::Row,
                index,
            });
        }
        if let Some(index) = self.col_marginal.as_slice().iter().position(|&p| p <= 0.0) {
            return Err(Error::ZeroMarginal {
                axis: Axis::Column,
                index,
            });
        }
        Ok(())
    }
}

/// Sorts rows by decreasing `p_X` and columns by decreasing `p_Y` (stable on
/// ties). `out[i][j] = J[row_order[i]][col_order[j]]`.
pub fn canonicalize(joint: &JointDistribution) -> (JointDistribution, Vec<usize>, Vec<usize>) {
    let row_order = descending_order(joint.row_marginal.as_slice());
    let col_order = descending_order(joint.col_marginal.as_slice());
    (joint.permute(&row_order, &col_order), row_order, col_order)
}

/// Row-stochastic matrix; row `i` is the conditional pmf given input `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    matrix: DMatrix<f64>,
}

impl StochasticMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        check_nonnegative(&matrix)?;
        for row in matrix.row_iter() {
            let sum = row.sum();
            if (sum - 1.0).abs() > INGEST_TOL {
                return Err(Error::NotNormalized { sum });
            }
        }
        Ok(Self { matrix })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            matrix: DMatrix::identity(m, m),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn shape(&self) -> (usize, usize) {
        self.matrix.shape()
    }

    /// `t * self + (1 - t) * other`.
    pub fn mix(&self, other: &StochasticMatrix, t: f64) -> Result<StochasticMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(Self {
            matrix: &self.matrix * t + &other.matrix * (1.0 - t),
        })
    }
}

/// Column-stochastic `m' x m` matrix with entries `p_{X'|X}(i|j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationMap {
    matrix: DMatrix<f64>,
}

impl DegradationMap {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        check_nonnegative(&matrix)?;
        for col in matrix.column_iter() {
            let sum = col.sum();
            if (sum - 1.0).abs() > INGEST_TOL {
                return Err(Error::NotNormalized { sum });
            }
        }
        Ok(Self { matrix })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            matrix: DMatrix::identity(m, m),
        }
    }

    /// Maps every input symbol to a single output symbol.
    pub fn collapse(m: usize) -> Self {
        Self {
            matrix: DMatrix::from_element(1, m, 1.0),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

fn check_nonnegative(matrix: &DMatrix<f64>) -> Result<()> {
    let cols = matrix.ncols();
    for i in 0..matrix.nrows() {
        for j in 0..cols {
            let value = matrix[(i, j)];
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidProbability {
                    index: i * cols + j,
                    value,
                });
            }
        }
    }
    Ok(())
}

/// Joint distribution of `(X', Y)` where `X' -> X -> Y`.
pub fn degrade(joint: &JointDistribution, map: &DegradationMap) -> Result<JointDistribution> {
    if map.matrix.ncols() != joint.rows() {
        return Err(Error::ShapeMismatch(format!(
            "degradation map has {} columns, joint has {} rows",
            map.matrix.ncols(),
            joint.rows()
        )));
    }
    JointDistribution::from_matrix(&map.matrix * &joint.matrix, INGEST_TOL)
}

/// A surjective map `{0..m-1} -> {0..range-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Surjection {
    labels: Vec<usize>,
    range: usize,
}

impl Surjection {
    pub fn new(labels: Vec<usize>, range: usize) -> Result<Self> {
        let mut hit = vec![false; range];
        for &l in &labels {
            if l >= range {
                return Err(Error::NotSurjective { range });
            }
            hit[l] = true;
        }
        if range == 0 || hit.iter().any(|h| !h) {
            return Err(Error::NotSurjective { range });
        }
        Ok(Self { labels, range })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            labels: (0..m).collect(),
            range: m,
        }
    }

    pub fn constant(m: usize) -> Self {
        Self {
            labels: vec![0; m],
            range: 1,
        }
    }

    pub fn domain(&self) -> usize {
        self.labels.len()
    }

    pub fn range(&self) -> usize {
        self.range
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn apply(&self, x: usize) -> usize {
        self.labels[x]
    }

    /// Distribution of `f(X)` when `X ~ p`.
    pub fn push_vector(&self, p: &ProbabilityVector) -> Result<ProbabilityVector> {
        if p.len() != self.domain() {
            return Err(Error::LengthMismatch {
                left: p.len(),
                right: self.domain(),
            });
        }
        let mut out = vec![0.0; self.range];
        for (x, &u) in self.labels.iter().enumerate() {
            out[u] += p.get(x);
        }
        Ok(ProbabilityVector { entries: out })
    }
}

/// Joint distribution of `(f(X), Y)`.
pub fn pushforward(joint: &JointDistribution, f: &Surjection) -> Result<JointDistribution> {
    if f.domain() != joint.rows() {
        return Err(Error::ShapeMismatch(format!(
            "function domain {} vs {} rows",
            f.domain(),
            joint.rows()
        )));
    }
    let mut matrix = DMatrix::zeros(f.range(), joint.cols());
    for x in 0..joint.rows() {
        let u = f.apply(x);
        for y in 0..joint.cols() {
            matrix[(u, y)] += joint.matrix[(x, y)];
        }
    }
    Ok(JointDistribution::from_normalized(matrix))
}

/// Derives an independent seed for instance `index` of stream `stream`.
pub fn instance_seed(seed: u64, stream: u64, index: u64) -> u64 {
    // splitmix64 finalizer over a combined key
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strictly positive symmetric-Dirichlet draw of length `len`.
pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, len: usize, concentration: f64) -> Vec<f64> {
    let gamma = Gamma::new(concentration, 1.0).expect("concentration must be positive");
    let mut draws: Vec<f64> = (0..len)
        .map(|_| gamma.sample(rng).max(f64::MIN_POSITIVE))
        .collect();
    let total: f64 = draws.iter().sum();
    for d in &mut draws {
        *d = (*d / total).max(f64::MIN_POSITIVE);
    }
    draws
}

pub fn random_probability_vector<R: Rng + ?Sized>(
    rng: &mut R,
    len: usize,
    concentration: f64,
) -> ProbabilityVector {
    ProbabilityVector {
        entries: dirichlet(rng, len, concentration),
    }
}

pub fn random_joint_with<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    n: usize,
    concentration: f64,
) -> JointDistribution {
    assert!(m >= 1 && n >= 1, "alphabets must be nonempty");
    let draws = dirichlet(rng, m * n, concentration);
    JointDistribution::from_normalized(DMatrix::from_row_slice(m, n, &draws))
}

/// Deterministic Dirichlet-distributed joint on the `mn`-simplex.
pub fn random_joint(m: usize, n: usize, seed: u64, concentration: f64) -> JointDistribution {
    random_joint_with(&mut seeded_rng(seed), m, n, concentration)
}

pub fn random_stochastic<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    n: usize,
    concentration: f64,
) -> StochasticMatrix {
    let mut matrix = DMatrix::zeros(m, n);
    for i in 0..m {
        let row = dirichlet(rng, n, concentration);
        matrix
            .row_mut(i)
            .copy_from(&DVector::from_vec(row).transpose());
    }
    StochasticMatrix { matrix }
}

pub fn random_degradation<R: Rng + ?Sized>(
    rng: &mut R,
    m_out: usize,
    m_in: usize,
    concentration: f64,
) -> DegradationMap {
    let mut matrix = DMatrix::zeros(m_out, m_in);
    for j in 0..m_in {
        let col = dirichlet(rng, m_out, concentration);
        matrix.column_mut(j).copy_from(&DVector::from_vec(col));
    }
    DegradationMap { matrix }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn load_uniform_grid() {
        let j = load_joint(&[vec![0.25, 0.25], vec![0.25, 0.25]], INGEST_TOL).unwrap();
        assert_eq!(j.row_marginal().as_slice(), &[0.5, 0.5]);
        assert_eq!(j.col_marginal().as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn load_computes_marginals() {
        let j = load_joint(&[vec![0.4, 0.1], vec![0.2, 0.3]], INGEST_TOL).unwrap();
        assert_abs_diff_eq!(j.row_marginal().get(0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(j.row_marginal().get(1), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(j.col_marginal().get(0), 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(j.col_marginal().get(1), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn load_rejects_bad_input() {
        assert!(matches!(
            load_joint(&[vec![0.6, 0.6]], INGEST_TOL),
            Err(Error::NotNormalized { .. })
        ));
        assert_eq!(load_joint(&[], INGEST_TOL), Err(Error::EmptyMatrix));
        assert_eq!(load_joint(&[vec![]], INGEST_TOL), Err(Error::EmptyMatrix));
        assert!(matches!(
            load_joint(&[vec![1.1, -0.1]], INGEST_TOL),
            Err(Error::NegativeMass { row: 0, col: 1, .. })
        ));
        assert!(matches!(
            load_joint(&[vec![0.5, 0.5], vec![0.0]], INGEST_TOL),
            Err(Error::Ragged { row: 1, .. })
        ));
    }

    #[test]
    fn load_clamps_rounding_dust() {
        let j = load_joint(&[vec![0.5, -1e-11], vec![0.25, 0.25]], INGEST_TOL).unwrap();
        assert_eq!(j.get(0, 1), 0.0);
        assert_abs_diff_eq!(j.matrix().sum(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn canonicalize_sorts_rows() {
        let j = load_joint(&[vec![0.1, 0.1], vec![0.5, 0.3]], INGEST_TOL).unwrap();
        let (c, rows, cols) = canonicalize(&j);
        assert_eq!(rows, vec![1, 0]);
        assert_eq!(cols, vec![0, 1]);
        assert_abs_diff_eq!(c.row_marginal().get(0), 0.8, epsilon = 1e-12);
    }

    #[test]
    fn canonicalize_identity_on_sorted() {
        let j = load_joint(&[vec![0.4, 0.2], vec![0.3, 0.1]], INGEST_TOL).unwrap();
        let (c, rows, cols) = canonicalize(&j);
        assert_eq!(rows, vec![0, 1]);
        assert_eq!(cols, vec![0, 1]);
        assert_eq!(c, j);
    }

    #[test]
    fn canonicalize_is_stable_on_ties() {
        let j = load_joint(&[vec![0.3], vec![0.3], vec![0.4]], INGEST_TOL).unwrap();
        let (_, rows, _) = canonicalize(&j);
        // 1-based order (3, 1, 2)
        assert_eq!(rows, vec![2, 0, 1]);
    }

    #[test]
    fn degrade_identity_and_collapse() {
        let j = random_joint(3, 4, 7, 1.0);
        let same = degrade(&j, &DegradationMap::identity(3)).unwrap();
        for (a, b) in same.matrix().iter().zip(j.matrix().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        let c = degrade(&j, &DegradationMap::collapse(3)).unwrap();
        assert_eq!(c.rows(), 1);
        for y in 0..4 {
            assert_abs_diff_eq!(c.get(0, y), j.col_marginal().get(y), epsilon = 1e-12);
        }
        assert!(matches!(
            degrade(&j, &DegradationMap::identity(2)),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn degrade_marginal_is_map_times_marginal() {
        let j = random_joint(3, 3, 11, 1.0);
        let f = random_degradation(&mut seeded_rng(12), 2, 3, 1.0);
        let out = degrade(&j, &f).unwrap();
        for i in 0..2 {
            let expected: f64 = (0..3)
                .map(|x| f.matrix()[(i, x)] * j.row_marginal().get(x))
                .sum();
            assert_abs_diff_eq!(out.row_marginal().get(i), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn pushforward_cases() {
        let j = random_joint(4, 3, 3, 1.0);
        assert_eq!(pushforward(&j, &Surjection::identity(4)).unwrap(), j);
        let c = pushforward(&j, &Surjection::constant(4)).unwrap();
        for y in 0..3 {
            assert_abs_diff_eq!(c.get(0, y), j.col_marginal().get(y), epsilon = 1e-12);
        }
        let j3 = load_joint(
            &[vec![0.2, 0.1], vec![0.3, 0.1], vec![0.1, 0.2]],
            INGEST_TOL,
        )
        .unwrap();
        let g = Surjection::new(vec![0, 0, 1], 2).unwrap();
        let u = pushforward(&j3, &g).unwrap();
        assert_abs_diff_eq!(u.get(0, 0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(u.get(0, 1), 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(u.get(1, 1), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn surjection_validation() {
        assert!(matches!(
            Surjection::new(vec![0, 0, 2], 3),
            Err(Error::NotSurjective { range: 3 })
        ));
        assert!(Surjection::new(vec![0, 3], 2).is_err());
        assert!(Surjection::new(vec![1, 0], 2).is_ok());
    }

    #[test]
    fn random_joint_is_deterministic_and_valid() {
        let a = random_joint(2, 2, 1, 1.0);
        let b = random_joint(2, 2, 1, 1.0);
        assert_eq!(a.to_rows(), b.to_rows());
        let reloaded = load_joint(&a.to_rows(), INGEST_TOL).unwrap();
        assert!(a.matrix().iter().all(|&v| v > 0.0));
        assert_eq!(reloaded.rows(), 2);
    }

    #[test]
    fn random_joint_mean_is_uniform() {
        let draws = 1000;
        let mut mean = DMatrix::<f64>::zeros(4, 4);
        for s in 0..draws {
            mean += random_joint(4, 4, instance_seed(5, 0, s), 1.0).matrix();
        }
        mean /= draws as f64;
        for v in mean.iter() {
            assert!((v - 1.0 / 16.0).abs() < 0.01, "entry mean {v}");
        }
    }

    #[test]
    fn probability_vector_checks() {
        assert!(ProbabilityVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbabilityVector::new(vec![1.5, -0.5]).is_err());
        let p = ProbabilityVector::new(vec![0.2, 0.5, 0.3]).unwrap();
        assert!(!p.is_canonical());
        let (c, order) = p.canonical();
        assert_eq!(c.as_slice(), &[0.5, 0.3, 0.2]);
        assert_eq!(order, vec![1, 2, 0]);
        assert!(c.is_canonical());
    }
}
