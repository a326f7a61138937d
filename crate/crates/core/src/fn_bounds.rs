//! Bounds on `P_{e,M}`, the smallest error of estimating any surjective
//! `M`-ary function of `X` from `Y`.

use serde::Serialize;

use crate::dist::{pushforward, JointDistribution, ProbabilityVector, Surjection};
use crate::error::{Error, Result};
use crate::error_rate::fano_error_rate;
use crate::oracle::bayes_error;
use crate::BoundValue;

/// Largest alphabet accepted by the brute-force search.
pub const BRUTEFORCE_MAX_M: usize = 10;
/// Default cap on the number of canonical surjections enumerated.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// The map merging the `m - M + 1` most likely symbols into one class and
/// keeping the rest, with the induced marginal `p_U`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregationMap {
    pub range: usize,
    pub mapping: Surjection,
    pub p_u: ProbabilityVector,
}

pub fn aggregate_gm(p: &ProbabilityVector, range: usize) -> Result<AggregationMap> {
    let m = p.len();
    if range == 0 || range > m {
        return Err(Error::MOutOfRange {
            m_range: range,
            max: m,
        });
    }
    if !p.is_canonical() {
        return Err(Error::NotCanonical);
    }
    let merged = m - range + 1;
    let labels = (0..m)
        .map(|x| if x < merged { 0 } else { x + range - m })
        .collect();
    let mapping = Surjection::new(labels, range)?;
    let p_u = mapping.push_vector(p)?;
    Ok(AggregationMap {
        range,
        mapping,
        p_u,
    })
}

/// Information measure bounded by `theta` in [`pe_m_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FunctionMeasure {
    /// `I(X;Y) <= theta`, bits.
    MutualInformation,
    /// `rho_m(X;Y) <= theta`.
    MaxCorrelation,
}

/// Lower bound on `P_{e,M}` evaluated on `p_U` from [`aggregate_gm`].
pub fn pe_m_bound(
    p: &ProbabilityVector,
    theta: f64,
    range: usize,
    measure: FunctionMeasure,
) -> Result<BoundValue> {
    if theta < 0.0 {
        return Err(Error::NegativeTheta(theta));
    }
    let agg = aggregate_gm(p, range)?;
    let pu = &agg.p_u;
    let raw = match measure {
        FunctionMeasure::MutualInformation => match fano_error_rate(pu, theta) {
            Err(Error::DegenerateSupport) => 0.0,
            other => other?,
        },
        FunctionMeasure::MaxCorrelation => {
            1.0 - pu.get(0) - theta * (1.0 - pu.sum_of_squares()).max(0.0).sqrt()
        }
    };
    Ok(BoundValue::from_raw(raw))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteForceResult {
    pub value: f64,
    pub argmin: Surjection,
}

/// Stirling number of the second kind, `S(n, k)`.
pub fn stirling2(n: usize, k: usize) -> u128 {
    let mut row = vec![0u128; k + 1];
    row[0] = 1;
    for i in 1..=n {
        for j in (1..=k.min(i)).rev() {
            row[j] = j as u128 * row[j] + row[j - 1];
        }
        row[0] = 0;
    }
    row[k]
}

/// All surjections `{0..m-1} -> {0..range-1}` up to relabeling of the range:
/// the class of `x = 0` is labeled 0, the next new class 1, and so on.
pub fn canonical_surjections(m: usize, range: usize) -> Vec<Surjection> {
    fn extend(
        labels: &mut Vec<usize>,
        used: usize,
        m: usize,
        range: usize,
        out: &mut Vec<Surjection>,
    ) {
        let pos = labels.len();
        if pos == m {
            if used == range {
                out.push(Surjection::new(labels.clone(), range).expect("all labels used"));
            }
            return;
        }
        // not enough positions left to open the missing classes
        if range - used > m - pos {
            return;
        }
        for l in 0..=used.min(range - 1) {
            labels.push(l);
            extend(labels, used.max(l + 1), m, range, out);
            labels.pop();
        }
    }
    let mut out = Vec::new();
    if range >= 1 && range <= m {
        extend(&mut Vec::with_capacity(m), 0, m, range, &mut out);
    }
    out
}

pub fn pe_m_bruteforce(joint: &JointDistribution, range: usize) -> Result<BruteForceResult> {
    pe_m_bruteforce_capped(joint, range, DEFAULT_ENUMERATION_CAP)
}

/// Exact `P_{e,M}` by enumerating canonical surjections.
pub fn pe_m_bruteforce_capped(
    joint: &JointDistribution,
    range: usize,
    cap: u128,
) -> Result<BruteForceResult> {
    let m = joint.rows();
    if range == 0 || range > m {
        return Err(Error::MOutOfRange {
            m_range: range,
            max: m,
        });
    }
    let count = stirling2(m, range);
    if m > BRUTEFORCE_MAX_M || count > cap {
        return Err(Error::TooLarge { count, cap });
    }
    let mut best: Option<BruteForceResult> = None;
    for f in canonical_surjections(m, range) {
        let value = bayes_error(&pushforward(joint, &f)?);
        if best.as_ref().is_none_or(|b| value < b.value) {
            best = Some(BruteForceResult { value, argmin: f });
        }
    }
    Ok(best.expect("at least one surjection exists for 1 <= M <= m"))
}
