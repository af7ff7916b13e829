//! Likelihood-ratio tests for multiscale homogeneity and innovation.
//!
//! Both statistics depend on the `M x P` observation matrix only through its
//! column sums, so every test reduces the matrix first and works on pooled
//! counts (`0 log 0 = 0` throughout).

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::haar::{bin_counts, DyadicCounts};
use crate::simulate::EventSeries;
use crate::special::{chi2_critical, chi2_sf};

/// How the degrees of freedom of the pairwise test react to pairs whose
/// pooled count is zero (MLE on the boundary of the parameter space).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryPolicy {
    /// `dof = P`, ignoring boundary pairs (the most conservative choice).
    #[default]
    Conservative,
    /// `dof = P - U`.
    MaxLikelihood,
    /// `dof = P - ceil(U / 2)`.
    Intermediate,
}

impl BoundaryPolicy {
    pub fn dof(self, pairs: usize, zero_pairs: usize) -> usize {
        match self {
            BoundaryPolicy::Conservative => pairs,
            BoundaryPolicy::MaxLikelihood => pairs - zero_pairs,
            BoundaryPolicy::Intermediate => pairs - zero_pairs.div_ceil(2),
        }
    }
}

impl std::str::FromStr for BoundaryPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conservative" => Ok(BoundaryPolicy::Conservative),
            "max-likelihood" | "max_likelihood" => Ok(BoundaryPolicy::MaxLikelihood),
            "intermediate" => Ok(BoundaryPolicy::Intermediate),
            other => Err(Error::Config(format!("unknown boundary policy '{other}'"))),
        }
    }
}

/// Result of one likelihood-ratio (or Gaussian) test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrtOutcome {
    #[serde(rename = "R")]
    pub statistic: f64,
    pub dof: usize,
    #[serde(rename = "p")]
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub boundary_count: usize,
    pub policy: Option<BoundaryPolicy>,
}

/// JSON export record `{test, level, R, dof, p, reject, boundary_count, policy}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrtRecord {
    pub test: String,
    pub level: u32,
    #[serde(flatten)]
    pub outcome: LrtOutcome,
}

impl LrtOutcome {
    pub fn record(&self, test: &str, level: u32) -> LrtRecord {
        LrtRecord { test: test.to_string(), level, outcome: *self }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("significance level must lie in (0, 1), got {alpha}"));
    }
    Ok(())
}

fn xlogx_ratio(x: f64, reference: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / reference).ln()
    }
}

/// Decision and p-value for a chi-square statistic. A zero-dof test carries
/// no information and never rejects.
pub fn chi2_decision(statistic: f64, dof: usize, alpha: f64) -> Result<(f64, bool)> {
    check_alpha(alpha)?;
    if dof == 0 {
        return Ok((1.0, false));
    }
    let p = chi2_sf(statistic.max(0.0), dof as u64)?;
    let reject = statistic > chi2_critical(alpha, dof as u64)?;
    Ok((p, reject))
}

/// `R = 2 sum_i Y_i log(P Y_i / sum Y)` for pooled (unscaled) column sums `Y`.
pub fn equal_means_statistic(column_sums: &[f64]) -> f64 {
    let total: f64 = column_sums.iter().sum();
    let mean = total / column_sums.len() as f64;
    2.0 * column_sums.iter().map(|&y| xlogx_ratio(y, mean)).sum::<f64>()
}

/// Pairwise statistic and number of all-zero pairs for pooled counts laid out
/// as `(y_0, y_1), (y_2, y_3), ...`.
pub fn pairwise_statistic(column_sums: &[f64]) -> (f64, usize) {
    let mut r = 0.0;
    let mut zero = 0;
    for pair in column_sums.chunks_exact(2) {
        let p = 0.5 * (pair[0] + pair[1]);
        if p == 0.0 {
            zero += 1;
        } else {
            r += xlogx_ratio(pair[0], p) + xlogx_ratio(pair[1], p);
        }
    }
    (2.0 * r, zero)
}

fn column_sums(x: &[Vec<f64>], delta: f64) -> Result<Vec<f64>> {
    let first = x.first().ok_or_else(|| Error::Domain("empty observation matrix".into()))?;
    if !(delta > 0.0 && delta.is_finite()) {
        return domain(format!("scale delta must be positive, got {delta}"));
    }
    let mut sums = vec![0.0; first.len()];
    for row in x {
        if row.len() != first.len() {
            return domain("ragged observation matrix");
        }
        for (s, &v) in sums.iter_mut().zip(row) {
            if !(v >= 0.0 && v.is_finite()) {
                return domain(format!("observations must be finite and non-negative, got {v}"));
            }
            *s += v / delta;
        }
    }
    Ok(sums)
}

/// Equal-means test on pooled unscaled counts (`dof = P - 1`).
pub fn equal_means_from_sums(column_sums: &[f64], alpha: f64) -> Result<LrtOutcome> {
    if column_sums.len() < 2 {
        return domain("the equal-means test needs at least two cells");
    }
    if column_sums.iter().sum::<f64>() <= 0.0 {
        return Err(Error::AllZeroData("no events in any cell".into()));
    }
    let statistic = equal_means_statistic(column_sums);
    let dof = column_sums.len() - 1;
    let (p_value, reject) = chi2_decision(statistic, dof, alpha)?;
    let boundary_count = column_sums.iter().filter(|&&y| y == 0.0).count();
    Ok(LrtOutcome { statistic, dof, p_value, reject, alpha, boundary_count, policy: None })
}

/// Test that the `P` columns of an `M x P` matrix of scaled Poisson
/// observations `delta * Pois(mu_i)` share one mean.
pub fn lrt_equal_means(x: &[Vec<f64>], delta: f64, alpha: f64) -> Result<LrtOutcome> {
    equal_means_from_sums(&column_sums(x, delta)?, alpha)
}

/// Pairwise test on pooled counts `(y_{2i}, y_{2i+1})`; all-zero pairs add
/// nothing to `R` and adjust the dof through `policy`.
pub fn pairwise_from_sums(column_sums: &[f64], alpha: f64, policy: BoundaryPolicy) -> Result<LrtOutcome> {
    if column_sums.is_empty() || !column_sums.len().is_multiple_of(2) {
        return domain(format!("the pairwise test needs an even, non-zero column count, got {}", column_sums.len()));
    }
    if column_sums.iter().sum::<f64>() <= 0.0 {
        return Err(Error::AllZeroData("no events in any pair".into()));
    }
    let (statistic, zero) = pairwise_statistic(column_sums);
    let dof = policy.dof(column_sums.len() / 2, zero);
    let (p_value, reject) = chi2_decision(statistic, dof, alpha)?;
    Ok(LrtOutcome { statistic, dof, p_value, reject, alpha, boundary_count: zero, policy: Some(policy) })
}

/// Test `mu_{2i} = mu_{2i+1}` for all pairs of an `M x 2P` count matrix.
pub fn lrt_pairwise(x: &[Vec<f64>], alpha: f64, policy: BoundaryPolicy) -> Result<LrtOutcome> {
    pairwise_from_sums(&column_sums(x, 1.0)?, alpha, policy)
}

/// Single-coefficient innovation test. A `(0, 0)` pair carries no evidence:
/// it never rejects and has `p = 1`.
pub fn single_coefficient_innovation_test(left: u64, right: u64, alpha: f64) -> Result<LrtOutcome> {
    check_alpha(alpha)?;
    if left == 0 && right == 0 {
        return Ok(LrtOutcome {
            statistic: 0.0,
            dof: 1,
            p_value: 1.0,
            reject: false,
            alpha,
            boundary_count: 1,
            policy: Some(BoundaryPolicy::Conservative),
        });
    }
    pairwise_from_sums(&[left as f64, right as f64], alpha, BoundaryPolicy::Conservative)
}

fn pooled_at(realizations: &[EventSeries], level: u32) -> Result<DyadicCounts> {
    let counts = realizations.iter().map(|e| bin_counts(e, level)).collect::<Result<Vec<_>>>()?;
    DyadicCounts::pooled(&counts)
}

fn as_f64(counts: &DyadicCounts) -> Vec<f64> {
    counts.counts.iter().map(|&x| x as f64).collect()
}

/// Level-`J` homogeneity test from pooled level-`J` counts.
pub fn homogeneity_from_counts(pooled: &DyadicCounts, alpha: f64) -> Result<LrtOutcome> {
    if pooled.level == 0 {
        return Err(Error::VacuousTest("every process is level-0 homogeneous".into()));
    }
    equal_means_from_sums(&as_f64(pooled), alpha)
}

/// Level-`J` homogeneity: are the `2^J` cell means equal? (`dof = 2^J - 1`).
pub fn test_homogeneity(realizations: &[EventSeries], level: u32, alpha: f64) -> Result<LrtOutcome> {
    if level == 0 {
        return Err(Error::VacuousTest("every process is level-0 homogeneous".into()));
    }
    homogeneity_from_counts(&pooled_at(realizations, level)?, alpha)
}

/// Level-`L` innovation test from pooled level-`(L+1)` counts.
pub fn innovation_from_counts(pooled_fine: &DyadicCounts, alpha: f64, policy: BoundaryPolicy) -> Result<LrtOutcome> {
    if pooled_fine.level == 0 {
        return domain("innovation counts must be at level L + 1 >= 1");
    }
    pairwise_from_sums(&as_f64(pooled_fine), alpha, policy)
}

/// Level-`L` innovation: do the two halves of every level-`L` cell share a mean?
pub fn test_innovation(
    realizations: &[EventSeries],
    level: u32,
    alpha: f64,
    policy: BoundaryPolicy,
) -> Result<LrtOutcome> {
    innovation_from_counts(&pooled_at(realizations, level + 1)?, alpha, policy)
}
