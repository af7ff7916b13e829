//! Haar multiresolution analysis on `[0, T)`.
//!
//! All coefficient arithmetic happens on integer event counts; the
//! `2^{j/2} / sqrt(T)` and `2^J / (M T)` scalings are applied last, so the
//! refinement identities and the equality between the reconstructed
//! decomposition and the bin-count estimator hold exactly.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::models::check_level;
use crate::simulate::EventSeries;

/// Event counts `x^J_k` over the right-open cells `[kT/2^J, (k+1)T/2^J)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicCounts {
    pub level: u32,
    pub counts: Vec<u64>,
    pub duration: f64,
}

impl DyadicCounts {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts one level coarser: `x^{J-1}_k = x^J_{2k} + x^J_{2k+1}`.
    pub fn coarsen(&self) -> Result<DyadicCounts> {
        if self.level == 0 {
            return Err(Error::Config("level-0 counts cannot be coarsened".into()));
        }
        Ok(DyadicCounts {
            level: self.level - 1,
            counts: self.counts.chunks_exact(2).map(|p| p[0] + p[1]).collect(),
            duration: self.duration,
        })
    }

    /// Counts at any coarser level `target <= level`.
    pub fn at_level(&self, target: u32) -> Result<DyadicCounts> {
        if target > self.level {
            return Err(Error::Config(format!("cannot refine counts from level {} to {target}", self.level)));
        }
        let mut c = self.clone();
        while c.level > target {
            c = c.coarsen()?;
        }
        Ok(c)
    }

    /// Cell-wise sum of several count vectors at the same level.
    pub fn pooled(all: &[DyadicCounts]) -> Result<DyadicCounts> {
        let first = all.first().ok_or_else(|| Error::Config("no realizations supplied".into()))?;
        let mut counts = vec![0u64; first.counts.len()];
        for c in all {
            if c.level != first.level || c.duration != first.duration {
                return Err(Error::Config("realizations disagree on level or duration".into()));
            }
            for (acc, x) in counts.iter_mut().zip(&c.counts) {
                *acc += x;
            }
        }
        Ok(DyadicCounts { level: first.level, counts, duration: first.duration })
    }
}

/// Bin event times into the `2^J` dyadic cells of `[0, T)`.
pub fn bin_counts(events: &EventSeries, level: u32) -> Result<DyadicCounts> {
    check_level(level)?;
    let cells = 1usize << level;
    let scale = 2f64.powi(level as i32);
    let mut counts = vec![0u64; cells];
    for &t in events.times() {
        // `t / T` is computed once and then scaled by a power of two (an exact
        // operation), so bins at consecutive levels nest exactly.
        let k = ((t / events.duration()) * scale).floor() as usize;
        counts[k.min(cells - 1)] += 1;
    }
    Ok(DyadicCounts { level, counts, duration: events.duration() })
}

/// Empirical Haar coefficients of one realization (or of pooled counts).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaarDecomposition {
    pub coarse_level: u32,
    pub max_level: u32,
    pub duration: f64,
    /// `alpha_hat_{j0,k}`, `k = 0..2^{j0}`.
    pub alpha: Vec<f64>,
    /// `beta[j - j0][k] = beta_hat_{j,k}` for `j0 <= j < J`.
    pub beta: Vec<Vec<f64>>,
    /// Finest-level counts the coefficients were computed from.
    pub counts: DyadicCounts,
}

/// Integer detail `x^{j+1}_{2k} - x^{j+1}_{2k+1}` for each `k`.
pub fn count_differences(fine: &DyadicCounts) -> Vec<i64> {
    fine.counts.chunks_exact(2).map(|p| p[0] as i64 - p[1] as i64).collect()
}

/// Haar normalisation `2^{j/2} / sqrt(T)`.
pub fn haar_scale(level: u32, duration: f64) -> f64 {
    2f64.powf(level as f64 / 2.0) / duration.sqrt()
}

impl HaarDecomposition {
    /// Decompose finest-level counts into coarse scaling and detail coefficients.
    pub fn from_counts(counts: &DyadicCounts, coarse: u32) -> Result<Self> {
        if coarse > counts.level {
            return Err(Error::Config(format!("j0 = {coarse} exceeds J = {}", counts.level)));
        }
        let duration = counts.duration;
        // levels[i] holds counts at level coarse + i
        let mut levels = vec![counts.clone()];
        while levels.last().is_some_and(|c| c.level > coarse) {
            let next = levels.last().map(DyadicCounts::coarsen).transpose()?.expect("non-empty");
            levels.push(next);
        }
        levels.reverse();
        let alpha_scale = haar_scale(coarse, duration);
        let alpha = levels[0].counts.iter().map(|&x| alpha_scale * x as f64).collect();
        let beta = (coarse..counts.level)
            .map(|j| {
                let s = haar_scale(j, duration);
                count_differences(&levels[(j + 1 - coarse) as usize]).into_iter().map(|d| s * d as f64).collect()
            })
            .collect();
        Ok(HaarDecomposition {
            coarse_level: coarse,
            max_level: counts.level,
            duration,
            alpha,
            beta,
            counts: counts.clone(),
        })
    }

    pub fn beta_at(&self, level: u32) -> Option<&[f64]> {
        level.checked_sub(self.coarse_level).and_then(|i| self.beta.get(i as usize)).map(Vec::as_slice)
    }

    /// Inverse transform back to the level-`J` piecewise-constant estimate.
    pub fn reconstruct(&self) -> PiecewiseConstantFn {
        reconstruct_counts(std::slice::from_ref(&self.counts), self.coarse_level, |_, _| true)
            .expect("consistent counts")
    }

    /// CSV rows `kind,level,k,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,level,k,value\n");
        for (k, a) in self.alpha.iter().enumerate() {
            let _ = writeln!(out, "alpha,{},{k},{a}", self.coarse_level);
        }
        for (i, row) in self.beta.iter().enumerate() {
            for (k, b) in row.iter().enumerate() {
                let _ = writeln!(out, "beta,{},{k},{b}", self.coarse_level + i as u32);
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Bin and decompose a single realization: `alpha_hat` at `j0`, `beta_hat`
/// for `j0..J`.
pub fn decompose(events: &EventSeries, coarse: u32, max_level: u32) -> Result<HaarDecomposition> {
    if coarse > max_level {
        return Err(Error::Config(format!("j0 = {coarse} exceeds J = {max_level}")));
    }
    HaarDecomposition::from_counts(&bin_counts(events, max_level)?, coarse)
}

/// Inverse Haar transform of the pooled counts of `M` realizations, keeping
/// the detail at `(level, k)` only where `keep(level, k)` is true.
///
/// Works in count units: `v^{j+1}_{2k} = (v^j_k + D)/2`,
/// `v^{j+1}_{2k+1} = (v^j_k - D)/2`, then multiplies by `2^J / (M T)`. With
/// every detail kept the result equals [`linear_estimate`] bit for bit.
pub fn reconstruct_counts(
    realizations: &[DyadicCounts],
    coarse: u32,
    keep: impl Fn(u32, usize) -> bool,
) -> Result<PiecewiseConstantFn> {
    let pooled = DyadicCounts::pooled(realizations)?;
    let m = realizations.len() as f64;
    let fine_level = pooled.level;
    if coarse > fine_level {
        return Err(Error::Config(format!("j0 = {coarse} exceeds J = {fine_level}")));
    }
    let mut levels = vec![pooled.clone()];
    for _ in coarse..fine_level {
        let next = levels.last().expect("non-empty").coarsen()?;
        levels.push(next);
    }
    levels.reverse();
    let mut v: Vec<f64> = levels[0].counts.iter().map(|&x| x as f64).collect();
    for j in coarse..fine_level {
        let diffs = count_differences(&levels[(j + 1 - coarse) as usize]);
        let mut next = Vec::with_capacity(v.len() * 2);
        for (k, (&parent, &d)) in v.iter().zip(&diffs).enumerate() {
            let d = if keep(j, k) { d as f64 } else { 0.0 };
            next.push((parent + d) / 2.0);
            next.push((parent - d) / 2.0);
        }
        v = next;
    }
    let delta = 2f64.powi(fine_level as i32) / (m * pooled.duration);
    Ok(PiecewiseConstantFn {
        level: fine_level,
        values: v.into_iter().map(|x| delta * x).collect(),
        duration: pooled.duration,
    })
}

/// Step function with value `values[k]` on `[kT/2^J, (k+1)T/2^J)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstantFn {
    pub level: u32,
    pub values: Vec<f64>,
    pub duration: f64,
}

impl PiecewiseConstantFn {
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t < self.duration) {
            return domain(format!("t = {t} outside [0, {})", self.duration));
        }
        Ok(self.value_at(t))
    }

    fn value_at(&self, t: f64) -> f64 {
        let k = ((t / self.duration) * self.values.len() as f64).floor() as usize;
        self.values[k.min(self.values.len() - 1)]
    }

    /// Values at `t_j = (j - 1) T / m`, `j = 1..=m`.
    pub fn sample_grid(&self, m: usize) -> Vec<f64> {
        grid(m, self.duration).map(|t| self.value_at(t)).collect()
    }

    /// CSV rows `k,start,end,value`.
    pub fn to_csv(&self) -> String {
        let width = self.duration / self.values.len() as f64;
        let mut out = String::from("k,start,end,value\n");
        for (k, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{k},{},{},{v}", k as f64 * width, (k + 1) as f64 * width);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// The evaluation grid `t_j = (j - 1) T / m`, `j = 1..=m`.
pub fn grid(m: usize, duration: f64) -> impl Iterator<Item = f64> {
    (0..m).map(move |j| j as f64 * duration / m as f64)
}

/// CSV rows `t,value` for a sampled reconstruction.
pub fn grid_csv(values: &[f64], duration: f64) -> String {
    let mut out = String::from("t,value\n");
    for (t, v) in grid(values.len(), duration).zip(values) {
        let _ = writeln!(out, "{t},{v}");
    }
    out
}

/// Linear estimator `lambda_hat^J_k = 2^J / (M T) * sum_m x^J_{m,k}`.
pub fn linear_estimate(realizations: &[EventSeries], level: u32) -> Result<PiecewiseConstantFn> {
    let counts = realizations.iter().map(|e| bin_counts(e, level)).collect::<Result<Vec<_>>>()?;
    linear_estimate_from_counts(&counts)
}

pub fn linear_estimate_from_counts(realizations: &[DyadicCounts]) -> Result<PiecewiseConstantFn> {
    let pooled = DyadicCounts::pooled(realizations)?;
    let delta = 2f64.powi(pooled.level as i32) / (realizations.len() as f64 * pooled.duration);
    Ok(PiecewiseConstantFn {
        level: pooled.level,
        values: pooled.counts.iter().map(|&x| delta * x as f64).collect(),
        duration: pooled.duration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fixture() -> EventSeries {
        EventSeries::new(vec![0.1, 0.2, 0.3, 0.6], 1.0).unwrap()
    }

    #[test]
    fn binning_examples() {
        assert_eq!(bin_counts(&fixture(), 1).unwrap().counts, vec![3, 1]);
        let fine = bin_counts(&fixture(), 2).unwrap();
        // 0.6 lies in [0.5, 0.75), the third quarter
        assert_eq!(fine.counts, vec![2, 1, 1, 0]);
        assert_eq!(fine.coarsen().unwrap().counts, vec![3, 1]);
        assert_eq!(bin_counts(&EventSeries::empty(1.0).unwrap(), 3).unwrap().counts, vec![0; 8]);
        assert!(bin_counts(&fixture(), 31).is_err());
    }

    #[test]
    fn right_open_bins() {
        let e = EventSeries::new(vec![0.5], 1.0).unwrap();
        assert_eq!(bin_counts(&e, 1).unwrap().counts, vec![0, 1]);
        let e = EventSeries::new(vec![0.75, 1.5], 2.0).unwrap();
        assert_eq!(bin_counts(&e, 2).unwrap().counts, vec![0, 1, 0, 1]);
    }

    #[test]
    fn decompose_example() {
        let d = decompose(&fixture(), 0, 1).unwrap();
        assert_eq!(d.alpha, vec![4.0]);
        assert_eq!(d.beta, vec![vec![2.0]]);
        let empty = decompose(&EventSeries::empty(1.0).unwrap(), 1, 4).unwrap();
        assert!(empty.alpha.iter().chain(empty.beta.iter().flatten()).all(|&x| x == 0.0));
        assert!(decompose(&fixture(), 3, 2).is_err());
    }

    #[test]
    fn decompose_with_duration_scaling() {
        let e = EventSeries::new(vec![0.2, 0.4, 0.6, 3.0], 4.0).unwrap();
        let d = decompose(&e, 0, 1).unwrap();
        assert_relative_eq!(d.alpha[0], 4.0 / 2.0);
        assert_relative_eq!(d.beta[0][0], (3.0 - 1.0) / 2.0);
    }

    #[test]
    fn linear_estimate_examples() {
        let f = linear_estimate(&[fixture()], 1).unwrap();
        assert_eq!(f.values, vec![6.0, 2.0]);
        assert_eq!(f.evaluate(0.25).unwrap(), 6.0);
        assert_eq!(f.evaluate(0.5).unwrap(), 2.0);
        assert!(f.evaluate(1.0).is_err());
        let z = linear_estimate(&[EventSeries::empty(1.0).unwrap()], 2).unwrap();
        assert_eq!(z.values, vec![0.0; 4]);
        let two = linear_estimate(&[fixture(), EventSeries::empty(1.0).unwrap()], 1).unwrap();
        assert_eq!(two.values, vec![3.0, 1.0]);
    }

    #[test]
    fn reconstruction_matches_linear_estimate() {
        let d = decompose(&fixture(), 0, 3).unwrap();
        assert_eq!(d.reconstruct(), linear_estimate(&[fixture()], 3).unwrap());
    }

    #[test]
    fn dropping_every_detail_leaves_coarse_average() {
        let c = bin_counts(&fixture(), 3).unwrap();
        let f = reconstruct_counts(&[c], 1, |_, _| false).unwrap();
        assert_eq!(f.values, vec![6.0, 6.0, 6.0, 6.0, 2.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn grid_sampling_and_csv() {
        let f = PiecewiseConstantFn { level: 1, values: vec![6.0, 2.0], duration: 1.0 };
        assert_eq!(f.sample_grid(4), vec![6.0, 6.0, 2.0, 2.0]);
        assert!(f.to_csv().starts_with("k,start,end,value\n0,0,0.5,6\n"));
        assert!(grid_csv(&[1.0, 2.0], 1.0).contains("0.5,2"));
        let d = decompose(&fixture(), 0, 1).unwrap();
        assert_eq!(d.to_csv(), "kind,level,k,value\nalpha,0,0,4\nbeta,0,0,2\n");
        let back: HaarDecomposition = serde_json::from_str(&d.to_json().unwrap()).unwrap();
        assert_eq!(back, d);
    }
}
