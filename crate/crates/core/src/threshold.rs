//! Coefficient selection strategies and the nonlinear Haar estimator.
//!
//! Levels are numbered as in the decomposition: the coarse scaling
//! coefficients live at `j0` and are always kept; detail levels
//! `j0..=J` are thresholded, so the estimate is reconstructed on the
//! `2^{J+1}` cells of level `J + 1` and there are `Q = 2^{J+1} - 2^{j0}`
//! candidate coefficients.
//!
//! Every statistic depends on the `M` realizations only through pooled cell
//! counts, so the strategies operate on [`DyadicCounts`] pooled at level
//! `J + 1`; per-realization counts are only needed to form that pool.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::haar::{bin_counts, count_differences, haar_scale, reconstruct_counts, DyadicCounts, PiecewiseConstantFn};
use crate::lrt::{innovation_from_counts, pairwise_from_sums, single_coefficient_innovation_test, BoundaryPolicy};
use crate::models::check_level;
use crate::simulate::EventSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Keep every coefficient (the linear estimator).
    Linear,
    /// Hard threshold at `omega` estimated standard deviations.
    Dml,
    /// Per-coefficient LRT with Benjamini–Hochberg–Yekutieli FDR control.
    LrtLocal,
    /// Per-level recursive LRT that peels off the largest coefficient.
    LrtIntermediate,
    /// Per-level LRT with Holm–Bonferroni family-wise control.
    LrtGlobal,
}

impl Strategy {
    pub const ALL: [Strategy; 5] =
        [Strategy::Linear, Strategy::Dml, Strategy::LrtLocal, Strategy::LrtIntermediate, Strategy::LrtGlobal];

    /// Column label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Strategy::Linear => "Linear",
            Strategy::Dml => "DM-L",
            Strategy::LrtLocal => "LRT-L",
            Strategy::LrtIntermediate => "LRT-I",
            Strategy::LrtGlobal => "LRT-G",
        }
    }

    pub fn uses_lrt(self) -> bool {
        matches!(self, Strategy::LrtLocal | Strategy::LrtIntermediate | Strategy::LrtGlobal)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Linear => "linear",
            Strategy::Dml => "dml",
            Strategy::LrtLocal => "lrt-local",
            Strategy::LrtIntermediate => "lrt-intermediate",
            Strategy::LrtGlobal => "lrt-global",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy '{s}'")))
    }
}

/// Which levels the Holm–Bonferroni procedure keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HolmReading {
    /// Zero the levels whose null is rejected; keep the others whole.
    #[default]
    ZeroRejected,
    /// Keep the levels whose null is rejected; zero the others.
    KeepRejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub j0: u32,
    /// Finest thresholded detail level.
    #[serde(rename = "J")]
    pub max_level: u32,
    pub alpha: f64,
    pub omega: f64,
    pub policy: BoundaryPolicy,
    pub holm: HolmReading,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            j0: 3,
            max_level: 7,
            alpha: 0.05,
            omega: 3.0,
            policy: BoundaryPolicy::Conservative,
            holm: HolmReading::ZeroRejected,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.j0 > self.max_level {
            return Err(Error::Config(format!("j0 = {} exceeds J = {}", self.j0, self.max_level)));
        }
        check_level(self.max_level + 1)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(Error::Config(format!("omega must be non-negative, got {}", self.omega)));
        }
        Ok(())
    }

    /// Level at which counts are binned and the estimate is reconstructed.
    pub fn count_level(&self) -> u32 {
        self.max_level + 1
    }

    /// Number of thresholded coefficients `2^{J+1} - 2^{j0}`.
    pub fn coefficient_count(&self) -> usize {
        (1usize << (self.max_level + 1)) - (1usize << self.j0)
    }
}

/// Keep flags (and the score each decision was based on) per detail level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMask {
    pub j0: u32,
    #[serde(rename = "J")]
    pub max_level: u32,
    /// `keep[L - j0][k]`.
    pub keep: Vec<Vec<bool>>,
    /// p-value or threshold behind each decision (NaN when none applies).
    pub score: Vec<Vec<f64>>,
}

impl ThresholdMask {
    pub fn full(j0: u32, max_level: u32) -> Self {
        Self::uniform(j0, max_level, true)
    }

    fn uniform(j0: u32, max_level: u32, value: bool) -> Self {
        let keep: Vec<Vec<bool>> = (j0..=max_level).map(|l| vec![value; 1usize << l]).collect();
        let score = keep.iter().map(|row| vec![f64::NAN; row.len()]).collect();
        ThresholdMask { j0, max_level, keep, score }
    }

    pub fn is_kept(&self, level: u32, k: usize) -> bool {
        level >= self.j0 && self.keep.get((level - self.j0) as usize).is_some_and(|row| row[k])
    }

    pub fn kept_count(&self) -> usize {
        self.keep.iter().flatten().filter(|&&b| b).count()
    }

    pub fn total(&self) -> usize {
        self.keep.iter().map(Vec::len).sum()
    }

    /// CSV rows `level,k,kept,score`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,k,kept,score\n");
        for (i, (row, scores)) in self.keep.iter().zip(&self.score).enumerate() {
            for (k, (kept, s)) in row.iter().zip(scores).enumerate() {
                let s = if s.is_nan() { String::new() } else { s.to_string() };
                let _ = writeln!(out, "{},{k},{},{s}", self.j0 + i as u32, u8::from(*kept));
            }
        }
        out
    }
}

/// Pooled counts at level `L + 1` for every thresholded level `L`, finest first
/// computed from the level-`(J+1)` pool.
fn pooled_by_level(pooled: &DyadicCounts, cfg: &ThresholdConfig) -> Result<Vec<DyadicCounts>> {
    if pooled.level != cfg.count_level() {
        return Err(Error::Config(format!("counts at level {} but J + 1 = {}", pooled.level, cfg.count_level())));
    }
    (cfg.j0..=cfg.max_level).map(|l| pooled.at_level(l + 1)).collect()
}

/// DM-L hard threshold: keep `(L, k)` iff `|mean beta_hat| > omega * sqrt(mean var_hat / M)`
/// with `var_hat = (2^L / T) (x_{2k} + x_{2k+1})`.
pub fn dml_hard_threshold(pooled: &DyadicCounts, replicates: usize, cfg: &ThresholdConfig) -> Result<ThresholdMask> {
    cfg.validate()?;
    let m = replicates as f64;
    let duration = pooled.duration;
    let mut mask = ThresholdMask::uniform(cfg.j0, cfg.max_level, false);
    for (i, fine) in pooled_by_level(pooled, cfg)?.iter().enumerate() {
        let level = cfg.j0 + i as u32;
        let scale = haar_scale(level, duration);
        for (k, pair) in fine.counts.chunks_exact(2).enumerate() {
            let mean_beta = scale * (pair[0] as f64 - pair[1] as f64) / m;
            let mean_var = scale * scale * (pair[0] + pair[1]) as f64 / m;
            let threshold = cfg.omega * (mean_var / m).sqrt();
            mask.keep[i][k] = mean_beta.abs() > threshold;
            mask.score[i][k] = threshold;
        }
    }
    Ok(mask)
}

/// Benjamini–Hochberg–Yekutieli step-up: with `alpha_Q = alpha / H_Q`, find
/// the largest `i` with `p_(i) <= (i / Q) alpha_Q` and select every p-value
/// `<= p_(i)`. Ties keep their input order.
pub fn fdr_select(p_values: &[f64], alpha: f64) -> Vec<bool> {
    let q = p_values.len();
    let harmonic: f64 = (1..=q).map(|i| 1.0 / i as f64).sum();
    let alpha_q = alpha / harmonic;
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let cutoff = (1..=q).rev().find(|&i| p_values[order[i - 1]] <= i as f64 / q as f64 * alpha_q);
    match cutoff {
        None => vec![false; q],
        Some(i) => {
            let p_star = p_values[order[i - 1]];
            p_values.iter().map(|&p| p <= p_star).collect()
        }
    }
}

/// FDR-local thresholding over all `(L, k)` using single-coefficient LRT p-values.
pub fn fdr_local(pooled: &DyadicCounts, cfg: &ThresholdConfig) -> Result<ThresholdMask> {
    cfg.validate()?;
    let mut mask = ThresholdMask::uniform(cfg.j0, cfg.max_level, false);
    for (i, fine) in pooled_by_level(pooled, cfg)?.iter().enumerate() {
        for (k, pair) in fine.counts.chunks_exact(2).enumerate() {
            mask.score[i][k] = single_coefficient_innovation_test(pair[0], pair[1], cfg.alpha)?.p_value;
        }
    }
    let flat: Vec<f64> = mask.score.iter().flatten().copied().collect();
    let mut selected = fdr_select(&flat, cfg.alpha).into_iter();
    for row in &mut mask.keep {
        for flag in row.iter_mut() {
            *flag = selected.next().expect("one decision per coefficient");
        }
    }
    Ok(mask)
}

/// Holm step-down: sort ascending, find the minimal `i` with
/// `p_(i) > alpha / (Q + 1 - i)`; hypotheses `1..i` (exclusive) are rejected.
/// Returns the rejection flag of each input p-value.
pub fn holm_rejections(p_values: &[f64], alpha: f64) -> Vec<bool> {
    let q = p_values.len();
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let first_accept = (1..=q).find(|&i| p_values[order[i - 1]] > alpha / (q + 1 - i) as f64).unwrap_or(q + 1);
    let mut rejected = vec![false; q];
    for &idx in &order[..first_accept - 1] {
        rejected[idx] = true;
    }
    rejected
}

/// Holm–Bonferroni global thresholding from per-level p-values. A level
/// without any events carries no evidence and gets `p = 1`.
pub fn holm_global(pooled: &DyadicCounts, cfg: &ThresholdConfig) -> Result<ThresholdMask> {
    cfg.validate()?;
    let levels = pooled_by_level(pooled, cfg)?;
    let mut p = Vec::with_capacity(levels.len());
    for fine in &levels {
        p.push(match innovation_from_counts(fine, cfg.alpha, cfg.policy) {
            Ok(o) => o.p_value,
            Err(Error::AllZeroData(_)) => 1.0,
            Err(e) => return Err(e),
        });
    }
    Ok(holm_mask(&p, cfg))
}

/// Mask from per-level p-values (levels `j0..=J`).
pub fn holm_mask(level_p_values: &[f64], cfg: &ThresholdConfig) -> ThresholdMask {
    let rejected = holm_rejections(level_p_values, cfg.alpha);
    let mut mask = ThresholdMask::uniform(cfg.j0, cfg.max_level, false);
    for (i, &r) in rejected.iter().enumerate() {
        let keep = match cfg.holm {
            HolmReading::ZeroRejected => !r,
            HolmReading::KeepRejected => r,
        };
        mask.keep[i].fill(keep);
        mask.score[i].fill(level_p_values[i]);
    }
    mask
}

/// Recursive per-level selection on pooled level-`(L+1)` counts: while the
/// joint pairwise LRT on the remaining pairs rejects, retain the pair with the
/// largest `|x_{2k} - x_{2k+1}|` (lowest `k` on ties) and drop it from the
/// null. Remaining pairs that are all zero count as acceptance. Returns the
/// keep flags and, per coefficient, the joint p-value of the test that
/// retained it (or of the final accepting test).
pub fn recursive_level(fine: &DyadicCounts, alpha: f64, policy: BoundaryPolicy) -> Result<(Vec<bool>, Vec<f64>)> {
    let diffs = count_differences(fine);
    let pairs = diffs.len();
    let mut keep = vec![false; pairs];
    let mut score = vec![f64::NAN; pairs];
    let mut remaining: Vec<usize> = (0..pairs).collect();
    let mut sums = Vec::with_capacity(2 * pairs);
    let final_p = loop {
        if remaining.is_empty() {
            break f64::NAN;
        }
        sums.clear();
        sums.extend(remaining.iter().flat_map(|&k| [fine.counts[2 * k] as f64, fine.counts[2 * k + 1] as f64]));
        let outcome = match pairwise_from_sums(&sums, alpha, policy) {
            Ok(o) => o,
            Err(Error::AllZeroData(_)) => break 1.0,
            Err(e) => return Err(e),
        };
        if !outcome.reject {
            break outcome.p_value;
        }
        let (pos, &k) = remaining
            .iter()
            .enumerate()
            .max_by(|(_, &a), (_, &b)| diffs[a].abs().cmp(&diffs[b].abs()).then(b.cmp(&a)))
            .expect("non-empty");
        keep[k] = true;
        score[k] = outcome.p_value;
        remaining.remove(pos);
    };
    for &k in &remaining {
        score[k] = final_p;
    }
    Ok((keep, score))
}

pub fn recursive_intermediate(pooled: &DyadicCounts, cfg: &ThresholdConfig) -> Result<ThresholdMask> {
    cfg.validate()?;
    let mut mask = ThresholdMask::uniform(cfg.j0, cfg.max_level, false);
    for (i, fine) in pooled_by_level(pooled, cfg)?.iter().enumerate() {
        let (keep, score) = recursive_level(fine, cfg.alpha, cfg.policy)?;
        mask.keep[i] = keep;
        mask.score[i] = score;
    }
    Ok(mask)
}

/// Mask for `strategy` from the per-realization level-`(J+1)` counts.
pub fn select(realizations: &[DyadicCounts], cfg: &ThresholdConfig, strategy: Strategy) -> Result<ThresholdMask> {
    cfg.validate()?;
    let pooled = DyadicCounts::pooled(realizations)?;
    match strategy {
        Strategy::Linear => {
            pooled_by_level(&pooled, cfg)?;
            Ok(ThresholdMask::full(cfg.j0, cfg.max_level))
        }
        Strategy::Dml => dml_hard_threshold(&pooled, realizations.len(), cfg),
        Strategy::LrtLocal => fdr_local(&pooled, cfg),
        Strategy::LrtIntermediate => recursive_intermediate(&pooled, cfg),
        Strategy::LrtGlobal => holm_global(&pooled, cfg),
    }
}

/// Thresholded Haar estimate: coarse scaling part plus the kept details.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearEstimate {
    pub strategy: Strategy,
    pub config: ThresholdConfig,
    pub mask: ThresholdMask,
    pub function: PiecewiseConstantFn,
}

impl NonlinearEstimate {
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        self.function.evaluate(t)
    }
}

pub fn estimate_from_counts(
    realizations: &[DyadicCounts],
    cfg: &ThresholdConfig,
    strategy: Strategy,
) -> Result<NonlinearEstimate> {
    let mask = select(realizations, cfg, strategy)?;
    let function = reconstruct_counts(realizations, cfg.j0, |l, k| mask.is_kept(l, k))?;
    Ok(NonlinearEstimate { strategy, config: *cfg, mask, function })
}

/// Bin `M` realizations at level `J + 1`, select coefficients and reconstruct.
pub fn estimate_nonlinear(
    realizations: &[EventSeries],
    cfg: &ThresholdConfig,
    strategy: Strategy,
) -> Result<NonlinearEstimate> {
    cfg.validate()?;
    let counts = realizations.iter().map(|e| bin_counts(e, cfg.count_level())).collect::<Result<Vec<_>>>()?;
    estimate_from_counts(&counts, cfg, strategy)
}
