//! Daubechies D4 wavelets for point-process intensities.
//!
//! The scaling function and mother wavelet are tabulated on the dyadic grid
//! `2^{-r}` by the cascade (dyadic refinement) recursion and linearly
//! interpolated between grid points. Event times on `[0, T)` are rescaled to
//! `u = 3t/T` on `[0, 3)`, coefficients are stochastic integrals (sums over
//! events), and the reconstruction is mapped back as
//! `lambda_hat(t) = (3/T) lambda_hat_u(3t/T)`.
//!
//! Detail coefficients whose support leaves `[0, 3]` (translations
//! `-1, 0, 3*2^L - 1, 3*2^L`) are estimated and used in the reconstruction
//! but flagged as boundary terms: they are never tested and always kept.

use std::fmt::Write as _;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::lrt::LrtOutcome;
use crate::models::check_level;
use crate::simulate::EventSeries;
use crate::special::{normal_quantile, normal_sf};
use crate::threshold::fdr_select;

/// Default cascade depth (grid spacing `2^-12`).
pub const DEFAULT_DEPTH: u32 = 12;
/// Shallowest accepted cascade depth.
pub const MIN_DEPTH: u32 = 6;
/// Deepest accepted cascade depth (table memory grows as `3 * 2^r`).
pub const MAX_DEPTH: u32 = 24;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// D4 low-pass filter `h_0..h_3`.
pub fn d4_filter() -> [f64; 4] {
    let norm = 4.0 * std::f64::consts::SQRT_2;
    [(1.0 + SQRT3) / norm, (3.0 + SQRT3) / norm, (3.0 - SQRT3) / norm, (1.0 - SQRT3) / norm]
}

/// A function sampled on `start + i * 2^-depth`, linearly interpolated and
/// zero outside the sampled support.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatedWavelet {
    pub start: f64,
    pub depth: u32,
    pub values: Vec<f64>,
}

impl InterpolatedWavelet {
    pub fn step(&self) -> f64 {
        2f64.powi(-(self.depth as i32))
    }

    pub fn support(&self) -> (f64, f64) {
        (self.start, self.start + (self.values.len() - 1) as f64 * self.step())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let pos = (x - self.start) * 2f64.powi(self.depth as i32);
        if pos.is_nan() || pos < 0.0 || pos > (self.values.len() - 1) as f64 {
            return 0.0;
        }
        let i = pos.floor() as usize;
        if i + 1 >= self.values.len() {
            return self.values[self.values.len() - 1];
        }
        let frac = pos - i as f64;
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }

    /// Exact grid lookup for `x = start + i * 2^-depth`.
    fn at_grid(&self, i: i64) -> f64 {
        usize::try_from(i).ok().and_then(|i| self.values.get(i)).copied().unwrap_or(0.0)
    }

    /// Trapezoid-rule integral over the sampled support.
    pub fn integral(&self) -> f64 {
        let n = self.values.len();
        let inner: f64 = self.values.iter().sum::<f64>() - 0.5 * (self.values[0] + self.values[n - 1]);
        inner * self.step()
    }

    /// CSV rows `x,value`.
    pub fn to_csv(&self, column: &str) -> String {
        let mut out = format!("x,{column}\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{},{v}", self.start + i as f64 * self.step());
        }
        out
    }
}

/// Cascade-generated `phi` (support `[0, 3]`) and `psi` (support `[-1, 2]`).
#[derive(Debug, Clone, PartialEq)]
pub struct D4Tables {
    pub phi: InterpolatedWavelet,
    pub psi: InterpolatedWavelet,
}

/// Tabulate the D4 scaling function and wavelet at depth `r`.
///
/// Starts from the exact integer values `phi(1) = (1+sqrt3)/2`,
/// `phi(2) = (1-sqrt3)/2` and fills each finer dyadic level with
/// `phi(x) = sqrt2 * sum_k h_k phi(2x - k)`; then
/// `psi(x) = sqrt2 * sum_{k=-2}^{1} (-1)^k h_{1-k} phi(2x - k)`.
pub fn cascade_d4(depth: u32) -> Result<D4Tables> {
    if !(MIN_DEPTH..=MAX_DEPTH).contains(&depth) {
        return Err(Error::Config(format!("cascade depth must lie in [{MIN_DEPTH}, {MAX_DEPTH}], got {depth}")));
    }
    let h = d4_filter();
    let s2 = std::f64::consts::SQRT_2;
    let n = 1usize << depth;
    // phi[i] = phi(i / 2^depth), i = 0..=3n
    let mut phi = vec![0.0; 3 * n + 1];
    phi[n] = (1.0 + SQRT3) / 2.0;
    phi[2 * n] = (1.0 - SQRT3) / 2.0;
    for level in 1..=depth {
        let stride = n >> level; // grid index step of the new points
        let mut i = stride;
        while i < 3 * n {
            // x = i / n; 2x - k lies on the previous (already filled) grid
            let mut acc = 0.0;
            for (k, hk) in h.iter().enumerate() {
                let j = 2 * i as i64 - (k * n) as i64;
                if (0..=(3 * n) as i64).contains(&j) {
                    acc += hk * phi[j as usize];
                }
            }
            phi[i] = s2 * acc;
            i += 2 * stride;
        }
    }
    let phi = InterpolatedWavelet { start: 0.0, depth, values: phi };
    // psi on x = -1 + i / n, i = 0..=3n
    let psi_values = (0..=3 * n as i64)
        .map(|i| {
            let x_times_n = i - n as i64;
            s2 * (-2i64..=1)
                .map(|k| {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    sign * h[(1 - k) as usize] * phi.at_grid(2 * x_times_n - k * n as i64)
                })
                .sum::<f64>()
        })
        .collect();
    let psi = InterpolatedWavelet { start: -1.0, depth, values: psi_values };
    Ok(D4Tables { phi, psi })
}

impl D4Tables {
    /// Tables at the default depth, computed once per process.
    pub fn shared() -> &'static D4Tables {
        static TABLES: OnceLock<D4Tables> = OnceLock::new();
        TABLES.get_or_init(|| cascade_d4(DEFAULT_DEPTH).expect("default depth is valid"))
    }

    pub fn depth(&self) -> u32 {
        self.phi.depth
    }

    /// `max |phi(x) - sqrt2 sum_k h_k phi(2x - k)|` over the midpoints of the
    /// table grid (points one level finer than the table).
    pub fn two_scale_residual(&self) -> f64 {
        let h = d4_filter();
        let step = self.phi.step();
        let cells = self.phi.values.len() - 1;
        (0..cells)
            .map(|i| {
                let x = (i as f64 + 0.5) * step;
                let rhs: f64 = h.iter().enumerate().map(|(k, hk)| hk * self.phi.eval(2.0 * x - k as f64)).sum();
                (self.phi.eval(x) - std::f64::consts::SQRT_2 * rhs).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `2^{j/2} phi(2^j u - k)`.
    pub fn phi_jk(&self, level: u32, k: i64, u: f64) -> f64 {
        let s = 2f64.powi(level as i32);
        s.sqrt() * self.phi.eval(s * u - k as f64)
    }

    /// `2^{j/2} psi(2^j u - k)`.
    pub fn psi_jk(&self, level: u32, k: i64, u: f64) -> f64 {
        let s = 2f64.powi(level as i32);
        s.sqrt() * self.psi.eval(s * u - k as f64)
    }
}

/// Rescaled interval length.
const SPAN: f64 = 3.0;

/// First translation of the scaling coefficients at any level.
pub const ALPHA_FIRST_K: i64 = -2;
/// First translation of the detail coefficients at any level.
pub const BETA_FIRST_K: i64 = -1;

fn alpha_range(level: u32) -> std::ops::RangeInclusive<i64> {
    ALPHA_FIRST_K..=3 * (1i64 << level) - 1
}

fn beta_range(level: u32) -> std::ops::RangeInclusive<i64> {
    BETA_FIRST_K..=3 * (1i64 << level)
}

/// Whether `psi_{L,k}` is supported inside `[0, 3]`.
pub fn is_interior(level: u32, k: i64) -> bool {
    k >= 1 && k <= 3 * (1i64 << level) - 2
}

/// Detail coefficients of one level, translations `-1..=3*2^L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct D4Level {
    pub level: u32,
    /// Sum over realizations and events of `psi_{L,k}(u)`.
    pub beta: Vec<f64>,
    /// Sum over realizations and events of `psi_{L,k}(u)^2`.
    pub variance: Vec<f64>,
    pub interior: Vec<bool>,
}

impl D4Level {
    pub fn translation(&self, index: usize) -> i64 {
        BETA_FIRST_K + index as i64
    }
}

/// Pooled D4 coefficients of `M` realizations (sums; divide by `M` for means).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct D4Decomposition {
    pub j0: u32,
    #[serde(rename = "J")]
    pub max_level: u32,
    pub duration: f64,
    pub replicates: usize,
    /// `alpha_hat_{j0,k}`, `k = -2..=3*2^{j0}-1`.
    pub alpha: Vec<f64>,
    /// Detail levels `j0..=J`.
    pub levels: Vec<D4Level>,
}

/// D4 decomposition of `M` realizations: scaling coefficients at `j0` and
/// details for `j0..=J`, all as sums over events of the rescaled process.
pub fn d4_decompose(
    realizations: &[EventSeries],
    j0: u32,
    max_level: u32,
    tables: &D4Tables,
) -> Result<D4Decomposition> {
    if j0 > max_level {
        return Err(Error::Config(format!("j0 = {j0} exceeds J = {max_level}")));
    }
    check_level(max_level + 2)?;
    let first = realizations.first().ok_or_else(|| Error::Config("no realizations supplied".into()))?;
    let duration = first.duration();
    if realizations.iter().any(|e| e.duration() != duration) {
        return Err(Error::Config("realizations disagree on duration".into()));
    }
    let mut alpha = vec![0.0; alpha_range(j0).count()];
    let mut levels: Vec<D4Level> = (j0..=max_level)
        .map(|l| {
            let n = beta_range(l).count();
            let interior = beta_range(l).map(|k| is_interior(l, k)).collect();
            D4Level { level: l, beta: vec![0.0; n], variance: vec![0.0; n], interior }
        })
        .collect();
    for events in realizations {
        for &t in events.times() {
            let u = SPAN * t / duration;
            accumulate(&mut alpha, j0, ALPHA_FIRST_K, u, |k| tables.phi_jk(j0, k, u), 0.0, 3.0, None);
            for lvl in levels.iter_mut() {
                let l = lvl.level;
                let (beta, variance) = (&mut lvl.beta, &mut lvl.variance);
                accumulate(beta, l, BETA_FIRST_K, u, |k| tables.psi_jk(l, k, u), -1.0, 2.0, Some(variance));
            }
        }
    }
    Ok(D4Decomposition { j0, max_level, duration, replicates: realizations.len(), alpha, levels })
}

/// Add `f(k)` to every translation whose support `[lo + k, hi + k] / 2^L`
/// contains `u` (and `f(k)^2` to `squares` when given).
#[allow(clippy::too_many_arguments)]
fn accumulate(
    target: &mut [f64],
    level: u32,
    first_k: i64,
    u: f64,
    f: impl Fn(i64) -> f64,
    lo: f64,
    hi: f64,
    mut squares: Option<&mut Vec<f64>>,
) {
    let s = 2f64.powi(level as i32) * u;
    let k_min = (s - hi).floor() as i64;
    let k_max = (s - lo).ceil() as i64;
    for k in k_min.max(first_k)..=k_max {
        let idx = (k - first_k) as usize;
        if idx >= target.len() {
            break;
        }
        let v = f(k);
        target[idx] += v;
        if let Some(sq) = squares.as_deref_mut() {
            sq[idx] += v * v;
        }
    }
}

/// Two-sided Gaussian test of `beta_{L,k} = 0` from the mean coefficient and
/// mean variance estimate over `M` realizations. A non-positive variance
/// means no events touched the support: never reject, `p = 1`.
pub fn d4_gaussian_coeff_test(mean_beta: f64, mean_var: f64, replicates: usize, alpha: f64) -> Result<LrtOutcome> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("significance level must lie in (0, 1), got {alpha}"));
    }
    if replicates == 0 {
        return Err(Error::Config("M must be at least 1".into()));
    }
    let (statistic, p_value, reject) = if mean_var > 0.0 {
        let z = mean_beta.abs() / (mean_var / replicates as f64).sqrt();
        let critical = normal_quantile(1.0 - alpha / 2.0)?;
        (z, (2.0 * normal_sf(z)).min(1.0), z > critical)
    } else {
        (0.0, 1.0, false)
    };
    Ok(LrtOutcome { statistic, dof: 0, p_value, reject, alpha, boundary_count: 0, policy: None })
}

/// How detail coefficients are selected for the D4 reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "selection")]
pub enum D4Selection {
    KeepAll,
    CoarseOnly,
    /// FDR-local over Gaussian-test p-values of the interior coefficients.
    FdrLocal {
        alpha: f64,
    },
}

/// D4 intensity reconstruction on `[0, T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct D4Estimate {
    pub decomposition: D4Decomposition,
    /// `keep[L - j0][index]`, boundary translations always true.
    pub keep: Vec<Vec<bool>>,
    /// Gaussian-test p-value per detail (NaN for boundary translations).
    pub p_values: Vec<Vec<f64>>,
    tables: &'static D4Tables,
}

impl D4Estimate {
    /// `lambda_hat(t)` for `t` in `[0, T)`.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        let d = &self.decomposition;
        if !(t >= 0.0 && t < d.duration) {
            return domain(format!("t = {t} outside [0, {})", d.duration));
        }
        Ok(self.value_at(t))
    }

    fn value_at(&self, t: f64) -> f64 {
        let d = &self.decomposition;
        let u = SPAN * t / d.duration;
        let mut acc = 0.0;
        for_support(d.j0, ALPHA_FIRST_K, d.alpha.len(), u, 0.0, 3.0, |idx, k| {
            acc += d.alpha[idx] * self.tables.phi_jk(d.j0, k, u);
        });
        for (lvl, keep) in d.levels.iter().zip(&self.keep) {
            for_support(lvl.level, BETA_FIRST_K, lvl.beta.len(), u, -1.0, 2.0, |idx, k| {
                if keep[idx] {
                    acc += lvl.beta[idx] * self.tables.psi_jk(lvl.level, k, u);
                }
            });
        }
        SPAN / d.duration * acc / d.replicates as f64
    }

    /// Values at `t_j = (j - 1) T / m`.
    pub fn sample_grid(&self, m: usize) -> Vec<f64> {
        crate::haar::grid(m, self.decomposition.duration).map(|t| self.value_at(t)).collect()
    }

    pub fn kept_count(&self) -> usize {
        self.keep.iter().flatten().filter(|&&b| b).count()
    }
}

fn for_support(level: u32, first_k: i64, len: usize, u: f64, lo: f64, hi: f64, mut f: impl FnMut(usize, i64)) {
    let s = 2f64.powi(level as i32) * u;
    let k_min = ((s - hi).floor() as i64).max(first_k);
    let k_max = (s - lo).ceil() as i64;
    for k in k_min..=k_max {
        let idx = (k - first_k) as usize;
        if idx >= len {
            break;
        }
        f(idx, k);
    }
}

/// Decompose, select details and reconstruct with the shared default tables.
pub fn d4_estimate(
    realizations: &[EventSeries],
    j0: u32,
    max_level: u32,
    selection: D4Selection,
) -> Result<D4Estimate> {
    let tables = D4Tables::shared();
    let decomposition = d4_decompose(realizations, j0, max_level, tables)?;
    let m = decomposition.replicates;
    let mut p_values: Vec<Vec<f64>> = decomposition.levels.iter().map(|l| vec![f64::NAN; l.beta.len()]).collect();
    let keep = match selection {
        D4Selection::KeepAll => decomposition.levels.iter().map(|l| vec![true; l.beta.len()]).collect(),
        D4Selection::CoarseOnly => decomposition.levels.iter().map(|l| vec![false; l.beta.len()]).collect(),
        D4Selection::FdrLocal { alpha } => {
            let mut flat = Vec::new();
            for (lvl, ps) in decomposition.levels.iter().zip(p_values.iter_mut()) {
                for (i, p) in ps.iter_mut().enumerate() {
                    if lvl.interior[i] {
                        let o = d4_gaussian_coeff_test(lvl.beta[i] / m as f64, lvl.variance[i] / m as f64, m, alpha)?;
                        *p = o.p_value;
                        flat.push(o.p_value);
                    }
                }
            }
            let mut selected = fdr_select(&flat, alpha).into_iter();
            decomposition
                .levels
                .iter()
                .map(|lvl| {
                    lvl.interior.iter().map(|&inside| !inside || selected.next().expect("one per test")).collect()
                })
                .collect()
        }
    };
    Ok(D4Estimate { decomposition, keep, p_values, tables })
}

/// FDR-thresholded D4 estimate.
pub fn d4_estimate_nonlinear(realizations: &[EventSeries], j0: u32, max_level: u32, alpha: f64) -> Result<D4Estimate> {
    d4_estimate(realizations, j0, max_level, D4Selection::FdrLocal { alpha })
}
