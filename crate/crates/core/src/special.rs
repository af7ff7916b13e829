//! Chi-square and standard-normal distribution functions.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use statrs::function::erf::erfc_inv;
use statrs::function::gamma::gamma_ur;

use crate::error::{domain, Result};

/// Largest degrees of freedom accepted by the chi-square routines.
pub const MAX_DOF: u64 = 1 << 24;

fn check_dof(dof: u64) -> Result<()> {
    if dof == 0 || dof > MAX_DOF {
        return domain(format!("chi-square dof must lie in [1, {MAX_DOF}], got {dof}"));
    }
    Ok(())
}

/// Upper tail `P(X > x)` for `X ~ chi2(dof)` (regularized upper incomplete gamma).
pub fn chi2_sf(x: f64, dof: u64) -> Result<f64> {
    check_dof(dof)?;
    if x.is_nan() || x < 0.0 {
        return domain(format!("chi-square argument must be non-negative, got {x}"));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(gamma_ur(dof as f64 / 2.0, x / 2.0).clamp(0.0, 1.0))
}

/// `q` such that `P(X <= q) = p` for `X ~ chi2(dof)`, by bracketed bisection
/// on the survival function.
pub fn chi2_quantile(p: f64, dof: u64) -> Result<f64> {
    check_dof(dof)?;
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("probability must lie in (0, 1), got {p}"));
    }
    let target = 1.0 - p;
    let mut lo = 0.0;
    let mut hi = dof as f64 + 10.0 * (dof as f64).sqrt() + 10.0;
    while chi2_sf(hi, dof)? > target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_sf(mid, dof)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Cached `chi2_quantile(1 - alpha, dof)`: the rejection threshold of an
/// asymptotic chi-square test at level `alpha`.
pub fn chi2_critical(alpha: f64, dof: u64) -> Result<f64> {
    static CACHE: OnceLock<RwLock<HashMap<(u64, u64), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    let key = (alpha.to_bits(), dof);
    if let Some(&q) = cache.read().unwrap_or_else(|e| e.into_inner()).get(&key) {
        return Ok(q);
    }
    let q = chi2_quantile(1.0 - alpha, dof)?;
    cache.write().unwrap_or_else(|e| e.into_inner()).insert(key, q);
    Ok(q)
}

/// Standard normal upper tail `P(Z > z)`.
pub fn normal_sf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z == 0.0 {
        return 0.5;
    }
    let tail = 0.5 * gamma_ur(0.5, 0.5 * z * z);
    if z >= 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Standard normal quantile via the inverse complementary error function.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("probability must lie in (0, 1), got {p}"));
    }
    let mut z = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    // Polish with Newton steps on the survival function.
    for _ in 0..2 {
        let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if pdf <= 0.0 || !z.is_finite() {
            break;
        }
        z += (normal_sf(z) - (1.0 - p)) / pdf;
    }
    Ok(z)
}
