//! Intensity functions on `[0, T)`.
//!
//! Every model exposes pointwise evaluation, exact interval integrals
//! (all shipped shapes have closed-form antiderivatives), a least upper
//! bound used by the thinning sampler, and the true Haar quantities used as
//! ground truth by the estimators' tests and the benchmark harness.
//!
//! Models are built from a [`ModelSpec`], the JSON-facing description:
//!
//! ```json
//! {"kind": "triangular", "lambda0": 1000, "xi": 0.1, "v": 1, "duration": 1}
//! {"kind": "blocks", "a0": 10000}
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature;

/// Deepest dyadic level accepted anywhere in the crate.
pub const MAX_LEVEL: u32 = 30;

// Donoho–Johnstone (1994) test-function tables.
const DJ_KNOTS: [f64; 11] = [0.10, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81];
const BLOCKS_HEIGHTS: [f64; 11] = [4.0, -5.0, 3.0, -4.0, 5.0, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2];
const BUMPS_HEIGHTS: [f64; 11] = [4.0, 5.0, 3.0, 4.0, 5.0, 4.2, 2.1, 4.3, 3.1, 5.1, 4.2];
const BUMPS_WIDTHS: [f64; 11] = [0.005, 0.005, 0.006, 0.01, 0.01, 0.03, 0.01, 0.01, 0.005, 0.008, 0.005];

const BUMPS_GRID: usize = 1 << 16;
const BUMPS_MAX_SAFETY: f64 = 1.0 + 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Constant,
    Triangular,
    TriangleSine,
    Blocks,
    Bumps,
    PiecewiseLinear,
}

/// Piecewise triangular rate with `2^v` triangles and mean `lambda0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangularParams {
    pub lambda0: f64,
    pub xi: f64,
    pub v: u32,
}

impl TriangularParams {
    /// Absolute gradient of each linear piece.
    pub fn gradient(&self, duration: f64) -> f64 {
        2f64.powi(self.v as i32 + 1) * self.xi * self.lambda0 / duration
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda0 > 0.0 && self.lambda0.is_finite()) {
            return Err(Error::Config(format!("lambda0 must be positive, got {}", self.lambda0)));
        }
        if !(self.xi > 0.0 && self.xi <= 1.0) {
            return Err(Error::Config(format!("xi must lie in (0, 1], got {}", self.xi)));
        }
        if self.v + 1 > MAX_LEVEL {
            return Err(Error::Config(format!("v = {} is too deep", self.v)));
        }
        Ok(())
    }

    fn pieces(&self) -> u64 {
        1u64 << (self.v + 1)
    }

    fn rate(&self, t: f64, duration: f64) -> f64 {
        let pieces = self.pieces();
        let i = ((t * pieces as f64 / duration).floor() as u64).min(pieces - 1);
        let odd = (i % 2) as f64;
        let s = 1.0 - 2.0 * odd;
        let start = i as f64 * duration / pieces as f64;
        self.lambda0 * ((2.0 - self.xi) / 2.0 - s * odd * self.xi) + s * self.gradient(duration) * (t - start)
    }

    fn as_piecewise_linear(&self, duration: f64) -> PiecewiseLinear {
        let pieces = self.pieces();
        let low = self.lambda0 * (2.0 - self.xi) / 2.0;
        let high = self.lambda0 * (2.0 + self.xi) / 2.0;
        let knots = (0..=pieces).map(|i| i as f64 * duration / pieces as f64).collect();
        let values = (0..=pieces).map(|i| if i % 2 == 0 { low } else { high }).collect();
        PiecewiseLinear { knots, values }
    }
}

/// Triangular rate plus `amplitude * lambda0 * sin(2^(nu+1) pi t / T + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleSineParams {
    pub base: TriangularParams,
    pub nu: u32,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

impl TriangleSineParams {
    fn validate(&self) -> Result<()> {
        self.base.validate()?;
        // The sine must innovate strictly above the triangle's own
        // innovation level v + 1.
        if self.nu < self.base.v + 2 {
            return Err(Error::Config(format!(
                "sine scale nu = {} must be at least v + 2 = {}",
                self.nu,
                self.base.v + 2
            )));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::Config(format!("amplitude must be non-negative, got {}", self.amplitude)));
        }
        if self.base.lambda0 * ((2.0 - self.base.xi) / 2.0 - self.amplitude) < 0.0 {
            return Err(Error::Config("sine amplitude drives the rate negative".into()));
        }
        Ok(())
    }

    fn angular(&self, duration: f64) -> f64 {
        2f64.powi(self.nu as i32 + 1) * PI / duration
    }

    fn sine(&self, t: f64, duration: f64) -> f64 {
        self.amplitude * self.base.lambda0 * (self.angular(duration) * t + self.phase).sin()
    }

    fn sine_integral(&self, a: f64, b: f64, duration: f64) -> f64 {
        let w = self.angular(duration);
        self.amplitude * self.base.lambda0 * ((w * a + self.phase).cos() - (w * b + self.phase).cos()) / w
    }
}

/// Heaviside step taking the value 1/2 at the jump.
fn half_step(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        0.0
    } else {
        0.5
    }
}

fn default_duration() -> f64 {
    1.0
}

fn default_xi() -> f64 {
    0.1
}

fn default_v() -> u32 {
    1
}

fn default_nu() -> u32 {
    4
}

fn default_amplitude() -> f64 {
    0.2
}

fn default_bench_phase() -> f64 {
    1.0
}

/// Serializable model description (the `kind`-tagged JSON schema).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Constant {
        rate: f64,
        #[serde(default = "default_duration")]
        duration: f64,
    },
    Triangular {
        lambda0: f64,
        xi: f64,
        v: u32,
        #[serde(default = "default_duration")]
        duration: f64,
    },
    TriangleSine {
        lambda0: f64,
        xi: f64,
        v: u32,
        nu: u32,
        amplitude: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default = "default_duration")]
        duration: f64,
    },
    /// Shifted and rescaled Blocks on `[0, 1)` with expected count `2 a0`.
    Blocks { a0: f64 },
    /// Shifted and rescaled Bumps on `[0, 1)` with expected count `2 a0`.
    Bumps { a0: f64 },
    /// Rescaled triangle-plus-sine on `[0, 1)` with expected count `2 a0`.
    BenchmarkTriangleSine {
        a0: f64,
        #[serde(default = "default_xi")]
        xi: f64,
        #[serde(default = "default_v")]
        v: u32,
        #[serde(default = "default_nu")]
        nu: u32,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_bench_phase")]
        phase: f64,
    },
    /// Linear interpolation between `(knots[i], values[i])`; knots run from
    /// 0 to the duration.
    PiecewiseLinear { knots: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
struct PiecewiseLinear {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseLinear {
    fn segment(&self, t: f64) -> usize {
        let idx = self.knots.partition_point(|&k| k <= t);
        idx.clamp(1, self.knots.len() - 1) - 1
    }

    fn rate(&self, t: f64) -> f64 {
        let i = self.segment(t);
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        y0 + (y1 - y0) * (t - x0) / (x1 - x0)
    }

    fn integrate(&self, a: f64, b: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..self.knots.len() - 1 {
            let lo = self.knots[i].max(a);
            let hi = self.knots[i + 1].min(b);
            if hi > lo {
                let (x0, x1) = (self.knots[i], self.knots[i + 1]);
                let (y0, y1) = (self.values[i], self.values[i + 1]);
                let at = |t: f64| y0 + (y1 - y0) * (t - x0) / (x1 - x0);
                total += 0.5 * (at(lo) + at(hi)) * (hi - lo);
            }
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Constant(f64),
    Triangular(TriangularParams, PiecewiseLinear),
    TriangleSine(TriangleSineParams, PiecewiseLinear),
    /// `offset + scale * f(t)` where `f` is one of the raw test functions.
    Rescaled {
        offset: f64,
        scale: f64,
        raw: RawShape,
    },
    PiecewiseLinear(PiecewiseLinear),
}

#[derive(Debug, Clone, PartialEq)]
enum RawShape {
    Blocks,
    Bumps,
    TriangleSine(TriangleSineParams, PiecewiseLinear),
}

impl RawShape {
    fn value(&self, t: f64) -> f64 {
        match self {
            RawShape::Blocks => DJ_KNOTS.iter().zip(BLOCKS_HEIGHTS).map(|(&k, h)| h * half_step(t - k)).sum(),
            RawShape::Bumps => DJ_KNOTS
                .iter()
                .zip(BUMPS_HEIGHTS)
                .zip(BUMPS_WIDTHS)
                .map(|((&k, h), w)| h * (1.0 + ((t - k) / w).abs()).powi(-4))
                .sum(),
            RawShape::TriangleSine(p, pl) => pl.rate(t) + p.sine(t, 1.0),
        }
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        match self {
            RawShape::Blocks => DJ_KNOTS.iter().zip(BLOCKS_HEIGHTS).map(|(&k, h)| h * (b - a.max(k)).max(0.0)).sum(),
            RawShape::Bumps => {
                // Antiderivative of (1 + |u|)^-4.
                let g = |u: f64| u.signum() * (1.0 - (1.0 + u.abs()).powi(-3)) / 3.0;
                DJ_KNOTS
                    .iter()
                    .zip(BUMPS_HEIGHTS)
                    .zip(BUMPS_WIDTHS)
                    .map(|((&k, h), w)| h * w * (g((b - k) / w) - g((a - k) / w)))
                    .sum()
            }
            RawShape::TriangleSine(p, pl) => pl.integrate(a, b) + p.sine_integral(a, b, 1.0),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            RawShape::Blocks | RawShape::Bumps => DJ_KNOTS.to_vec(),
            RawShape::TriangleSine(_, pl) => pl.knots.clone(),
        }
    }
}

/// An immutable intensity function on `[0, duration)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityModel {
    kind: ModelKind,
    duration: f64,
    lambda_max: f64,
    shape: Shape,
    spec: ModelSpec,
}

impl IntensityModel {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let (kind, duration, shape) = match spec {
            ModelSpec::Constant { rate, duration } => {
                if !(*rate >= 0.0 && rate.is_finite()) {
                    return Err(Error::Config(format!("constant rate must be non-negative, got {rate}")));
                }
                (ModelKind::Constant, *duration, Shape::Constant(*rate))
            }
            ModelSpec::Triangular { lambda0, xi, v, duration } => {
                let p = TriangularParams { lambda0: *lambda0, xi: *xi, v: *v };
                p.validate()?;
                (ModelKind::Triangular, *duration, Shape::Triangular(p, p.as_piecewise_linear(*duration)))
            }
            ModelSpec::TriangleSine { lambda0, xi, v, nu, amplitude, phase, duration } => {
                let p = TriangleSineParams {
                    base: TriangularParams { lambda0: *lambda0, xi: *xi, v: *v },
                    nu: *nu,
                    amplitude: *amplitude,
                    phase: *phase,
                };
                p.validate()?;
                (ModelKind::TriangleSine, *duration, Shape::TriangleSine(p, p.base.as_piecewise_linear(*duration)))
            }
            ModelSpec::Blocks { a0 } => (ModelKind::Blocks, 1.0, rescaled(*a0, 1.75, 0.25, RawShape::Blocks)?),
            ModelSpec::Bumps { a0 } => (ModelKind::Bumps, 1.0, rescaled(*a0, 1.75, 0.25, RawShape::Bumps)?),
            ModelSpec::BenchmarkTriangleSine { a0, xi, v, nu, amplitude, phase } => {
                let p = TriangleSineParams {
                    base: TriangularParams { lambda0: 1.0, xi: *xi, v: *v },
                    nu: *nu,
                    amplitude: *amplitude,
                    phase: *phase,
                };
                p.validate()?;
                let raw = RawShape::TriangleSine(p, p.base.as_piecewise_linear(1.0));
                (ModelKind::TriangleSine, 1.0, rescaled(*a0, 1.0, 1.0, raw)?)
            }
            ModelSpec::PiecewiseLinear { knots, values } => {
                validate_piecewise(knots, values)?;
                let duration = *knots.last().unwrap_or(&0.0);
                let pl = PiecewiseLinear { knots: knots.clone(), values: values.clone() };
                (ModelKind::PiecewiseLinear, duration, Shape::PiecewiseLinear(pl))
            }
        };
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::Config(format!("duration must be positive, got {duration}")));
        }
        let mut model = IntensityModel { kind, duration, lambda_max: 0.0, shape, spec: spec.clone() };
        model.lambda_max = model.compute_lambda_max();
        Ok(model)
    }

    pub fn constant(rate: f64, duration: f64) -> Result<Self> {
        Self::from_spec(&ModelSpec::Constant { rate, duration })
    }

    pub fn triangular(lambda0: f64, xi: f64, v: u32, duration: f64) -> Result<Self> {
        Self::from_spec(&ModelSpec::Triangular { lambda0, xi, v, duration })
    }

    pub fn triangle_sine(base: TriangularParams, nu: u32, amplitude: f64, phase: f64, duration: f64) -> Result<Self> {
        Self::from_spec(&ModelSpec::TriangleSine {
            lambda0: base.lambda0,
            xi: base.xi,
            v: base.v,
            nu,
            amplitude,
            phase,
            duration,
        })
    }

    pub fn blocks(a0: f64) -> Result<Self> {
        Self::from_spec(&ModelSpec::Blocks { a0 })
    }

    pub fn bumps(a0: f64) -> Result<Self> {
        Self::from_spec(&ModelSpec::Bumps { a0 })
    }

    /// Benchmark triangle-plus-sine with the default shape parameters
    /// (`xi = 0.1`, `v = 1`, `nu = 4`, `amplitude = 0.2`, `phase = 1`).
    pub fn benchmark_triangle_sine(a0: f64) -> Result<Self> {
        Self::from_spec(&ModelSpec::BenchmarkTriangleSine {
            a0,
            xi: default_xi(),
            v: default_v(),
            nu: default_nu(),
            amplitude: default_amplitude(),
            phase: default_bench_phase(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ModelSpec = serde_json::from_str(text)?;
        Self::from_spec(&spec)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Short human-readable label used in reports.
    pub fn label(&self) -> &'static str {
        match (&self.kind, &self.shape) {
            (ModelKind::Blocks, _) => "Blocks",
            (ModelKind::Bumps, _) => "Bumps",
            (ModelKind::TriangleSine, _) => "TriangleSine",
            (ModelKind::Triangular, _) => "Triangular",
            (ModelKind::Constant, _) => "Constant",
            (ModelKind::PiecewiseLinear, _) => "PiecewiseLinear",
        }
    }

    /// `lambda(t)`; `t` must lie in `[0, T)`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t < self.duration) {
            return domain(format!("t = {t} outside [0, {})", self.duration));
        }
        Ok(self.rate_at(t))
    }

    /// Unchecked evaluation for callers that already guarantee `0 <= t < T`.
    pub(crate) fn rate_at(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Constant(rate) => *rate,
            Shape::Triangular(p, _) => p.rate(t, self.duration),
            Shape::TriangleSine(p, _) => p.base.rate(t, self.duration) + p.sine(t, self.duration),
            Shape::Rescaled { offset, scale, raw } => offset + scale * raw.value(t),
            Shape::PiecewiseLinear(pl) => pl.rate(t),
        }
    }

    /// `∫_a^b lambda(t) dt` in closed form.
    pub fn integrate(&self, a: f64, b: f64) -> Result<f64> {
        if !(a >= 0.0 && a <= b && b <= self.duration) {
            return domain(format!("invalid interval [{a}, {b}] for duration {}", self.duration));
        }
        Ok(self.mass(a, b))
    }

    pub(crate) fn mass(&self, a: f64, b: f64) -> f64 {
        match &self.shape {
            Shape::Constant(rate) => rate * (b - a),
            Shape::Triangular(_, pl) => pl.integrate(a, b),
            Shape::TriangleSine(p, pl) => pl.integrate(a, b) + p.sine_integral(a, b, self.duration),
            Shape::Rescaled { offset, scale, raw } => offset * (b - a) + scale * raw.integral(a, b),
            Shape::PiecewiseLinear(pl) => pl.integrate(a, b),
        }
    }

    /// Points where the rate or its derivative can jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Constant(_) => Vec::new(),
            Shape::Triangular(_, pl) | Shape::TriangleSine(_, pl) | Shape::PiecewiseLinear(pl) => pl.knots.clone(),
            Shape::Rescaled { raw, .. } => raw.breakpoints(),
        }
    }

    /// Adaptive-quadrature integral, independent of the closed forms.
    pub fn integrate_numeric(&self, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
        if !(a >= 0.0 && a <= b && b <= self.duration) {
            return domain(format!("invalid interval [{a}, {b}] for duration {}", self.duration));
        }
        let hi = self.duration;
        let f = |t: f64| self.rate_at(t.min(hi * (1.0 - f64::EPSILON)));
        Ok(quadrature::integrate(f, a, b, &self.breakpoints(), rel_tol))
    }

    /// Masses `mu^J_k` of the `2^J` dyadic cells.
    pub fn cell_masses(&self, level: u32) -> Result<Vec<f64>> {
        check_level(level)?;
        let cells = 1u64 << level;
        let width = self.duration / cells as f64;
        Ok((0..cells).map(|k| self.mass(k as f64 * width, ((k + 1) as f64 * width).min(self.duration))).collect())
    }

    /// Haar projection values `lambda^J_k = (2^J / T) mu^J_k`.
    pub fn true_haar_projection(&self, level: u32) -> Result<Vec<f64>> {
        let delta = 2f64.powi(level as i32) / self.duration;
        Ok(self.cell_masses(level)?.into_iter().map(|mu| delta * mu).collect())
    }

    /// True Haar coefficients `alpha_{j0,k}` and `beta_{j,k}` for
    /// `j0 <= j < max_level`.
    pub fn true_coefficients(&self, coarse: u32, max_level: u32) -> Result<TrueCoefficients> {
        if coarse > max_level {
            return Err(Error::Config(format!("j0 = {coarse} exceeds J = {max_level}")));
        }
        check_level(max_level)?;
        let root_t = self.duration.sqrt();
        let alpha =
            self.cell_masses(coarse)?.into_iter().map(|mu| 2f64.powf(coarse as f64 / 2.0) / root_t * mu).collect();
        let mut beta = Vec::with_capacity((max_level - coarse) as usize);
        for j in coarse..max_level {
            let fine = self.cell_masses(j + 1)?;
            let scale = 2f64.powf(j as f64 / 2.0) / root_t;
            beta.push(fine.chunks_exact(2).map(|p| scale * (p[0] - p[1])).collect());
        }
        Ok(TrueCoefficients { coarse_level: coarse, max_level, alpha, beta })
    }

    fn compute_lambda_max(&self) -> f64 {
        match &self.shape {
            Shape::Constant(rate) => *rate,
            Shape::Triangular(p, _) => p.lambda0 * (2.0 + p.xi) / 2.0,
            Shape::TriangleSine(p, _) => p.base.lambda0 * ((2.0 + p.base.xi) / 2.0 + p.amplitude),
            Shape::PiecewiseLinear(pl) => pl.values.iter().copied().fold(0.0, f64::max),
            Shape::Rescaled { offset, scale, raw } => match raw {
                // Step function: the supremum is attained on one of the plateaus,
                // so probe the midpoint of every inter-knot interval.
                RawShape::Blocks => std::iter::once(0.0)
                    .chain(DJ_KNOTS)
                    .zip(DJ_KNOTS.into_iter().chain(std::iter::once(1.0)))
                    .map(|(a, b)| 0.5 * (a + b))
                    .map(|t| offset + scale * raw.value(t))
                    .fold(f64::MIN, f64::max),
                RawShape::Bumps => {
                    let grid = (0..BUMPS_GRID).map(|i| i as f64 / BUMPS_GRID as f64);
                    grid.chain(DJ_KNOTS).map(|t| offset + scale * raw.value(t)).fold(f64::MIN, f64::max)
                        * BUMPS_MAX_SAFETY
                }
                RawShape::TriangleSine(p, _) => offset + scale * ((2.0 + p.base.xi) / 2.0 + p.amplitude),
            },
        }
    }
}

/// Ground-truth Haar coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrueCoefficients {
    pub coarse_level: u32,
    pub max_level: u32,
    pub alpha: Vec<f64>,
    /// `beta[j - coarse_level][k]`.
    pub beta: Vec<Vec<f64>>,
}

fn rescaled(a0: f64, offset: f64, weight: f64, raw: RawShape) -> Result<Shape> {
    if !(a0 > 0.0 && a0.is_finite()) {
        return Err(Error::Config(format!("a0 must be positive, got {a0}")));
    }
    let norm = raw.integral(0.0, 1.0);
    if norm.abs() < f64::EPSILON {
        return Err(Error::Config("test function integrates to zero".into()));
    }
    Ok(Shape::Rescaled { offset: offset * a0, scale: weight * a0 / norm, raw })
}

fn validate_piecewise(knots: &[f64], values: &[f64]) -> Result<()> {
    if knots.len() < 2 || knots.len() != values.len() {
        return Err(Error::Config("piecewise-linear model needs matching knots/values, at least two".into()));
    }
    if knots[0] != 0.0 {
        return Err(Error::Config("piecewise-linear knots must start at 0".into()));
    }
    if knots.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
        return Err(Error::Config("piecewise-linear knots must be strictly increasing".into()));
    }
    if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::Config("piecewise-linear values must be finite and non-negative".into()));
    }
    Ok(())
}

pub(crate) fn check_level(level: u32) -> Result<()> {
    if level > MAX_LEVEL {
        return Err(Error::Config(format!("level {level} exceeds the supported maximum {MAX_LEVEL}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tri() -> IntensityModel {
        IntensityModel::triangular(1000.0, 0.1, 1, 1.0).unwrap()
    }

    fn sine_model() -> IntensityModel {
        let base = TriangularParams { lambda0: 1000.0, xi: 0.1, v: 1 };
        IntensityModel::triangle_sine(base, 3, 0.05, 0.0, 1.0).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_relative_eq!(tri().eval(0.0).unwrap(), 950.0, epsilon = 1e-12);
        assert_eq!(IntensityModel::constant(5.0, 1.0).unwrap().eval(0.7).unwrap(), 5.0);
        assert_relative_eq!(sine_model().eval(0.0).unwrap(), 950.0, epsilon = 1e-12);
        // peak of the first triangle
        assert_relative_eq!(tri().eval(0.25).unwrap(), 1050.0, epsilon = 1e-9);
    }

    #[test]
    fn eval_domain() {
        let m = tri();
        assert!(matches!(m.eval(1.0), Err(Error::Domain(_))));
        assert!(matches!(m.eval(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn integrate_examples() {
        assert_relative_eq!(IntensityModel::constant(5.0, 1.0).unwrap().integrate(0.0, 1.0).unwrap(), 5.0);
        for v in 0..4 {
            let m = IntensityModel::triangular(1000.0, 0.1, v, 1.0).unwrap();
            assert_relative_eq!(m.integrate(0.0, 1.0).unwrap(), 1000.0, max_relative = 1e-12);
        }
        assert_relative_eq!(
            IntensityModel::blocks(10000.0).unwrap().integrate(0.0, 1.0).unwrap(),
            20000.0,
            max_relative = 1e-12
        );
        assert!(tri().integrate(0.6, 0.4).is_err());
    }

    #[test]
    fn benchmark_models_have_mass_two_a0() {
        for m in [
            IntensityModel::blocks(10000.0).unwrap(),
            IntensityModel::bumps(10000.0).unwrap(),
            IntensityModel::benchmark_triangle_sine(10000.0).unwrap(),
        ] {
            let closed = m.integrate(0.0, 1.0).unwrap();
            let numeric = m.integrate_numeric(0.0, 1.0, 1e-12).unwrap();
            assert_relative_eq!(closed, 20000.0, max_relative = 1e-8);
            assert_relative_eq!(numeric, 20000.0, max_relative = 1e-8);
        }
    }

    #[test]
    fn closed_forms_match_quadrature_on_subintervals() {
        let models = [
            tri(),
            sine_model(),
            IntensityModel::blocks(100.0).unwrap(),
            IntensityModel::bumps(100.0).unwrap(),
            IntensityModel::benchmark_triangle_sine(100.0).unwrap(),
        ];
        for m in &models {
            for (a, b) in [(0.0, 0.3), (0.11, 0.52), (0.77, 0.99), (0.1, 0.1)] {
                let closed = m.integrate(a, b).unwrap();
                let numeric = m.integrate_numeric(a, b, 1e-12).unwrap();
                assert!(
                    (closed - numeric).abs() <= 1e-9 * closed.abs().max(1.0),
                    "{:?} [{a},{b}] {closed} vs {numeric}",
                    m.kind()
                );
            }
        }
    }

    #[test]
    fn projection_examples() {
        assert_eq!(IntensityModel::constant(5.0, 1.0).unwrap().true_haar_projection(3).unwrap(), vec![5.0; 8]);
        for v in tri().true_haar_projection(2).unwrap() {
            assert_relative_eq!(v, 1000.0, max_relative = 1e-12);
        }
        let eighths = tri().true_haar_projection(3).unwrap();
        let expected = [975.0, 1025.0, 1025.0, 975.0, 975.0, 1025.0, 1025.0, 975.0];
        for (got, want) in eighths.iter().zip(expected) {
            assert_relative_eq!(*got, want, max_relative = 1e-12);
        }
    }

    #[test]
    fn projection_refinement_identity() {
        let models =
            [tri(), sine_model(), IntensityModel::bumps(10000.0).unwrap(), IntensityModel::blocks(10000.0).unwrap()];
        for m in &models {
            for level in 0..8 {
                let coarse = m.true_haar_projection(level).unwrap();
                let fine = m.true_haar_projection(level + 1).unwrap();
                for (k, c) in coarse.iter().enumerate() {
                    let avg = 0.5 * (fine[2 * k] + fine[2 * k + 1]);
                    assert!((c - avg).abs() <= 1e-10 * c.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn triangular_homogeneity_levels() {
        for v in 0..3 {
            let m = IntensityModel::triangular(1000.0, 0.1, v, 1.0).unwrap();
            let flat = m.true_haar_projection(v + 1).unwrap();
            assert!(flat.iter().all(|x| (x - 1000.0).abs() < 1e-9));
            let bumpy = m.true_haar_projection(v + 2).unwrap();
            assert!(bumpy.iter().any(|x| (x - 1000.0).abs() > 1.0));
        }
    }

    #[test]
    fn true_coefficients_examples() {
        let c = IntensityModel::constant(5.0, 1.0).unwrap().true_coefficients(0, 5).unwrap();
        assert_relative_eq!(c.alpha[0], 5.0);
        assert!(c.beta.iter().flatten().all(|b| b.abs() < 1e-12));

        let s = sine_model().true_coefficients(0, 6).unwrap();
        for j in 0..=1 {
            assert!(s.beta[j].iter().all(|b| b.abs() < 1e-9), "level {j}: {:?}", s.beta[j]);
        }
        // triangle innovation at v + 1 and sine innovation at nu
        assert!(s.beta[2].iter().any(|b| b.abs() > 1.0));
        assert!(s.beta[3].iter().any(|b| b.abs() > 1.0));
    }

    #[test]
    fn lambda_max_bounds_rate() {
        let models = [
            tri(),
            sine_model(),
            IntensityModel::blocks(10000.0).unwrap(),
            IntensityModel::bumps(10000.0).unwrap(),
            IntensityModel::benchmark_triangle_sine(10000.0).unwrap(),
        ];
        for m in &models {
            let n = 100_000;
            let max = (0..n).map(|i| m.eval(i as f64 / n as f64 * m.duration()).unwrap()).fold(f64::MIN, f64::max);
            let min = (0..n).map(|i| m.eval(i as f64 / n as f64 * m.duration()).unwrap()).fold(f64::MAX, f64::min);
            assert!(max <= m.lambda_max(), "{:?}: {max} > {}", m.kind(), m.lambda_max());
            // Analytic bounds are exact except where the sine peak and a
            // triangle apex do not coincide.
            let slack = if m.kind() == ModelKind::TriangleSine { 0.05 } else { 1e-3 };
            assert!(max >= m.lambda_max() * (1.0 - slack), "{:?}: {max} vs {}", m.kind(), m.lambda_max());
            assert!(min >= 0.0);
        }
    }

    #[test]
    fn triangular_value_range() {
        let m = tri();
        let p = TriangularParams { lambda0: 1000.0, xi: 0.1, v: 1 };
        assert_relative_eq!(p.gradient(1.0), 400.0);
        for i in 0..1000 {
            let r = m.eval(i as f64 / 1000.0).unwrap();
            assert!((950.0 - 1e-9..=1050.0 + 1e-9).contains(&r));
        }
    }

    #[test]
    fn config_errors() {
        let base = TriangularParams { lambda0: 1000.0, xi: 0.1, v: 1 };
        assert!(IntensityModel::triangle_sine(base, 3, 0.05, 0.0, 1.0).is_ok());
        assert!(matches!(IntensityModel::triangle_sine(base, 2, 0.05, 0.0, 1.0), Err(Error::Config(_))));
        assert!(IntensityModel::triangle_sine(base, 3, 0.96, 0.0, 1.0).is_err());
        assert!(IntensityModel::triangular(1000.0, 1.5, 1, 1.0).is_err());
        assert!(IntensityModel::constant(-1.0, 1.0).is_err());
        assert!(IntensityModel::constant(1.0, 0.0).is_err());
        assert!(IntensityModel::from_spec(&ModelSpec::PiecewiseLinear {
            knots: vec![0.0, 0.5, 0.4],
            values: vec![1.0; 3]
        })
        .is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = IntensityModel::from_json(r#"{"kind":"triangular","lambda0":1000,"xi":0.1,"v":1}"#).unwrap();
        assert_eq!(m, tri());
        let b = IntensityModel::from_json(r#"{"kind":"benchmark_triangle_sine","a0":10000}"#).unwrap();
        assert_eq!(b, IntensityModel::benchmark_triangle_sine(10000.0).unwrap());
        let text = serde_json::to_string(b.spec()).unwrap();
        assert_eq!(IntensityModel::from_json(&text).unwrap(), b);
        assert!(IntensityModel::from_json(r#"{"kind":"nope"}"#).is_err());
    }

    #[test]
    fn piecewise_linear_model() {
        let m = IntensityModel::from_spec(&ModelSpec::PiecewiseLinear {
            knots: vec![0.0, 1.0, 2.0],
            values: vec![0.0, 10.0, 0.0],
        })
        .unwrap();
        assert_eq!(m.duration(), 2.0);
        assert_relative_eq!(m.eval(0.5).unwrap(), 5.0);
        assert_relative_eq!(m.integrate(0.0, 2.0).unwrap(), 10.0);
        assert_relative_eq!(m.lambda_max(), 10.0);
    }
}
