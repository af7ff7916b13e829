//! Monte Carlo harness: RMISE comparison of the thresholding strategies
//! with bootstrap confidence intervals, and size/power curves of the LRTs.
//!
//! Reproducibility: simulation `i` of a scenario draws realization `m` from
//! stream `m` of a generator seeded with `splitmix64(seed, i)`, results are
//! collected in simulation order, and bootstrap resample `b` has its own
//! stream, so reports are bit-identical for any worker count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::haar::{bin_counts, grid, DyadicCounts};
use crate::lrt::{homogeneity_from_counts, innovation_from_counts, BoundaryPolicy};
use crate::models::{IntensityModel, ModelSpec};
use crate::simulate::{realization_rng, sample_inhomogeneous, EventSeries};
use crate::threshold::{estimate_from_counts, HolmReading, Strategy, ThresholdConfig};

/// SplitMix64 finaliser applied to `seed + (index + 1) * golden`: derives
/// decorrelated per-simulation seeds from one run seed.
pub fn splitmix64(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `M` realizations for simulation `index` of a run.
pub fn simulate_replicates(
    model: &IntensityModel,
    seed: u64,
    index: u64,
    replicates: usize,
) -> Result<Vec<EventSeries>> {
    let sim_seed = splitmix64(seed, index);
    (0..replicates).map(|m| sample_inhomogeneous(model, &mut realization_rng(sim_seed, m as u64))).collect()
}

/// Root mean squared difference over an evaluation grid.
pub fn root_ise(estimate: &[f64], truth: &[f64]) -> f64 {
    let sq: f64 = estimate.iter().zip(truth).map(|(e, t)| (e - t) * (e - t)).sum();
    (sq / truth.len() as f64).sqrt()
}

/// `RMISE = (1/n) sum_i sqrt((1/m) sum_j (lambda_hat_i(t_j) - lambda(t_j))^2)`,
/// with every estimate sampled on the same grid as `truth`.
pub fn rmise(estimates: &[Vec<f64>], truth: &[f64]) -> Result<f64> {
    if truth.len() < 2 {
        return Err(Error::Config("the evaluation grid needs m >= 2 points".into()));
    }
    if estimates.is_empty() || estimates.iter().any(|e| e.len() != truth.len()) {
        return Err(Error::Config("estimates must be sampled on the truth grid".into()));
    }
    Ok(estimates.iter().map(|e| root_ise(e, truth)).sum::<f64>() / estimates.len() as f64)
}

/// Truth `lambda(t_j)` on the grid `t_j = (j - 1) T / m`.
pub fn truth_grid(model: &IntensityModel, m: usize) -> Vec<f64> {
    grid(m, model.duration()).map(|t| model.rate_at(t)).collect()
}

/// Type-7 (linear interpolation) empirical quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap interval for the mean of `values`.
pub fn bootstrap_ci(values: &[f64], resamples: usize, level: f64, seed: u64, exec: Execution) -> Result<(f64, f64)> {
    if resamples < 1000 {
        return Err(Error::Config(format!("bootstrap needs at least 1000 resamples, got {resamples}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("confidence level must lie in (0, 1), got {level}")));
    }
    if values.is_empty() {
        return Err(Error::Config("bootstrap of an empty sample".into()));
    }
    let n = values.len();
    let mut means = exec.map_indexed(resamples, |b| {
        let mut rng = realization_rng(seed, b as u64);
        (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64
    });
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&means, tail), quantile_sorted(&means, 1.0 - tail)))
}

/// Kolmogorov–Smirnov distance between a sample and Uniform(0, 1).
pub fn ks_uniform_distance(sample: &[f64]) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// FNV-1a digest, used to certify that every strategy saw the same inputs.
fn fnv1a(acc: u64, bytes: &[u8]) -> u64 {
    bytes.iter().fold(acc, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3))
}

const FNV_OFFSET: u64 = 0xCBF2_9CE4_8422_2325;

fn counts_digest(counts: &[DyadicCounts]) -> u64 {
    counts.iter().flat_map(|c| c.counts.iter()).fold(FNV_OFFSET, |h, x| fnv1a(h, &x.to_le_bytes()))
}

fn events_digest(events: &[EventSeries]) -> u64 {
    events.iter().flat_map(|e| e.times().iter()).fold(FNV_OFFSET, |h, t| fnv1a(h, &t.to_bits().to_le_bytes()))
}

/// What to do when a model fails the per-cell mass condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassCondition {
    /// Record the row as skipped with the reason.
    #[default]
    Skip,
    /// Run anyway and attach a warning to the row.
    Warn,
}

fn default_replicates() -> usize {
    1
}
fn default_alpha() -> f64 {
    0.05
}
fn default_omega() -> f64 {
    3.0
}
fn default_n() -> usize {
    1000
}
fn default_full_n() -> usize {
    10_000
}
fn default_grid() -> usize {
    1000
}
fn default_bootstrap() -> usize {
    2000
}
fn default_ci_level() -> f64 {
    0.95
}
fn default_min_mass() -> f64 {
    100.0
}
fn default_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}

/// One RMISE study: every model is estimated by every strategy on common
/// simulated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchScenario {
    pub name: String,
    pub models: Vec<ModelSpec>,
    pub j0: u32,
    /// Finest thresholded detail level (estimates live at level `J + 1`).
    #[serde(rename = "J")]
    pub max_level: u32,
    #[serde(rename = "M", default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default)]
    pub policy: BoundaryPolicy,
    #[serde(default)]
    pub lrtg_reading: HolmReading,
    /// Add a column for the other Holm reading ("LRT-G*").
    #[serde(default)]
    pub compare_lrtg_readings: bool,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_full_n")]
    pub full_scale_n: usize,
    #[serde(default = "default_grid")]
    pub m: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "default_ci_level")]
    pub ci_level: f64,
    #[serde(default)]
    pub mass_condition: MassCondition,
    #[serde(default = "default_min_mass")]
    pub min_cell_mass: f64,
    /// Optional expected values, passed through to the JSON report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<serde_json::Value>,
}

impl BenchScenario {
    pub fn threshold_config(&self) -> ThresholdConfig {
        ThresholdConfig {
            j0: self.j0,
            max_level: self.max_level,
            alpha: self.alpha,
            omega: self.omega,
            policy: self.policy,
            holm: self.lrtg_reading,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.threshold_config().validate()?;
        if self.models.is_empty() {
            return Err(Error::Config("scenario lists no models".into()));
        }
        if self.replicates == 0 || self.n == 0 {
            return Err(Error::Config("M and n must be at least 1".into()));
        }
        if self.m < 2 {
            return Err(Error::Config("grid size m must be at least 2".into()));
        }
        if !self.strategies.contains(&Strategy::Linear) {
            return Err(Error::Config("the Linear strategy is required as the R-RMISE reference".into()));
        }
        Ok(())
    }

    /// The evaluated columns: strategies, plus the alternate Holm reading.
    pub fn methods(&self) -> Vec<Method> {
        let mut out: Vec<Method> = self
            .strategies
            .iter()
            .map(|&s| Method { strategy: s, holm: self.lrtg_reading, alternate: false })
            .collect();
        if self.compare_lrtg_readings {
            let other = match self.lrtg_reading {
                HolmReading::ZeroRejected => HolmReading::KeepRejected,
                HolmReading::KeepRejected => HolmReading::ZeroRejected,
            };
            out.push(Method { strategy: Strategy::LrtGlobal, holm: other, alternate: true });
        }
        out
    }
}

/// One report column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Method {
    pub strategy: Strategy,
    pub holm: HolmReading,
    alternate: bool,
}

impl Method {
    pub fn label(&self) -> String {
        if self.alternate {
            format!("{}*", self.strategy.label())
        } else {
            self.strategy.label().to_string()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub label: String,
    pub strategy: Strategy,
    pub lrtg_reading: HolmReading,
    pub rmise: f64,
    pub r_rmise: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_kept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RowStatus {
    Ran,
    Skipped { reason: String },
}

/// Per-model results of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmiseReport {
    pub model: String,
    pub spec: ModelSpec,
    #[serde(flatten)]
    pub status: RowStatus,
    pub warnings: Vec<String>,
    pub n: usize,
    pub min_cell_mass: f64,
    pub methods: Vec<MethodResult>,
    /// Digest of all simulated event times, in simulation order.
    pub input_digest: String,
    /// Per-simulation root-ISE values, one vector per method (JSON only on request).
    #[serde(skip)]
    pub per_sim: Vec<Vec<f64>>,
    pub runtime_seconds: f64,
}

impl RmiseReport {
    pub fn method(&self, label: &str) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.label == label)
    }
}

/// Results of a whole scenario, with metadata for the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: BenchScenario,
    pub n: usize,
    pub seed: u64,
    pub git_revision: Option<String>,
    pub runtime_seconds: f64,
    pub rows: Vec<RmiseReport>,
}

impl ScenarioReport {
    pub fn row(&self, model: &str) -> Option<&RmiseReport> {
        self.rows.iter().find(|r| r.model == model)
    }

    fn labels(&self) -> Vec<String> {
        self.scenario.methods().iter().map(Method::label).collect()
    }

    /// R-RMISE table: one row per model, one column per method.
    pub fn rrmise_csv(&self) -> String {
        let labels = self.labels();
        let mut out = format!("model,status,{}\n", labels.join(","));
        for row in &self.rows {
            let cells: Vec<String> =
                labels.iter().map(|l| row.method(l).map_or(String::new(), |m| format!("{:.4}", m.r_rmise))).collect();
            let _ = writeln!(out, "{},{},{}", row.model, status_word(&row.status), cells.join(","));
        }
        out
    }

    /// Absolute RMISE with bootstrap interval bounds per method.
    pub fn rmise_ci_csv(&self) -> String {
        let labels = self.labels();
        let header: Vec<String> = labels.iter().map(|l| format!("{l},{l}_low,{l}_high")).collect();
        let mut out = format!("model,status,{}\n", header.join(","));
        for row in &self.rows {
            let cells: Vec<String> = labels
                .iter()
                .map(|l| {
                    row.method(l)
                        .map_or(",,".to_string(), |m| format!("{:.2},{:.2},{:.2}", m.rmise, m.ci_low, m.ci_high))
                })
                .collect();
            let _ = writeln!(out, "{},{},{}", row.model, status_word(&row.status), cells.join(","));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn status_word(s: &RowStatus) -> &'static str {
    match s {
        RowStatus::Ran => "ran",
        RowStatus::Skipped { .. } => "skipped",
    }
}

struct SimOutcome {
    errors: Vec<f64>,
    kept: Vec<usize>,
    digest: u64,
}

/// Run every model of a scenario with `n` simulations.
pub fn run_scenario(scenario: &BenchScenario, n: usize, exec: Execution) -> Result<ScenarioReport> {
    scenario.validate()?;
    let started = Instant::now();
    let rows = scenario.models.iter().map(|spec| run_model(scenario, spec, n, exec)).collect::<Result<Vec<_>>>()?;
    Ok(ScenarioReport {
        scenario: scenario.clone(),
        n,
        seed: scenario.seed,
        git_revision: None,
        runtime_seconds: started.elapsed().as_secs_f64(),
        rows,
    })
}

/// Run several scenarios (each at its own default `n`, or `n_override`).
pub fn run_table1(
    scenarios: &[BenchScenario],
    n_override: Option<usize>,
    exec: Execution,
) -> Result<Vec<ScenarioReport>> {
    scenarios.iter().map(|s| run_scenario(s, n_override.unwrap_or(s.n), exec)).collect()
}

fn run_model(scenario: &BenchScenario, spec: &ModelSpec, n: usize, exec: Execution) -> Result<RmiseReport> {
    let started = Instant::now();
    let model = IntensityModel::from_spec(spec)?;
    let cfg = scenario.threshold_config();
    let methods = scenario.methods();
    let min_cell_mass =
        scenario.replicates as f64 * model.cell_masses(cfg.count_level())?.into_iter().fold(f64::INFINITY, f64::min);
    let mut warnings = Vec::new();
    let mut row = RmiseReport {
        model: model.label().to_string(),
        spec: spec.clone(),
        status: RowStatus::Ran,
        warnings: Vec::new(),
        n,
        min_cell_mass,
        methods: Vec::new(),
        input_digest: String::new(),
        per_sim: Vec::new(),
        runtime_seconds: 0.0,
    };
    let uses_lrt = methods.iter().any(|m| m.strategy.uses_lrt());
    if uses_lrt && min_cell_mass < scenario.min_cell_mass {
        let reason = format!(
            "minimum expected count per level-{} cell is {:.1} (< {})",
            cfg.count_level(),
            min_cell_mass,
            scenario.min_cell_mass
        );
        match scenario.mass_condition {
            MassCondition::Skip => {
                row.status = RowStatus::Skipped { reason };
                return Ok(row);
            }
            MassCondition::Warn => warnings.push(reason),
        }
    }
    let truth = truth_grid(&model, scenario.m);
    let outcomes = exec
        .map_indexed(n, |i| -> Result<SimOutcome> {
            let events = simulate_replicates(&model, scenario.seed, i as u64, scenario.replicates)?;
            let counts = events.iter().map(|e| bin_counts(e, cfg.count_level())).collect::<Result<Vec<_>>>()?;
            let input = counts_digest(&counts);
            let mut errors = Vec::with_capacity(methods.len());
            let mut kept = Vec::with_capacity(methods.len());
            for method in &methods {
                // common random numbers: every method reads the same counts
                debug_assert_eq!(counts_digest(&counts), input);
                let est =
                    estimate_from_counts(&counts, &ThresholdConfig { holm: method.holm, ..cfg }, method.strategy)?;
                errors.push(root_ise(&est.function.sample_grid(scenario.m), &truth));
                kept.push(est.mask.kept_count());
            }
            Ok(SimOutcome { errors, kept, digest: events_digest(&events) })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let digest = outcomes.iter().fold(FNV_OFFSET, |h, o| fnv1a(h, &o.digest.to_le_bytes()));
    row.input_digest = format!("{digest:016x}");
    let per_method: Vec<Vec<f64>> =
        (0..methods.len()).map(|j| outcomes.iter().map(|o| o.errors[j]).collect()).collect();
    let means: Vec<f64> = per_method.iter().map(|v| v.iter().sum::<f64>() / n as f64).collect();
    let linear_idx = methods.iter().position(|m| m.strategy == Strategy::Linear).expect("validated");
    for (j, method) in methods.iter().enumerate() {
        let ci_seed = splitmix64(scenario.seed ^ 0xB007_57A9, j as u64);
        let (ci_low, ci_high) = bootstrap_ci(&per_method[j], scenario.bootstrap, scenario.ci_level, ci_seed, exec)?;
        row.methods.push(MethodResult {
            label: method.label(),
            strategy: method.strategy,
            lrtg_reading: method.holm,
            rmise: means[j],
            r_rmise: means[j] / means[linear_idx],
            ci_low,
            ci_high,
            mean_kept: outcomes.iter().map(|o| o.kept[j] as f64).sum::<f64>() / n as f64,
        });
    }
    row.per_sim = per_method;
    row.warnings = warnings;
    row.runtime_seconds = started.elapsed().as_secs_f64();
    Ok(row)
}

/// Intensity family swept over `lambda0` in a size/power study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveFamily {
    Triangular {
        xi: f64,
        v: u32,
        #[serde(default = "default_duration")]
        duration: f64,
    },
    TriangleSine {
        xi: f64,
        v: u32,
        nu: u32,
        amplitude: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default = "default_duration")]
        duration: f64,
    },
}

fn default_duration() -> f64 {
    1.0
}

impl CurveFamily {
    pub fn at(&self, lambda0: f64) -> ModelSpec {
        match *self {
            CurveFamily::Triangular { xi, v, duration } => ModelSpec::Triangular { lambda0, xi, v, duration },
            CurveFamily::TriangleSine { xi, v, nu, amplitude, phase, duration } => {
                ModelSpec::TriangleSine { lambda0, xi, v, nu, amplitude, phase, duration }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum CurveTest {
    /// Level-`level` homogeneity.
    Homogeneity { level: u32 },
    /// Level-`level` innovation.
    Innovation {
        level: u32,
        #[serde(default)]
        policy: BoundaryPolicy,
    },
}

impl CurveTest {
    fn count_level(&self) -> u32 {
        match *self {
            CurveTest::Homogeneity { level } => level,
            CurveTest::Innovation { level, .. } => level + 1,
        }
    }
}

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let last = points - 1;
    (0..points).map(|i| if i == last { hi } else { lo * (hi / lo).powf(i as f64 / last as f64) }).collect()
}

fn default_lambda0s() -> Vec<f64> {
    log_spaced(1000.0, 50_000.0, 10)
}

/// A size/power study: rejection frequency of one or more tests across a
/// `lambda0` sweep of a model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveScenario {
    pub name: String,
    pub family: CurveFamily,
    pub tests: Vec<CurveTest>,
    #[serde(default = "default_lambda0s")]
    pub lambda0s: Vec<f64>,
    #[serde(rename = "M", default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_full_n")]
    pub full_scale_n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_min_mass")]
    pub min_cell_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub lambda0: f64,
    pub test: CurveTest,
    pub rate: f64,
    pub se: f64,
    pub rejections: usize,
    /// Simulations where the test was undefined (no events).
    pub undefined: usize,
    pub n: usize,
    pub min_cell_mass: f64,
    pub mass_ok: bool,
    /// The p-value of every simulation, in simulation order.
    #[serde(skip)]
    pub p_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub scenario: CurveScenario,
    pub n: usize,
    pub git_revision: Option<String>,
    pub runtime_seconds: f64,
    pub points: Vec<CurvePoint>,
}

impl CurveReport {
    /// Plot-ready rows `test,level,lambda0,rate,se,mass_ok`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("test,level,lambda0,rate,se,mass_ok\n");
        for p in &self.points {
            let (name, level) = match p.test {
                CurveTest::Homogeneity { level } => ("homogeneity", level),
                CurveTest::Innovation { level, .. } => ("innovation", level),
            };
            let _ = writeln!(out, "{name},{level},{},{:.6},{:.6},{}", p.lambda0, p.rate, p.se, p.mass_ok);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Rejection frequency (with binomial SE) of each test at each `lambda0`.
///
/// All tests at one `lambda0` share the simulated data; points whose
/// per-cell expected count falls below `min_cell_mass` are flagged.
pub fn size_power_curve(scenario: &CurveScenario, n: usize, exec: Execution) -> Result<CurveReport> {
    if !(scenario.alpha > 0.0 && scenario.alpha < 1.0) || n == 0 || scenario.replicates == 0 {
        return Err(Error::Config("invalid curve scenario (alpha, n or M)".into()));
    }
    let started = Instant::now();
    let max_level = scenario.tests.iter().map(CurveTest::count_level).max().unwrap_or(0);
    let mut points = Vec::new();
    for (pi, &lambda0) in scenario.lambda0s.iter().enumerate() {
        let model = IntensityModel::from_spec(&scenario.family.at(lambda0))?;
        let point_seed = splitmix64(scenario.seed, pi as u64);
        let per_sim = exec
            .map_indexed(n, |i| -> Result<Vec<Option<(f64, bool)>>> {
                let events = simulate_replicates(&model, point_seed, i as u64, scenario.replicates)?;
                let fine = events.iter().map(|e| bin_counts(e, max_level)).collect::<Result<Vec<_>>>()?;
                let pooled = DyadicCounts::pooled(&fine)?;
                scenario
                    .tests
                    .iter()
                    .map(|t| {
                        let counts = pooled.at_level(t.count_level())?;
                        let outcome = match *t {
                            CurveTest::Homogeneity { .. } => homogeneity_from_counts(&counts, scenario.alpha),
                            CurveTest::Innovation { policy, .. } => {
                                innovation_from_counts(&counts, scenario.alpha, policy)
                            }
                        };
                        match outcome {
                            Ok(o) => Ok(Some((o.p_value, o.reject))),
                            Err(Error::AllZeroData(_)) => Ok(None),
                            Err(e) => Err(e),
                        }
                    })
                    .collect()
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        for (ti, test) in scenario.tests.iter().enumerate() {
            let decoded: Vec<Option<(f64, bool)>> = per_sim.iter().map(|s| s[ti]).collect();
            let rejections = decoded.iter().filter(|d| matches!(d, Some((_, true)))).count();
            let undefined = decoded.iter().filter(|d| d.is_none()).count();
            let rate = rejections as f64 / n as f64;
            let cell_mass = scenario.replicates as f64
                * model.cell_masses(test.count_level())?.into_iter().fold(f64::INFINITY, f64::min);
            points.push(CurvePoint {
                lambda0,
                test: *test,
                rate,
                se: (rate * (1.0 - rate) / n as f64).sqrt(),
                rejections,
                undefined,
                n,
                min_cell_mass: cell_mass,
                mass_ok: cell_mass >= scenario.min_cell_mass,
                p_values: decoded.iter().map(|d| d.map_or(1.0, |(p, _)| p)).collect(),
            });
        }
    }
    Ok(CurveReport {
        scenario: scenario.clone(),
        n,
        git_revision: None,
        runtime_seconds: started.elapsed().as_secs_f64(),
        points,
    })
}

/// Any scenario file accepted by the harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScenarioFile {
    Rmise(BenchScenario),
    SizePower(CurveScenario),
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Map from model label to strategy label to value, for reference tables.
pub type ReferenceTable = BTreeMap<String, BTreeMap<String, f64>>;
