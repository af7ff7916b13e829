//! `ppwavelet`: simulate Poisson processes, estimate and threshold their
//! intensities, run the multiscale LRTs and the Monte Carlo benchmarks.
//!
//! Exit codes: 0 success, 1 runtime or statistical error (including tests
//! that are undefined on all-zero data), 2 usage error (bad flags, invalid
//! configuration, unparsable input files, vacuous tests).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ppwavelet::bench::{run_scenario, size_power_curve, ScenarioFile};
use ppwavelet::daubechies::{d4_estimate, D4Selection};
use ppwavelet::exec::with_jobs;
use ppwavelet::haar::{bin_counts, grid_csv};
use ppwavelet::lrt::{test_homogeneity, test_innovation, BoundaryPolicy};
use ppwavelet::models::{IntensityModel, ModelSpec};
use ppwavelet::simulate::{sample_many, series_from_csv, EventSeries, SimulationConfig};
use ppwavelet::threshold::{estimate_from_counts, HolmReading, Strategy, ThresholdConfig};
use ppwavelet::{Error, Execution};

#[derive(Parser)]
#[command(name = "ppwavelet", version, about = "Multiscale wavelet analysis of Poisson point processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate M realizations of an intensity model.
    Simulate(SimulateArgs),
    /// Reconstruct the intensity on an evaluation grid.
    Estimate(EstimateArgs),
    /// Run the homogeneity or innovation likelihood-ratio test.
    Test(TestArgs),
    /// Threshold the Haar coefficients and write the mask and step function.
    Threshold(ThresholdArgs),
    /// Run a benchmark scenario file (RMISE table or size/power curve).
    Bench(BenchArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Model JSON: a file path, or an inline object starting with '{'.
    #[arg(long)]
    model: String,
    /// Number of realizations.
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EventsArgs {
    /// Event files: single-realization text files or `realization,time` CSVs.
    #[arg(long, required = true, num_args = 1..)]
    events: Vec<PathBuf>,
}

#[derive(Args)]
struct LevelArgs {
    /// Coarsest resolution level.
    #[arg(long, default_value_t = 3)]
    j0: u32,
    /// Finest thresholded detail level (estimates live at level J + 1).
    #[arg(long = "J", default_value_t = 7)]
    max_level: u32,
    /// Significance level of the tests.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Hard-threshold multiplier for DM-L.
    #[arg(long, default_value_t = 3.0)]
    omega: f64,
    #[arg(long, value_enum, default_value_t = PolicyArg::Conservative)]
    boundary_policy: PolicyArg,
    /// Global thresholding keeps the levels whose null is rejected instead of
    /// zeroing them.
    #[arg(long)]
    lrtg_invert: bool,
}

impl LevelArgs {
    fn config(&self) -> ThresholdConfig {
        ThresholdConfig {
            j0: self.j0,
            max_level: self.max_level,
            alpha: self.alpha,
            omega: self.omega,
            policy: self.boundary_policy.into(),
            holm: if self.lrtg_invert { HolmReading::KeepRejected } else { HolmReading::ZeroRejected },
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Conservative,
    MaxLikelihood,
    Intermediate,
}

impl From<PolicyArg> for BoundaryPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Conservative => BoundaryPolicy::Conservative,
            PolicyArg::MaxLikelihood => BoundaryPolicy::MaxLikelihood,
            PolicyArg::Intermediate => BoundaryPolicy::Intermediate,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Linear,
    Dml,
    LrtLocal,
    LrtIntermediate,
    LrtGlobal,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Linear => Strategy::Linear,
            StrategyArg::Dml => Strategy::Dml,
            StrategyArg::LrtLocal => Strategy::LrtLocal,
            StrategyArg::LrtIntermediate => Strategy::LrtIntermediate,
            StrategyArg::LrtGlobal => Strategy::LrtGlobal,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WaveletArg {
    Haar,
    D4,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestKind {
    Homogeneity,
    Innovation,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    events: EventsArgs,
    #[arg(long, value_enum, default_value_t = StrategyArg::Linear)]
    strategy: StrategyArg,
    #[arg(long, value_enum, default_value_t = WaveletArg::Haar)]
    wavelet: WaveletArg,
    #[command(flatten)]
    levels: LevelArgs,
    /// Evaluation grid size m (points t_j = (j - 1) T / m).
    #[arg(long, default_value_t = 1000)]
    grid: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ThresholdArgs {
    #[command(flatten)]
    events: EventsArgs,
    #[arg(long, value_enum, default_value_t = StrategyArg::Linear)]
    strategy: StrategyArg,
    #[command(flatten)]
    levels: LevelArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    events: EventsArgs,
    #[arg(long, value_enum)]
    test: TestKind,
    /// Homogeneity level J, or innovation level L.
    #[arg(long)]
    level: u32,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = PolicyArg::Conservative)]
    boundary_policy: PolicyArg,
    /// Directory for the configuration sidecar (the verdict goes to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Scenario JSON file (`"type": "rmise"` or `"type": "size_power"`).
    #[arg(long)]
    scenario: PathBuf,
    /// Number of simulations (overrides the scenario's desk-scale n).
    #[arg(long, conflicts_with = "full_scale")]
    n: Option<usize>,
    /// Use the scenario's full-scale simulation count.
    #[arg(long)]
    full_scale: bool,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (1 = sequential, 0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Test(a) => test(a),
        Command::Threshold(a) => threshold(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::AllZeroData(_) | Error::Io(_) => 1,
        Error::Config(_) | Error::Domain(_) | Error::Parse(_) | Error::Json(_) | Error::VacuousTest(_) => 2,
    }
}

type Result<T> = ppwavelet::Result<T>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn write_json(dir: &Path, name: &str, value: &Value) -> Result<()> {
    write(dir, name, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn load_events(paths: &[PathBuf]) -> Result<Vec<EventSeries>> {
    let mut out = Vec::new();
    for path in paths {
        let text = read(path)?;
        let parsed = if text.lines().any(|l| l.starts_with('#') && l.contains("realizations=")) {
            series_from_csv(&text)
        } else {
            EventSeries::from_text(&text).map(|e| vec![e])
        };
        out.extend(parsed.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?);
    }
    if out.is_empty() {
        return Err(Error::Config("no realizations in the event files".into()));
    }
    Ok(out)
}

fn load_model(arg: &str) -> Result<ModelSpec> {
    let text = if arg.trim_start().starts_with('{') { arg.to_string() } else { read(Path::new(arg))? };
    let spec: ModelSpec = serde_json::from_str(&text)?;
    IntensityModel::from_spec(&spec)?;
    Ok(spec)
}

fn git_revision() -> Option<String> {
    let out = std::process::Command::new("git")
        .args(["-C", env!("CARGO_MANIFEST_DIR"), "rev-parse", "HEAD"])
        .output()
        .ok()?;
    out.status.success().then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
}

fn paths_json(paths: &[PathBuf]) -> Value {
    json!(paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let spec = load_model(&a.model)?;
    let model = IntensityModel::from_spec(&spec)?;
    let config = SimulationConfig::new(a.seed, a.m)?;
    let series = sample_many(&model, &config, Execution::Sequential)?;
    fs::create_dir_all(&a.out)?;
    let width = a.m.to_string().len().max(3);
    let mut files = Vec::with_capacity(series.len());
    for (i, s) in series.iter().enumerate() {
        let name = format!("realization_{i:0width$}.txt");
        write(&a.out, &name, &s.to_text())?;
        files.push(json!({ "file": name, "events": s.len() }));
    }
    write_json(
        &a.out,
        "manifest.json",
        &json!({
            "command": "simulate",
            "version": env!("CARGO_PKG_VERSION"),
            "model": spec,
            "seed": a.seed,
            "m": a.m,
            "duration": model.duration(),
            "files": files,
        }),
    )
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let events = load_events(&a.events.events)?;
    let cfg = a.levels.config();
    cfg.validate()?;
    if a.grid < 2 {
        return Err(Error::Config("--grid must be at least 2".into()));
    }
    let strategy: Strategy = a.strategy.into();
    let duration = events[0].duration();
    fs::create_dir_all(&a.out)?;
    let (values, kept) = match a.wavelet {
        WaveletArg::Haar => {
            let counts = events.iter().map(|e| bin_counts(e, cfg.count_level())).collect::<Result<Vec<_>>>()?;
            let est = estimate_from_counts(&counts, &cfg, strategy)?;
            write(&a.out, "mask.csv", &est.mask.to_csv())?;
            (est.function.sample_grid(a.grid), est.mask.kept_count())
        }
        WaveletArg::D4 => {
            let selection = match strategy {
                Strategy::Linear => D4Selection::KeepAll,
                Strategy::LrtLocal => D4Selection::FdrLocal { alpha: cfg.alpha },
                other => {
                    return Err(Error::Config(format!(
                        "the d4 wavelet supports the linear and lrt-local strategies, not {other}"
                    )))
                }
            };
            let est = d4_estimate(&events, cfg.j0, cfg.max_level, selection)?;
            write(&a.out, "mask.csv", &d4_mask_csv(&est))?;
            (est.sample_grid(a.grid), est.kept_count())
        }
    };
    write(&a.out, "reconstruction.csv", &grid_csv(&values, duration))?;
    write_json(
        &a.out,
        "config.json",
        &json!({
            "command": "estimate",
            "version": env!("CARGO_PKG_VERSION"),
            "events": paths_json(&a.events.events),
            "realizations": events.len(),
            "wavelet": if a.wavelet == WaveletArg::Haar { "haar" } else { "d4" },
            "strategy": strategy,
            "config": cfg,
            "grid": a.grid,
            "kept": kept,
        }),
    )
}

fn d4_mask_csv(est: &ppwavelet::daubechies::D4Estimate) -> String {
    let mut out = String::from("level,k,interior,kept,p\n");
    for ((lvl, keep), ps) in est.decomposition.levels.iter().zip(&est.keep).zip(&est.p_values) {
        for i in 0..lvl.beta.len() {
            let (interior, kept) = (u8::from(lvl.interior[i]), u8::from(keep[i]));
            out.push_str(&format!("{},{},{interior},{kept},{}\n", lvl.level, lvl.translation(i), ps[i]));
        }
    }
    out
}

fn threshold(a: ThresholdArgs) -> Result<()> {
    let events = load_events(&a.events.events)?;
    let cfg = a.levels.config();
    cfg.validate()?;
    let strategy: Strategy = a.strategy.into();
    let counts = events.iter().map(|e| bin_counts(e, cfg.count_level())).collect::<Result<Vec<_>>>()?;
    let est = estimate_from_counts(&counts, &cfg, strategy)?;
    fs::create_dir_all(&a.out)?;
    write(&a.out, "mask.csv", &est.mask.to_csv())?;
    write(&a.out, "estimate.csv", &est.function.to_csv())?;
    write_json(
        &a.out,
        "config.json",
        &json!({
            "command": "threshold",
            "version": env!("CARGO_PKG_VERSION"),
            "events": paths_json(&a.events.events),
            "realizations": events.len(),
            "strategy": strategy,
            "config": cfg,
            "kept": est.mask.kept_count(),
            "total": est.mask.total(),
        }),
    )
}

fn test(a: TestArgs) -> Result<()> {
    let events = load_events(&a.events.events)?;
    let policy: BoundaryPolicy = a.boundary_policy.into();
    let (name, outcome) = match a.test {
        TestKind::Homogeneity => ("homogeneity", test_homogeneity(&events, a.level, a.alpha)?),
        TestKind::Innovation => ("innovation", test_innovation(&events, a.level, a.alpha, policy)?),
    };
    if let Some(out) = &a.out {
        fs::create_dir_all(out)?;
        write_json(
            out,
            "config.json",
            &json!({
                "command": "test",
                "version": env!("CARGO_PKG_VERSION"),
                "events": paths_json(&a.events.events),
                "realizations": events.len(),
                "test": name,
                "level": a.level,
                "alpha": a.alpha,
                "boundary_policy": policy,
            }),
        )?;
    }
    println!("{}", serde_json::to_string_pretty(&outcome.record(name, a.level))?);
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let file = ScenarioFile::from_json(&read(&a.scenario)?)?;
    let exec = Execution::from_jobs(a.jobs);
    fs::create_dir_all(&a.out)?;
    let revision = git_revision();
    match file {
        ScenarioFile::Rmise(mut s) => {
            if let Some(seed) = a.seed {
                s.seed = seed;
            }
            let n = if a.full_scale { s.full_scale_n } else { a.n.unwrap_or(s.n) };
            write_json(&a.out, "config.json", &bench_config(&a, n, json!(s), revision.as_deref()))?;
            let mut report = with_jobs(a.jobs, || run_scenario(&s, n, exec))?;
            report.git_revision = revision;
            for row in &report.rows {
                for w in &row.warnings {
                    eprintln!("warning: {}: {w}", row.model);
                }
            }
            write(&a.out, &format!("{}_rrmise.csv", s.name), &report.rrmise_csv())?;
            write(&a.out, &format!("{}_rmise_ci.csv", s.name), &report.rmise_ci_csv())?;
            write(&a.out, &format!("{}.json", s.name), &(report.to_json()? + "\n"))?;
        }
        ScenarioFile::SizePower(mut s) => {
            if let Some(seed) = a.seed {
                s.seed = seed;
            }
            let n = if a.full_scale { s.full_scale_n } else { a.n.unwrap_or(s.n) };
            write_json(&a.out, "config.json", &bench_config(&a, n, json!(s), revision.as_deref()))?;
            let mut report = with_jobs(a.jobs, || size_power_curve(&s, n, exec))?;
            report.git_revision = revision;
            for p in report.points.iter().filter(|p| !p.mass_ok) {
                eprintln!(
                    "warning: lambda0 = {:.1}: minimum expected cell count {:.1} < {}",
                    p.lambda0, p.min_cell_mass, s.min_cell_mass
                );
            }
            write(&a.out, &format!("{}_curve.csv", s.name), &report.to_csv())?;
            write(&a.out, &format!("{}.json", s.name), &(report.to_json()? + "\n"))?;
        }
    }
    Ok(())
}

fn bench_config(a: &BenchArgs, n: usize, scenario: Value, revision: Option<&str>) -> Value {
    json!({
        "command": "bench",
        "version": env!("CARGO_PKG_VERSION"),
        "scenario_file": a.scenario.display().to_string(),
        "scenario": scenario,
        "n": n,
        "full_scale": a.full_scale,
        "jobs": a.jobs,
        "git_revision": revision,
    })
}
