//! Poisson process sampling on `[0, T)`.
//!
//! Every realization draws from its own ChaCha8 stream: the generator is
//! seeded from the run seed and the stream id is the realization index, so
//! replicate `m` is the same whether it is produced alone, in a batch, or on
//! any worker thread.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exec::Execution;
use crate::models::IntensityModel;

/// Sorted event times of one realization on `[0, duration)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSeries {
    times: Vec<f64>,
    duration: f64,
}

impl EventSeries {
    /// Validates that times are finite, strictly increasing and inside `[0, duration)`.
    pub fn new(times: Vec<f64>, duration: f64) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return domain(format!("duration must be positive, got {duration}"));
        }
        if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && **t < duration)) {
            return domain(format!("event time {t} outside [0, {duration})"));
        }
        if times.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
            return domain("event times must be strictly increasing");
        }
        Ok(EventSeries { times, duration })
    }

    pub fn empty(duration: f64) -> Result<Self> {
        Self::new(Vec::new(), duration)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// One time per line, preceded by a `# duration=T` header.
    pub fn to_text(&self) -> String {
        let mut out = format!("# duration={}\n", self.duration);
        for t in &self.times {
            let _ = writeln!(out, "{t}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut duration = None;
        let mut times = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(d) = header_value(rest, "duration") {
                    duration = Some(parse_f64(d, lineno)?);
                }
                continue;
            }
            times.push(parse_f64(line, lineno)?);
        }
        let duration = duration.ok_or_else(|| Error::Parse("missing '# duration=' header".into()))?;
        Self::new(times, duration)
    }
}

/// CSV with columns `realization,time`; the header comment records the
/// duration and realization count so empty realizations survive a round trip.
pub fn series_to_csv(series: &[EventSeries]) -> Result<String> {
    let duration = series.first().map_or(1.0, |s| s.duration);
    if series.iter().any(|s| s.duration != duration) {
        return Err(Error::Config("all realizations must share one duration".into()));
    }
    let mut out = format!("# duration={duration} realizations={}\nrealization,time\n", series.len());
    for (m, s) in series.iter().enumerate() {
        for t in &s.times {
            let _ = writeln!(out, "{m},{t}");
        }
    }
    Ok(out)
}

pub fn series_from_csv(text: &str) -> Result<Vec<EventSeries>> {
    let mut duration = None;
    let mut count = None;
    let mut times: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line == "realization,time" {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(d) = header_value(rest, "duration") {
                duration = Some(parse_f64(d, lineno)?);
            }
            if let Some(m) = header_value(rest, "realizations") {
                count = Some(m.parse::<usize>().map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?);
            }
            continue;
        }
        let (m, t) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("line {}: expected 'realization,time'", lineno + 1)))?;
        let m: usize = m.trim().parse().map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        if times.len() <= m {
            times.resize(m + 1, Vec::new());
        }
        times[m].push(parse_f64(t.trim(), lineno)?);
    }
    let duration = duration.ok_or_else(|| Error::Parse("missing '# duration=' header".into()))?;
    if let Some(c) = count {
        if times.len() > c {
            return Err(Error::Parse(format!("realization index exceeds declared count {c}")));
        }
        times.resize(c, Vec::new());
    }
    times.into_iter().map(|t| EventSeries::new(t, duration)).collect()
}

fn header_value<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    header.split_whitespace().find_map(|tok| tok.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
}

fn parse_f64(s: &str, lineno: usize) -> Result<f64> {
    s.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: '{s}': {e}", lineno + 1)))
}

/// Seed and replicate count for a batch of independent realizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub seed: u64,
    #[serde(rename = "m")]
    pub replicates: usize,
}

impl SimulationConfig {
    pub fn new(seed: u64, replicates: usize) -> Result<Self> {
        if replicates == 0 {
            return Err(Error::Config("the number of realizations M must be at least 1".into()));
        }
        Ok(SimulationConfig { seed, replicates })
    }
}

/// Generator for realization `index` of the run seeded by `seed`.
pub fn realization_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Homogeneous process via exponential inter-arrival gaps.
pub fn sample_homogeneous<R: Rng + ?Sized>(rate: f64, duration: f64, rng: &mut R) -> Result<EventSeries> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return domain(format!("rate must be finite and non-negative, got {rate}"));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return domain(format!("duration must be positive, got {duration}"));
    }
    let mut times = Vec::new();
    if rate > 0.0 {
        candidate_times(rate, duration, rng, |t, _| {
            times.push(t);
        });
    }
    Ok(EventSeries { times, duration })
}

/// Inhomogeneous process by Lewis–Shedler thinning of a homogeneous process
/// at `lambda_max`; expected cost is `O(lambda_max * T)`.
pub fn sample_inhomogeneous<R: Rng + ?Sized>(model: &IntensityModel, rng: &mut R) -> Result<EventSeries> {
    let duration = model.duration();
    let lambda_max = model.lambda_max();
    if !lambda_max.is_finite() {
        return Err(Error::Config("lambda_max must be finite for thinning".into()));
    }
    if lambda_max <= 0.0 {
        if model.mass(0.0, duration) > 0.0 {
            return Err(Error::Config("lambda_max is zero but the intensity is not".into()));
        }
        return Ok(EventSeries { times: Vec::new(), duration });
    }
    let mut times = Vec::new();
    candidate_times(lambda_max, duration, rng, |t, rng| {
        let u: f64 = rng.random();
        if u * lambda_max < model.rate_at(t) {
            times.push(t);
        }
    });
    Ok(EventSeries { times, duration })
}

/// Walks homogeneous candidate points, resampling any gap that would not
/// strictly advance the clock (a duplicate at stored precision).
fn candidate_times<R: Rng + ?Sized>(rate: f64, duration: f64, rng: &mut R, mut visit: impl FnMut(f64, &mut R)) {
    let exp = Exp::new(rate).expect("rate validated positive");
    let mut t = 0.0f64;
    let mut first = true;
    loop {
        let next = t + exp.sample(rng);
        if next >= duration {
            break;
        }
        if !first && next <= t {
            continue;
        }
        first = false;
        t = next;
        visit(t, rng);
    }
}

/// `M` independent realizations; realization `m` uses stream `m`.
pub fn sample_many(model: &IntensityModel, config: &SimulationConfig, exec: Execution) -> Result<Vec<EventSeries>> {
    if config.replicates == 0 {
        return Err(Error::Config("the number of realizations M must be at least 1".into()));
    }
    exec.map_indexed(config.replicates, |m| {
        let mut rng = realization_rng(config.seed, m as u64);
        sample_inhomogeneous(model, &mut rng)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_is_empty() {
        let mut rng = realization_rng(1, 0);
        assert!(sample_homogeneous(0.0, 1.0, &mut rng).unwrap().is_empty());
        assert!(sample_homogeneous(-1.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn seeded_runs_repeat() {
        let a = sample_homogeneous(100.0, 2.0, &mut realization_rng(9, 3)).unwrap();
        let b = sample_homogeneous(100.0, 2.0, &mut realization_rng(9, 3)).unwrap();
        let c = sample_homogeneous(100.0, 2.0, &mut realization_rng(9, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.times().windows(2).all(|w| w[1] > w[0]));
        assert!(a.times().iter().all(|&t| (0.0..2.0).contains(&t)));
    }

    #[test]
    fn sample_many_prefix_property() {
        let model = IntensityModel::triangular(200.0, 0.1, 1, 1.0).unwrap();
        let one = sample_many(&model, &SimulationConfig::new(5, 1).unwrap(), Execution::Sequential).unwrap();
        let two = sample_many(&model, &SimulationConfig::new(5, 2).unwrap(), Execution::Parallel).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0], two[0]);
        assert_ne!(two[0], two[1]);
        assert!(SimulationConfig::new(5, 0).is_err());
    }

    #[test]
    fn text_round_trip_is_lossless() {
        let s = sample_homogeneous(50.0, 1.0, &mut realization_rng(2, 0)).unwrap();
        assert_eq!(EventSeries::from_text(&s.to_text()).unwrap(), s);
        let e = EventSeries::empty(3.5).unwrap();
        assert_eq!(EventSeries::from_text(&e.to_text()).unwrap(), e);
    }

    #[test]
    fn csv_round_trip_keeps_empty_realizations() {
        let a = sample_homogeneous(20.0, 1.0, &mut realization_rng(2, 0)).unwrap();
        let batch = vec![a.clone(), EventSeries::empty(1.0).unwrap(), a];
        let text = series_to_csv(&batch).unwrap();
        assert_eq!(series_from_csv(&text).unwrap(), batch);
    }

    #[test]
    fn invalid_series_rejected() {
        assert!(EventSeries::new(vec![0.2, 0.1], 1.0).is_err());
        assert!(EventSeries::new(vec![0.1, 0.1], 1.0).is_err());
        assert!(EventSeries::new(vec![1.0], 1.0).is_err());
        assert!(EventSeries::from_text("0.1\n").is_err());
        assert!(EventSeries::from_text("# duration=1\nabc\n").is_err());
    }

    #[test]
    fn zero_intensity_model_gives_empty_series() {
        let model = IntensityModel::constant(0.0, 1.0).unwrap();
        assert!(sample_inhomogeneous(&model, &mut realization_rng(0, 0)).unwrap().is_empty());
    }
}
