//! Statistical checks of the event simulator against the model it samples.

use ppwavelet::bench::simulate_replicates;
use ppwavelet::haar::{bin_counts, DyadicCounts};
use ppwavelet::models::IntensityModel;
use ppwavelet::simulate::{realization_rng, sample_homogeneous, sample_inhomogeneous};
use ppwavelet::special::chi2_critical;

/// Mean event count over `n` realizations must lie within 3 standard errors
/// of the integrated intensity (the count is Poisson, so variance = mean).
fn check_mean_count(model: &IntensityModel, n: usize, seed: u64) {
    let mass = model.integrate(0.0, model.duration()).unwrap();
    let total: usize =
        (0..n).map(|i| sample_inhomogeneous(model, &mut realization_rng(seed, i as u64)).unwrap().len()).sum();
    let mean = total as f64 / n as f64;
    let se = (mass / n as f64).sqrt();
    assert!((mean - mass).abs() <= 3.0 * se, "{:?}: mean {mean} vs {mass} (se {se})", model.kind());
}

#[test]
fn mean_counts_match_integrated_intensity() {
    check_mean_count(&IntensityModel::constant(250.0, 2.0).unwrap(), 2000, 1);
    check_mean_count(&IntensityModel::triangular(300.0, 0.1, 1, 1.0).unwrap(), 2000, 2);
    check_mean_count(&IntensityModel::blocks(200.0).unwrap(), 2000, 3);
    check_mean_count(&IntensityModel::bumps(200.0).unwrap(), 2000, 4);
    check_mean_count(&IntensityModel::benchmark_triangle_sine(200.0).unwrap(), 2000, 5);
}

#[test]
fn homogeneous_gaps_are_exponential() {
    let rate = 50.0;
    let events = sample_homogeneous(rate, 400.0, &mut realization_rng(9, 0)).unwrap();
    let mut gaps: Vec<f64> = events.times().windows(2).map(|w| rate * (w[1] - w[0])).collect();
    gaps.sort_by(f64::total_cmp);
    let n = gaps.len() as f64;
    let ks = gaps
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let cdf = 1.0 - (-g).exp();
            ((i + 1) as f64 / n - cdf).max(cdf - i as f64 / n)
        })
        .fold(0.0, f64::max);
    // 1% critical value of the one-sample KS test
    assert!(ks < 1.628 / n.sqrt(), "KS distance {ks} over {n} gaps");
}

/// Pooled per-bin counts follow the cell masses of the model: the Pearson
/// statistic against independent Poisson cells is chi-square with one dof
/// per cell.
fn check_bin_fit(model: &IntensityModel, level: u32, n: usize, seed: u64) {
    let counts: Vec<DyadicCounts> = (0..n)
        .map(|i| {
            bin_counts(&sample_inhomogeneous(model, &mut realization_rng(seed, i as u64)).unwrap(), level).unwrap()
        })
        .collect();
    let pooled = DyadicCounts::pooled(&counts).unwrap();
    let expected: Vec<f64> = model.cell_masses(level).unwrap().into_iter().map(|m| m * n as f64).collect();
    let pearson: f64 = pooled.counts.iter().zip(&expected).map(|(&o, e)| (o as f64 - e).powi(2) / e).sum();
    let critical = chi2_critical(0.001, expected.len() as u64).unwrap();
    assert!(pearson < critical, "{:?}: Pearson {pearson} >= {critical}", model.kind());
}

#[test]
fn binned_counts_follow_cell_masses() {
    check_bin_fit(&IntensityModel::triangular(1000.0, 0.1, 1, 1.0).unwrap(), 4, 500, 11);
    check_bin_fit(&IntensityModel::blocks(500.0).unwrap(), 5, 500, 12);
    check_bin_fit(&IntensityModel::bumps(500.0).unwrap(), 5, 500, 13);
    check_bin_fit(&IntensityModel::benchmark_triangle_sine(500.0).unwrap(), 6, 500, 14);
}

#[test]
fn replicate_streams_are_distinct_and_reproducible() {
    let model = IntensityModel::constant(100.0, 1.0).unwrap();
    let a = simulate_replicates(&model, 5, 0, 3).unwrap();
    let b = simulate_replicates(&model, 5, 0, 3).unwrap();
    assert_eq!(a, b);
    assert_ne!(a[0], a[1]);
    assert_ne!(a[1], a[2]);
    assert_ne!(simulate_replicates(&model, 5, 1, 1).unwrap()[0], a[0]);
}
