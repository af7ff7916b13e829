//! Sequential versus rayon-parallel execution of the replicate loops:
//! simulation batches, one RMISE scenario and a size/power curve point.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ppwavelet::bench::{run_scenario, size_power_curve, BenchScenario, CurveFamily, CurveScenario, CurveTest};
use ppwavelet::lrt::BoundaryPolicy;
use ppwavelet::models::{IntensityModel, ModelSpec};
use ppwavelet::simulate::{sample_many, SimulationConfig};
use ppwavelet::threshold::{HolmReading, Strategy};
use ppwavelet::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn simulation(c: &mut Criterion) {
    let model = IntensityModel::blocks(10_000.0).unwrap();
    let config = SimulationConfig::new(1, 64).unwrap();
    let mut group = c.benchmark_group("sample_many_blocks_m64");
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| black_box(sample_many(&model, &config, exec).unwrap())));
    }
    group.finish();
}

fn rmise(c: &mut Criterion) {
    let scenario = BenchScenario {
        name: "bench".into(),
        models: vec![ModelSpec::Blocks { a0: 10_000.0 }],
        j0: 3,
        max_level: 7,
        replicates: 1,
        alpha: 0.05,
        omega: 3.0,
        policy: BoundaryPolicy::Conservative,
        lrtg_reading: HolmReading::KeepRejected,
        compare_lrtg_readings: false,
        strategies: Strategy::ALL.to_vec(),
        n: 64,
        full_scale_n: 64,
        m: 1000,
        seed: 1,
        bootstrap: 1000,
        ci_level: 0.95,
        mass_condition: ppwavelet::bench::MassCondition::Warn,
        min_cell_mass: 100.0,
        reference: None,
    };
    let mut group = c.benchmark_group("rmise_blocks_n64");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(run_scenario(&scenario, 64, exec).unwrap()))
        });
    }
    group.finish();
}

fn curve(c: &mut Criterion) {
    let scenario = CurveScenario {
        name: "bench".into(),
        family: CurveFamily::Triangular { xi: 0.1, v: 1, duration: 1.0 },
        tests: vec![
            CurveTest::Homogeneity { level: 2 },
            CurveTest::Innovation { level: 1, policy: BoundaryPolicy::Conservative },
        ],
        lambda0s: vec![10_000.0],
        replicates: 1,
        alpha: 0.05,
        n: 256,
        full_scale_n: 256,
        seed: 3,
        min_cell_mass: 100.0,
    };
    let mut group = c.benchmark_group("size_power_triangular_n256");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(size_power_curve(&scenario, 256, exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, simulation, rmise, curve);
criterion_main!(benches);
