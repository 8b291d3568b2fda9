use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use integrable_lab::determinant::{conservation_drift_with, AlphaOptions};
use integrable_lab::exec::Execution;
use integrable_lab::flow::{evolve, uniform_snap_times, Equation, FlowSpec, Sign};
use integrable_lab::harness::{modulated_family_sum, FamilyOptions};
use integrable_lab::lattice::{make_lattice, random_band_limited};
use integrable_lab::spaces::equivalence_report_with;
use integrable_lab::Complex64;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn equivalence(c: &mut Criterion) {
    let corpus: Vec<_> = (0..24u64)
        .map(|i| {
            let lambda = 1 << (i % 3);
            random_band_limited(make_lattice(lambda, 16).unwrap(), 4 * lambda as i64, 1.0, i).unwrap()
        })
        .collect();
    let mut g = c.benchmark_group("equivalence_report");
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| equivalence_report_with(&corpus, -1.0, 4.0, 0.0, mode).unwrap())
        });
    }
    g.finish();
}

fn family(c: &mut Criterion) {
    let u = random_band_limited(make_lattice(4, 16).unwrap(), 24, 0.1, 7).unwrap();
    let mut g = c.benchmark_group("modulated_family_sum");
    g.sample_size(10);
    for (name, mode) in MODES {
        let opts = FamilyOptions { execution: mode, ..FamilyOptions::new(4.0, 0.0, 6) };
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| modulated_family_sum(&u, &opts).unwrap()));
    }
    g.finish();
}

fn drift(c: &mut Criterion) {
    let u0 = random_band_limited(make_lattice(1, 64).unwrap(), 8, 0.1, 3).unwrap();
    let spec = FlowSpec::new(Equation::Nls { sign: Sign::Defocusing }, 1e-3);
    let traj = evolve(&u0, &spec, 1.0, &uniform_snap_times(1.0, 0.1)).unwrap();
    let opts = AlphaOptions::default().with_order(6);
    let mut g = c.benchmark_group("conservation_drift");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| conservation_drift_with(&traj, Complex64::new(0.5, 0.0), &opts, mode).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, equivalence, family, drift);
criterion_main!(benches);
