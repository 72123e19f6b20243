use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use whiplash_core::continuous::{simulate, DampingLaw, OdeParams};
use whiplash_core::envelope::{scan_trace, ScanSchedule};
use whiplash_core::{Benchmark, Execution, Point};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn rate_scan(c: &mut Criterion) {
    let q = Benchmark::scaled_quadratic(1.0, 1).unwrap();
    let trace = simulate(
        &q,
        &DampingLaw::Whiplash,
        &OdeParams::new(Point::new(vec![1.0]).unwrap(), 50.0),
    )
    .unwrap();
    let x_star = Point::zeros(1);
    let schedule = ScanSchedule::exponential();
    let mut group = c.benchmark_group("rate_scan");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| scan_trace(black_box(&trace), &x_star, &schedule, exec).unwrap())
        });
    }
    group.finish();
}

fn kappa_sweep(c: &mut Criterion) {
    let kappas = [1.0, 10.0, 100.0, 1000.0];
    let start = Point::new(vec![1.0, -1.0]).unwrap();
    let mut group = c.benchmark_group("kappa_sweep");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                exec.map(&kappas, |&k| {
                    let e = Benchmark::elliptic(k).unwrap();
                    let params = OdeParams::new(start.clone(), 10.0).with_step(1e-4);
                    simulate(&e, &DampingLaw::Whiplash, &params)
                        .unwrap()
                        .samples
                        .len()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, rate_scan, kappa_sweep);
criterion_main!(benches);
