//! Single-thread pool against the default pool on the hot paths. Build with
//! `--no-default-features` to time the sequential fallback instead.

use std::hint::black_box;

use aqbench::drb::{bootstrap_fit, fit_dataset, run_drb, DrbDesign};
use aqbench::par::{current_threads, with_workers};
use aqbench::rng::SeedStream;
use aqbench::simulator::run_shots;
use aqbench::{Circuit, Gate, NoiseModel};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;

fn wide_circuit(width: usize, n_zz: usize) -> Circuit {
    let mut rng = SeedStream::new(1, "bench-circuit").rng(0);
    let mut c = Circuit::new(width);
    for _ in 0..n_zz {
        let a = rng.random_range(0..width);
        let b = (a + rng.random_range(1..width)) % width;
        c.extend([Gate::x90(a), Gate::rz(b, rng.random_range(-3.0..3.0)), Gate::zz(a, b, 0.7)])
            .unwrap();
    }
    c
}

fn pools() -> [(&'static str, usize); 2] {
    [("1-thread", 1), ("default", 0)]
}

fn trajectories(c: &mut Criterion) {
    let mut g = c.benchmark_group("trajectories");
    g.sample_size(10);
    let noise = NoiseModel::default();
    for (width, shots) in [(12, 200u64), (18, 4)] {
        let circuit = wide_circuit(width, 100);
        for (name, workers) in pools() {
            g.bench_with_input(BenchmarkId::new(name, format!("w{width}x{shots}")), &circuit, |b, c| {
                b.iter(|| with_workers(workers, || black_box(run_shots(c, &noise, shots, 7).unwrap())))
            });
        }
    }
    g.finish();
}

fn drb(c: &mut Criterion) {
    let mut g = c.benchmark_group("drb");
    g.sample_size(10);
    let noise = NoiseModel::default();
    let design = DrbDesign::standard_2q(0.5);
    let ds = run_drb(&design, &noise, 3).unwrap();
    let fit = fit_dataset(&ds).unwrap();
    for (name, workers) in pools() {
        g.bench_function(BenchmarkId::new(name, "simulate"), |b| {
            b.iter(|| with_workers(workers, || black_box(run_drb(&design, &noise, 3).unwrap())))
        });
        g.bench_function(BenchmarkId::new(name, "bootstrap-200"), |b| {
            b.iter(|| with_workers(workers, || black_box(bootstrap_fit(&ds, &fit, 200, 4).unwrap())))
        });
    }
    g.finish();
}

fn report_threads(_: &mut Criterion) {
    eprintln!("default pool: {} thread(s)", current_threads());
}

criterion_group!(benches, report_threads, trajectories, drb);
criterion_main!(benches);
