//! Sweep benchmark: a small convergence study end to end, parallel jobs
//! against the sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kgs_core::parallel::parallel_available;
use kgs_core::SchemeId;
use kgs_harness::{dyadic_taus, run_convergence_multi, RunConfig};

fn bench_sweep(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    let base = RunConfig {
        scheme: SchemeId::Ua1,
        c_list: vec![1.0, 4.0, 16.0],
        tau_list: dyadic_taus(1.0, 3, 6),
        n: 64,
        out_dir: dir.path().display().to_string(),
        ..RunConfig::default()
    };

    let mut group = c.benchmark_group("convergence_sweep_3c");
    group.sample_size(10);
    for (label, sequential) in [("parallel", false), ("sequential", true)] {
        if !sequential && !parallel_available() {
            continue;
        }
        let cfg = RunConfig { sequential, ..base.clone() };
        group.bench_with_input(BenchmarkId::from_parameter(label), &cfg, |b, cfg| {
            b.iter(|| run_convergence_multi(cfg, &[SchemeId::Ua1]).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_sweep);
criterion_main!(benches);
