//! Kernel benchmarks: single steps and the Duhamel oracle, comparing the
//! rayon path against the sequential fallback where both are compiled in.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kgs_core::parallel::{indexed_map, parallel_available};
use kgs_core::{
    duhamel_reference, make_state, ua1_step, ua2_step, CParam, Grid, OracleConfig, StepParams,
};

fn bench_steps(c: &mut Criterion) {
    let grid = Grid::new(1, 256).unwrap();
    let cp = CParam::new(100.0).unwrap();
    let state = make_state(&grid, cp, 6.0, 6.0, 1).unwrap();
    let p = StepParams::new(cp, 1.0 / 64.0).unwrap();
    // warm the symbol cache so the loop cost is the step itself
    let _ = p.symbols(&grid);

    let mut group = c.benchmark_group("steps_n256");
    group.bench_function("ua1", |b| b.iter(|| ua1_step(&state, &p).unwrap()));
    group.bench_function("ua2", |b| b.iter(|| ua2_step(&state, &p).unwrap()));
    group.finish();
}

fn bench_duhamel(c: &mut Criterion) {
    let grid = Grid::new(1, 64).unwrap();
    let cp = CParam::new(8.0).unwrap();
    let state = make_state(&grid, cp, 6.0, 6.0, 1).unwrap();
    let p = StepParams::new(cp, 1.0 / 16.0).unwrap();
    let cfg = OracleConfig::for_params(&p);

    let mut group = c.benchmark_group("duhamel_c8_n64");
    group.sample_size(20);
    group.bench_function("reference", |b| {
        b.iter(|| duhamel_reference(&state, &p, &cfg).unwrap())
    });
    group.finish();
}

fn bench_parallel_map(c: &mut Criterion) {
    // the per-node integrand evaluation pattern used by the oracles
    let grid = Grid::new(1, 256).unwrap();
    let cp = CParam::new(8.0).unwrap();
    let state = make_state(&grid, cp, 6.0, 6.0, 1).unwrap();
    let p = StepParams::new(cp, 1.0 / 32.0).unwrap();
    let sy = p.symbols(&grid);

    let mut group = c.benchmark_group("node_products_x64");
    for (label, par) in [("sequential", false), ("parallel", true)] {
        if par && !parallel_available() {
            continue;
        }
        group.bench_with_input(BenchmarkId::from_parameter(label), &par, |b, &par| {
            b.iter(|| {
                indexed_map(64, par, |_| {
                    state
                        .psi
                        .pointwise_product(&state.psi.conj_field())
                        .unwrap()
                        .apply_symbol(&sy.exp_cnabla)
                        .unwrap()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_steps, bench_duhamel, bench_parallel_map);
criterion_main!(benches);
