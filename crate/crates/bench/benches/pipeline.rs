use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use hosmc_bench::{sample_states, short_scenario};
use hosmc_core::{presets, run_scenario, solve_ilf, verify_lmi, ControllerKind, IlfSolverSettings, DEFAULT_EIG_TOL};

fn ilf_solve(c: &mut Criterion) {
    let p = presets::reference_p();
    let ys = sample_states(64);
    let settings = IlfSolverSettings::default();
    c.bench_function("solve_ilf/n3x64", |b| {
        b.iter(|| {
            for y in &ys {
                black_box(solve_ilf(black_box(y), &p, &settings).unwrap());
            }
        })
    });
}

fn lmi_verify(c: &mut Criterion) {
    let g = presets::reference_gains();
    c.bench_function("verify_lmi/reference", |b| b.iter(|| black_box(verify_lmi(black_box(&g), DEFAULT_EIG_TOL).unwrap())));
}

fn simulate(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_scenario/1s");
    group.sample_size(20);
    for kind in [ControllerKind::Delayed, ControllerKind::FiniteTime] {
        let cfg = short_scenario(kind, 1.0);
        group.bench_function(kind.name(), |b| b.iter(|| black_box(run_scenario(&cfg).unwrap())));
    }
    group.finish();
}

criterion_group!(benches, ilf_solve, lmi_verify, simulate);
criterion_main!(benches);
