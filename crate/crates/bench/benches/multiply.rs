use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use randbc_bench::fixture;
use randbc_core::rescale::TWICE_OUTSIDE_INSIDE;
use randbc_core::{recursive_apply, recursive_randomized_apply, rescaled_multiply, standard_multiply, ScalarMode};

fn kernels(c: &mut Criterion) {
    let mut g = c.benchmark_group("multiply_128_f32");
    let mode = ScalarMode::F32;
    g.bench_function("standard", |bch| {
        let f = fixture(128, 0);
        bch.iter(|| standard_multiply(&f.a, &f.b, mode).unwrap())
    });
    for q in [1, 3, 5] {
        let f = fixture(128, q);
        g.bench_with_input(BenchmarkId::new("deterministic", q), &q, |bch, &q| {
            bch.iter(|| recursive_apply(&f.formula, &f.a, &f.b, q, mode).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("randomized", q), &q, |bch, _| {
            bch.iter(|| recursive_randomized_apply(&f.formula, &f.plan, &f.a, &f.b, mode).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("rescaled", q), &q, |bch, &q| {
            bch.iter(|| rescaled_multiply(&f.formula, &f.a, &f.b, q, &TWICE_OUTSIDE_INSIDE, mode).unwrap())
        });
    }
    g.finish();
}

fn decimal(c: &mut Criterion) {
    let f = fixture(32, 2);
    let mode = ScalarMode::decimal(4).unwrap();
    c.bench_function("randomized_32_dec4_q2", |bch| {
        bch.iter(|| recursive_randomized_apply(&f.formula, &f.plan, &f.a, &f.b, mode).unwrap())
    });
}

criterion_group!(benches, kernels, decimal);
criterion_main!(benches);
