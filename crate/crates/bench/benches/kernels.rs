use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use oqcv::engine::{gamma_moments, oqcv_series, DomainHint, SettingProbabilities};
use oqcv::hermite::{hermite_all, hermite_functions};
use oqcv::heterodyne::oqcv_value;
use oqcv::states::{husimi_q, PhasePoint, State};
use std::f64::consts::PI;
use std::hint::black_box;
use std::sync::Arc;

fn bench_hermite(c: &mut Criterion) {
    let mut group = c.benchmark_group("hermite");
    for max in [10usize, 40, 80] {
        group.bench_with_input(BenchmarkId::new("polynomials", max), &max, |b, &m| b.iter(|| hermite_all(m, black_box(1.3))));
        group.bench_with_input(BenchmarkId::new("functions", max), &max, |b, &m| {
            b.iter(|| hermite_functions(m, black_box(1.3)))
        });
    }
    group.finish();
}

fn bench_pointwise(c: &mut Criterion) {
    let states = [
        State::Vacuum,
        State::Number { n: 4 },
        State::squeezed(0.8),
        State::cat_plus(1.5, 0.0),
        State::Thermal { nbar: 3.0 },
    ];
    let (a, beta) = (PhasePoint::new(0.4, -0.2), PhasePoint::new(1.1, 0.7));
    let mut group = c.benchmark_group("pointwise");
    for st in &states {
        group.bench_with_input(BenchmarkId::new("husimi_q", st), st, |b, s| b.iter(|| husimi_q(s, black_box(beta))));
        group.bench_with_input(BenchmarkId::new("oqcv_value", st), st, |b, s| {
            b.iter(|| oqcv_value(s, black_box(a), black_box(beta)))
        });
    }
    group.finish();
}

fn bench_series(c: &mut Criterion) {
    // unit marginals, x2 | x1 ~ N(x1/2, 3/4)
    let phi = |x: f64| (-x * x / 2.0).exp() / (2.0 * PI).sqrt();
    let probs = SettingProbabilities::new(
        Arc::new(phi),
        Arc::new(phi),
        Arc::new(move |x1, x2| phi(x1) * (-(x2 - 0.5 * x1).powi(2) / 1.5).exp() / (1.5 * PI).sqrt()),
        DomainHint::default(),
    )
    .unwrap();
    c.bench_function("gamma_moments D=40", |b| b.iter(|| gamma_moments(&probs, black_box(40)).unwrap()));
    let t = gamma_moments(&probs, 40).unwrap();
    c.bench_function("oqcv_series D=40", |b| b.iter(|| oqcv_series(&t, black_box(0.3), black_box(-0.8))));
}

criterion_group!(benches, bench_hermite, bench_pointwise, bench_series);
criterion_main!(benches);
