use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use menger_bench::{plane, simplex, sphere};
use menger_core::*;
use std::hint::black_box;

fn kernels(c: &mut Criterion) {
    let mut g = c.benchmark_group("simplex");
    for (d, n) in [(1, 2), (2, 3), (3, 4)] {
        let x = simplex(d + 2, n);
        g.bench_with_input(BenchmarkId::new("content", format!("d{d}n{n}")), &x, |b, x| b.iter(|| black_box(x).content()));
        let spec = CurvatureSpec::mt(d);
        g.bench_with_input(BenchmarkId::new("mt", format!("d{d}n{n}")), &x, |b, x| b.iter(|| black_box(x).curvature(&spec)));
        g.bench_with_input(BenchmarkId::new("leger", format!("d{d}n{n}")), &x, |b, x| b.iter(|| black_box(x).leger_power(d)));
    }
    g.finish();
}

fn integrals(c: &mut Criterion) {
    let mut g = c.benchmark_group("integrals");
    g.sample_size(10);
    let mu = sphere(1, 2, 40);
    let ball = mu.enclosing_ball();
    let exact = IntegralSpec {
        integrand: Integrand::CurvatureSq(CurvatureSpec::mt(1)),
        domain: Domain::FullBall { ball: ball.clone() },
        mode: Mode::exact(),
    };
    g.bench_function("exact_d1_40", |b| b.iter(|| integrate(&mu, &exact)));
    let mu2 = sphere(2, 3, 400);
    let mc = IntegralSpec {
        integrand: Integrand::CurvatureSq(CurvatureSpec::mt(2)),
        domain: Domain::FullBall { ball: mu2.enclosing_ball() },
        mode: Mode::MonteCarlo { samples: 20_000, seed: 1 },
    };
    g.bench_function("mc_d2_20k", |b| b.iter(|| integrate(&mu2, &mc)));
    g.finish();
}

fn flatness(c: &mut Criterion) {
    let mut g = c.benchmark_group("flatness");
    g.sample_size(20);
    let mu = plane(2, 3, 400);
    let ball = mu.enclosing_ball();
    g.bench_function("beta2_d2_400", |b| b.iter(|| beta_p(&mu, ball.center(), ball.radius(), 2.0, 2)));
    g.bench_function("jones_d2_400", |b| b.iter(|| jones_flatness(&mu, &ball, 2.0, Flavor::J, 4)));
    g.finish();
}

criterion_group!(benches, kernels, integrals, flatness);
criterion_main!(benches);
