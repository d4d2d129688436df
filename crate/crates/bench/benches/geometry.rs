use criterion::{criterion_group, criterion_main, Criterion};
use manifold_ae::geometry::Vec3;
use manifold_ae::{estimate_reach, DEFAULT_TIE_TOL};
use manifold_ae_bench::{points, spec};
use std::hint::black_box;

fn bench_sampling(c: &mut Criterion) {
    let spec = spec();
    c.bench_function("sample_uniform_1000", |b| {
        b.iter(|| spec.sample_uniform(black_box(1000), 7).unwrap())
    });
}

fn bench_projection(c: &mut Criterion) {
    let spec = spec();
    let queries: Vec<Vec3> = points(500, 3)
        .positions()
        .map(|p| p + Vec3::new(0.05, -0.02, 0.03))
        .collect();
    c.bench_function("nearest_point_500", |b| {
        b.iter(|| {
            for q in &queries {
                black_box(spec.nearest_point(*q, DEFAULT_TIE_TOL));
            }
        })
    });
}

fn bench_reach(c: &mut Criterion) {
    let spec = spec();
    let cloud = points(250, 5);
    let positions: Vec<Vec3> = cloud.positions().collect();
    let tangents = spec.tangent_bases(&cloud).unwrap();
    c.bench_function("analytic_reach", |b| b.iter(|| black_box(spec.analytic_reach())));
    c.bench_function("estimate_reach_500", |b| {
        b.iter(|| estimate_reach(black_box(&positions), black_box(&tangents)).unwrap())
    });
}

criterion_group!(benches, bench_sampling, bench_projection, bench_reach);
criterion_main!(benches);
