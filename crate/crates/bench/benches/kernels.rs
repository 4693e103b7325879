use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nodal_lab::eigen::smallest_eigenpairs;
use nodal_lab::grid::{assemble_laplacian, build_domain, DomainKind};
use nodal_lab::harmonic::{harmonic_measure_at_zero, ObstacleSet};
use nodal_lab::nodal::{extract_nodal_domains, squared_distance_transform};

fn laplacian_apply(c: &mut Criterion) {
    let d = build_domain(DomainKind::Square, 257, 1.0).unwrap();
    let op = assemble_laplacian(&d);
    let u: Vec<f64> = (0..op.n_active()).map(|i| (i as f64 * 0.37).sin()).collect();
    let mut out = vec![0.0; u.len()];
    c.bench_function("laplacian_apply_square_257", |b| b.iter(|| op.apply(black_box(&u), &mut out)));
}

fn eigen_small(c: &mut Criterion) {
    let d = build_domain(DomainKind::Square, 65, 1.0).unwrap();
    let op = assemble_laplacian(&d);
    let mut g = c.benchmark_group("eigen");
    g.sample_size(10);
    g.bench_function("square_65_k6", |b| b.iter(|| smallest_eigenpairs(&op, 6, 1e-8, 0).unwrap()));
    g.finish();
}

fn nodal_and_distance(c: &mut Criterion) {
    let d = build_domain(DomainKind::Square, 257, 1.0).unwrap();
    let phi: Vec<f64> = d
        .active_nodes()
        .iter()
        .map(|&n| {
            let p = d.position(n);
            (3.0 * std::f64::consts::PI * p[0]).sin() * (2.0 * std::f64::consts::PI * p[1]).sin()
        })
        .collect();
    c.bench_function("extract_nodal_domains_257", |b| b.iter(|| extract_nodal_domains(black_box(&phi), &d).unwrap()));
    let features: Vec<bool> = (0..257 * 257).map(|i| i % 97 == 0).collect();
    c.bench_function("distance_transform_257", |b| b.iter(|| squared_distance_transform(&[257, 257], black_box(&features), false)));
}

fn walk_on_spheres(c: &mut Criterion) {
    let e = ObstacleSet::radial_slit(0.1).unwrap();
    let mut g = c.benchmark_group("wos");
    g.sample_size(10);
    g.bench_function("slit_10k_samples", |b| b.iter(|| harmonic_measure_at_zero(&e, 10_000, 0).unwrap()));
    g.finish();
}

criterion_group!(benches, laplacian_apply, eigen_small, nodal_and_distance, walk_on_spheres);
criterion_main!(benches);
