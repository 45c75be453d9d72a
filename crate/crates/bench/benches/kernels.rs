use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use shrinker_lab_bench::{sphere, torus};
use shrinker_lab_core::feynman_kac::fk_solve;
use shrinker_lab_core::flow::run_rmcf;
use shrinker_lab_core::geometry::{compute_geometry, f_functional};
use shrinker_lab_core::spectral::eigen;
use shrinker_lab_core::{EigenConfig, FkBase, FkConfig, FlowConfig, FlowState};

fn geometry(c: &mut Criterion) {
    let t = torus(512);
    c.bench_function("geometry/torus-512", |b| b.iter(|| compute_geometry(&t).unwrap()));
    let g = compute_geometry(&t).unwrap();
    c.bench_function("entropy/torus-512", |b| b.iter(|| f_functional(&t, &g, None, true).unwrap()));
}

fn spectrum(c: &mut Criterion) {
    let t = torus(256);
    let g = compute_geometry(&t).unwrap();
    let mut group = c.benchmark_group("eigen");
    group.sample_size(10);
    group.bench_function("torus-256-axial", |b| b.iter(|| eigen(&t, &g, 4, &EigenConfig { k_max: 0, ..Default::default() }).unwrap()));
    group.bench_function("torus-256-k4", |b| b.iter(|| eigen(&t, &g, 4, &EigenConfig { k_max: 4, ..Default::default() }).unwrap()));
    group.finish();
}

fn flow(c: &mut Criterion) {
    let s = sphere(129);
    let mut group = c.benchmark_group("rmcf");
    group.sample_size(10);
    group.bench_function("sphere-129-to-0.1", |b| {
        b.iter_batched(|| s.clone(), |curve| run_rmcf(&curve, 0.1, 0.1, &FlowConfig::default(), |_| Ok(0.0)).unwrap(), BatchSize::SmallInput)
    });
    group.finish();
}

fn feynman_kac(c: &mut Criterion) {
    let s = sphere(129);
    let data = vec![1.0; s.len()];
    let base = FkBase::Static(FlowState::new(0.0, s).unwrap());
    let cfg = FkConfig { n_paths: 2000, ..Default::default() };
    let mut group = c.benchmark_group("fk");
    group.sample_size(10);
    group.bench_function("sphere-2000-paths", |b| b.iter(|| fk_solve(&data, &base, [0.0, 2.0], 0.2, &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, geometry, spectrum, flow, feynman_kac);
criterion_main!(benches);
