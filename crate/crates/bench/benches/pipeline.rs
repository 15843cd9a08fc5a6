use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, Criterion};
use tmsafe::config::ScenarioSpec;
use tmsafe::pipeline::verify;

fn spec(name: &str) -> ScenarioSpec {
    ScenarioSpec::load(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)).unwrap()
}

fn cw(c: &mut Criterion) {
    let full = spec("cw_analytic.json");
    let mut coarse = full.clone();
    coarse.ads.e_tol = None;
    let siren = spec("cw_siren.json");

    let mut g = c.benchmark_group("verify");
    g.sample_size(10);
    g.bench_function("cw analytic, no splitting", |b| b.iter(|| verify(&coarse, 1, 0).unwrap()));
    g.bench_function("cw analytic", |b| b.iter(|| verify(&full, 1, 0).unwrap()));
    g.bench_function("cw siren", |b| b.iter(|| verify(&siren, 1, 0).unwrap()));
    g.finish();
}

criterion_group!(benches, cw);
criterion_main!(benches);
