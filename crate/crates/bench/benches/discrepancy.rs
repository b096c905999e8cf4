use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mcqmc_bench::uniform_points;
use mcqmc_core::covers::quantile_cover;
use mcqmc_core::discrepancy::{star_discrepancy_exact, star_discrepancy_via_cover};
use mcqmc_core::drivers::iid_driver;
use mcqmc_core::sphere::{cap_cover_override, cap_discrepancy_via_cover, sphere_points};
use mcqmc_core::TargetMeasure;

fn exact(c: &mut Criterion) {
    let mut g = c.benchmark_group("star_exact");
    for (d, n) in [(1usize, 4096usize), (2, 256), (2, 1024), (3, 128)] {
        let m = TargetMeasure::uniform_cube(d).unwrap();
        let p = uniform_points(1, n, d);
        g.bench_with_input(BenchmarkId::new(format!("d{d}"), n), &p, |b, p| {
            b.iter(|| star_discrepancy_exact(black_box(p), &m).unwrap().upper)
        });
    }
    g.finish();
}

fn via_cover(c: &mut Criterion) {
    let m = Arc::new(TargetMeasure::uniform_cube(2).unwrap());
    let cover = quantile_cover(m, 64, 0).unwrap();
    let p = uniform_points(2, 1024, 2);
    c.bench_function("star_via_cover/d2/1024", |b| {
        b.iter(|| star_discrepancy_via_cover(black_box(&p), &cover).unwrap().lower)
    });
}

fn caps(c: &mut Criterion) {
    let cover = cap_cover_override(1024, 1 << 16, 2, 0).unwrap();
    let p = sphere_points(iid_driver(3, 256, 2).unwrap().as_flat(), 2).unwrap();
    c.bench_function("caps/s2/256", |b| b.iter(|| cap_discrepancy_via_cover(black_box(&p), &cover).unwrap().lower));
}

criterion_group!(benches, exact, via_cover, caps);
criterion_main!(benches);
