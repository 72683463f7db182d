//! Sequential (one-thread pool) against parallel (full pool) runs of the
//! Monte Carlo engine. Outputs are identical in both modes; only wall time
//! differs.

use std::hint::black_box;

use conewalk::conditioned::{endpoint, sample_meander_with, MeanderOptions, SamplerMethod};
use conewalk::reference::{sample_bm_meander_with, GridOptions};
use conewalk::walk::survival_probability_mc;
use conewalk::{ConeKind, ConeSpec, Point, StepDistribution};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let full = rayon::current_num_threads();
    let mut out = vec![(
        "sequential".to_string(),
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap(),
    )];
    out.push((
        format!("parallel-{full}"),
        rayon::ThreadPoolBuilder::new()
            .num_threads(full)
            .build()
            .unwrap(),
    ));
    out
}

fn survival(c: &mut Criterion) {
    let cone = ConeSpec::new(ConeKind::Orthant(2)).unwrap();
    let dist = StepDistribution::gaussian(2);
    let x = Point::new(vec![1.0, 1.0]);
    let mut g = c.benchmark_group("survival-mc");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::new(name, "n=200,R=20000"), |b| {
            b.iter(|| {
                pool.install(|| survival_probability_mc(&cone, &dist, &x, 200, 20_000, 1).unwrap())
            })
        });
    }
    g.finish();
}

fn guided_meander(c: &mut Criterion) {
    let cone = ConeSpec::half_line();
    let dist = StepDistribution::srw();
    let x = Point::new(vec![1.0]);
    let opts = MeanderOptions {
        method: SamplerMethod::Guided,
        ..MeanderOptions::default()
    };
    let mut g = c.benchmark_group("guided-meander");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::new(name, "n=2000,count=2000"), |b| {
            b.iter(|| {
                pool.install(|| {
                    black_box(
                        sample_meander_with(&cone, &dist, &x, 2000, 2000, 1, &opts, endpoint)
                            .unwrap(),
                    )
                })
            })
        });
    }
    g.finish();
}

fn grid_meander(c: &mut Criterion) {
    let cone = ConeSpec::new(ConeKind::Orthant(2)).unwrap();
    let grid = GridOptions {
        m: 512,
        eps: 0.05,
        ..GridOptions::default()
    };
    let mut g = c.benchmark_group("grid-meander");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::new(name, "m=512,count=500"), |b| {
            b.iter(|| {
                pool.install(|| {
                    black_box(
                        sample_bm_meander_with(&cone, &grid, 500, 1, |p| p[p.len() - 1]).unwrap(),
                    )
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, survival, guided_meander, grid_meander);
criterion_main!(benches);
