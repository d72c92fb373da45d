//! Assembly and solve throughput on a one-thread pool versus the full pool.
//! Build with `--no-default-features` to time the sequential fallback itself.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use oseen_core::analysis::mesh_level;
use oseen_core::fe_space::{build_pressure_space, build_velocity_space};
use oseen_core::forms::{Assembler, DiscretizationParams};
use oseen_core::problem::benchmark_problem;
use oseen_core::solver::{solve_saddle, SaddleSystem};

fn pools() -> Vec<(usize, rayon::ThreadPool)> {
    let full = rayon::current_num_threads();
    let mut sizes = vec![1];
    if full > 1 {
        sizes.push(full);
    }
    sizes
        .into_iter()
        .map(|n| (n, rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap()))
        .collect()
}

fn assembly(c: &mut Criterion) {
    let mesh = mesh_level(12, 0.2, 42, 2).unwrap();
    let v = build_velocity_space(&mesh, 2).unwrap();
    let q = build_pressure_space(&mesh, 1).unwrap();
    let problem = benchmark_problem(1e-6).unwrap();
    let params = DiscretizationParams::new(2);
    let mut group = c.benchmark_group("level2");
    group.sample_size(10);
    for (threads, pool) in pools() {
        group.bench_with_input(BenchmarkId::new("operator", threads), &threads, |b, _| {
            b.iter(|| {
                pool.install(|| {
                    let asm = Assembler::new(&mesh, &v, &problem, params.clone()).unwrap();
                    black_box(asm.assemble_operator())
                })
            })
        });
        group.bench_with_input(BenchmarkId::new("system", threads), &threads, |b, _| {
            b.iter(|| pool.install(|| black_box(SaddleSystem::assemble(&mesh, &v, &q, &problem, &params).unwrap())))
        });
        let system = SaddleSystem::assemble(&mesh, &v, &q, &problem, &params).unwrap();
        group.bench_with_input(BenchmarkId::new("solve", threads), &threads, |b, _| {
            b.iter(|| pool.install(|| black_box(solve_saddle(&system, 1e-10).unwrap())))
        });
    }
    group.finish();
}

criterion_group!(benches, assembly);
criterion_main!(benches);
