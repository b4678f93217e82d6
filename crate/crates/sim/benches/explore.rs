//! Batch exploration: thread pool versus calling thread.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mercurius_par::Mode;
use mercurius_refine::refine_protocol;
use mercurius_sim::{explore_many, synthesize_programs, Bounds};
use mercurius_testkit::{random_wf_protocol, rng};
use std::hint::black_box;

fn batch(c: &mut Criterion) {
    let jobs: Vec<_> = (0..128)
        .filter_map(|s| {
            let g = refine_protocol(&random_wf_protocol(&mut rng(s), 6));
            let progs = synthesize_programs(&g).ok()?;
            Some((g, progs))
        })
        .collect();
    let bounds = Bounds::default();
    let mut group = c.benchmark_group("explore_many");
    for (name, mode) in [("parallel", Mode::Auto), ("sequential", Mode::Sequential)] {
        group.bench_with_input(BenchmarkId::new(name, jobs.len()), &jobs, |b, js| {
            b.iter(|| black_box(explore_many(mode, js, &bounds)))
        });
    }
    group.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);
