//! Sequential versus data-parallel batch cross-checking of random single
//! equations against the oracle.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use realeq::expr::Var;
use realeq::oracle::crosscheck_single;
use realeq::parallel::{map_collect, Execution};
use realeq::random::{rng, single_equation};

fn batch(c: &mut Criterion) {
    let others = [Var::new("Y"), Var::new("Z")];
    let equations: Vec<_> = (0..128).map(|seed| single_equation(&mut rng(seed), &others)).collect();
    let mut group = c.benchmark_group("crosscheck_batch");
    group.sample_size(10);
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                let reports = map_collect(exec, equations.clone(), |(op, x, e)| {
                    crosscheck_single(op, &x, &e, 8, 0, Execution::Sequential).map(|r| r.agreed())
                });
                black_box(reports)
            })
        });
    }
    group.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);
