use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sipcert_core::fixtures::{linear_sip, trig_sip, TRIG_CANDIDATE};
use sipcert_core::model::{Options, Snapshot};
use sipcert_core::multipliers::tc_approx;
use sipcert_core::Execution;

fn modes() -> [(&'static str, Options); 2] {
    let par = Options::default();
    let seq = Options {
        execution: Execution::Sequential,
        ..Options::default()
    };
    [("parallel", par), ("sequential", seq)]
}

/// Grid evaluation (values, gradients, refinement) of one snapshot.
fn snapshot(c: &mut Criterion) {
    let mut g = c.benchmark_group("snapshot");
    for grid in [1025, 16385] {
        let prob = trig_sip(grid);
        for (name, opts) in modes() {
            g.bench_with_input(BenchmarkId::new(name, grid), &grid, |b, _| {
                b.iter(|| Snapshot::new(&prob, &TRIG_CANDIDATE, &opts).unwrap().all().unwrap())
            });
        }
    }
    g.finish();
}

/// The full ε-ladder, including hull membership tests between steps.
fn ladder(c: &mut Criterion) {
    let mut g = c.benchmark_group("ladder");
    g.sample_size(20);
    let prob = linear_sip(4097);
    for (name, opts) in modes() {
        g.bench_function(name, |b| b.iter(|| tc_approx(&prob, &[1.0, 1.0], &opts).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, snapshot, ladder);
criterion_main!(benches);
