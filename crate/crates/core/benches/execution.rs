use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use solidflow::simulate::Scenario;
use solidflow::{Execution, Pose};

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn pose_grid() -> Vec<Pose> {
    let mut out = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..2 {
                out.push(Pose::new(-1.0 + i as f64, -1.0 + j as f64, 0.5 * k as f64));
            }
        }
    }
    out
}

/// Independent Kirchhoff solves over a grid of poses.
fn inertia_grid(c: &mut Criterion) {
    let scen = Scenario::baseline();
    let poses = pose_grid();
    let mut group = c.benchmark_group("inertia_grid");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter_batched(
                || scen.model().unwrap(),
                |model| exec.map(&poses, |q| model.added_mass(q).unwrap().total),
                BatchSize::PerIteration,
            )
        });
    }
    group.finish();
}

/// Building one Chebyshev cell of the metric surrogate.
fn metric_cell(c: &mut Criterion) {
    let mut group = c.benchmark_group("metric_cell");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        let mut scen = Scenario::baseline();
        scen.dynamics.model.tile_degree = 3;
        scen.dynamics.model.execution = exec;
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter_batched(
                || scen.model().unwrap(),
                |model| model.metric(&Pose::new(0.0, 0.0, 0.0)).unwrap(),
                BatchSize::PerIteration,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, inertia_grid, metric_cell);
criterion_main!(benches);
