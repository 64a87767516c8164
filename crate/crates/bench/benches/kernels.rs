use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use crsvm_bench::first_shard;
use crsvm_core::nalgebra::DVector;
use crsvm_core::{group_soft_threshold, prox_loss, soft_threshold, BetaSolver, LossKind, SolveStrategy, StructureOp};

fn prox(c: &mut Criterion) {
    let zetas: Vec<f64> = (0..1024).map(|i| (i as f64 - 512.0) / 128.0).collect();
    let losses = [
        LossKind::Hinge,
        LossKind::SquareHinge,
        LossKind::HuberizedHinge { delta: 0.5 },
        LossKind::HuberizedPinball { tau: 0.5, delta: 0.5 },
    ];
    let mut group = c.benchmark_group("prox_loss");
    for loss in &losses {
        group.bench_function(loss.short_name(), |b| {
            b.iter(|| zetas.iter().map(|&z| prox_loss(loss, black_box(z), 10.0)).sum::<f64>())
        });
    }
    group.finish();
    c.bench_function("soft_threshold_1024", |b| {
        b.iter(|| zetas.iter().map(|&z| soft_threshold(black_box(z), 0.3).unwrap()).sum::<f64>())
    });
    c.bench_function("group_soft_threshold_1024", |b| b.iter(|| group_soft_threshold(black_box(&zetas), 2.0).unwrap()));
}

fn structure(c: &mut Criterion) {
    let mut group = c.benchmark_group("difference_gram");
    for p in [100usize, 1000, 10_000] {
        let op = StructureOp::Difference { p };
        let v = DVector::from_fn(p, |i, _| (i as f64).sin());
        group.bench_with_input(BenchmarkId::from_parameter(p), &v, |b, v| b.iter(|| op.gram_apply(black_box(v))));
    }
    group.finish();
}

fn beta_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("beta_solve");
    for (n, p) in [(400usize, 50usize), (50, 400)] {
        let shard = first_shard(n, p, 1, 3);
        let rhs = DVector::from_fn(p, |i, _| (i as f64).cos());
        let warm = DVector::zeros(p);
        let strategies = [
            ("direct", SolveStrategy::DirectInverse),
            ("woodbury", SolveStrategy::Woodbury),
            ("cg", SolveStrategy::cg_default(p)),
        ];
        for (name, strategy) in strategies {
            let solver = BetaSolver::new(shard.xbar(), strategy).unwrap();
            group.bench_function(BenchmarkId::new(name, format!("{n}x{p}")), |b| {
                b.iter(|| solver.solve(shard.xbar(), black_box(&rhs), &warm).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, prox, structure, beta_solve);
criterion_main!(benches);
