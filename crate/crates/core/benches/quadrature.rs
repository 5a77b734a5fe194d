//! Sequential against rayon-parallel node evaluation on the same rules.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ymbubble::gauge::{Connection, InstantonSpec};
use ymbubble::geometry::MetricField;
use ymbubble::pohozaev::{pohozaev_tensor, PohozaevRules};
use ymbubble::quadrature::{integrate_ball, QuadratureConfig};
use ymbubble::stress::stress_at;
use ymbubble::Exec;

fn policies(c: &mut Criterion) {
    let a = Connection::bpst(InstantonSpec::bpst(1, 1.0, [0.0; 4])).unwrap();
    let flat = MetricField::Flat;
    let cp2 = MetricField::from_id("cp2").unwrap();
    let groisser = Connection::Instanton(InstantonSpec::groisser(0.4)).on_metric(&cp2);
    let q = QuadratureConfig::default();
    let rules = PohozaevRules::default();

    let mut g = c.benchmark_group("exec");
    g.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        let name = format!("{exec:?}");
        g.bench_with_input(BenchmarkId::new("ball_stress_flat", &name), &exec, |b, &e| {
            b.iter(|| integrate_ball(|x| stress_at(&a, &flat, x), 0.5, &q, e).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("pohozaev_cp2", &name), &exec, |b, &e| {
            b.iter(|| pohozaev_tensor(&groisser, &cp2, 0.3, &rules, e).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, policies);
criterion_main!(benches);
