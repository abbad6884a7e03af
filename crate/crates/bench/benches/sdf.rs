use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use grasp_bench::shell_points;
use grasp_core::geometry::mesh::icosphere;
use grasp_core::ObjectModel;

fn mesh_queries(c: &mut Criterion) {
    let mut group = c.benchmark_group("mesh_sdf");
    for level in [2, 3, 4] {
        let obj = ObjectModel::mesh(icosphere(0.05, level), nalgebra::Isometry3::identity(), 0.1, 0.5);
        let points = shell_points(&obj, 256, 1);
        group.bench_with_input(BenchmarkId::new("value_gradient", level), &points, |b, pts| {
            b.iter(|| pts.iter().map(|p| obj.sdf_gradient(black_box(p)).x).sum::<f64>())
        });
        group.bench_with_input(BenchmarkId::new("full_query", level), &points, |b, pts| {
            b.iter(|| pts.iter().map(|p| obj.query(black_box(p)).unwrap().value).sum::<f64>())
        });
    }
    group.finish();
}

criterion_group!(benches, mesh_queries);
criterion_main!(benches);
