use std::hint::black_box;

use cdkit::bootstrap::{raw_bootstrap_cd, resample};
use cdkit::constructors::normal_mean_cd;
use cdkit::inference::support_report;
use cdkit::multivariate::depth;
use cdkit::{draw, DataSample, DepthSpec, DistKind, MultiCD, NullRegion, ResamplePlan, RngStream};
use criterion::{criterion_group, criterion_main, Criterion};

fn quantiles(c: &mut Criterion) {
    let t = DistKind::student_t(7.0).unwrap();
    let z = DistKind::standard_normal();
    let chi = DistKind::chi_square(12.0).unwrap();
    let mut g = c.benchmark_group("quantile");
    g.bench_function("normal", |b| b.iter(|| z.quantile(black_box(0.975)).unwrap()));
    g.bench_function("student_t", |b| b.iter(|| t.quantile(black_box(0.975)).unwrap()));
    g.bench_function("chi_square", |b| b.iter(|| chi.quantile(black_box(0.975)).unwrap()));
    g.finish();
}

fn cd_ops(c: &mut Criterion) {
    let xs = draw(&RngStream::new(1, 0), &DistKind::standard_normal(), 50).unwrap();
    let data = DataSample::new(xs).unwrap();
    let h = normal_mean_cd(&data, None).unwrap();
    let grid = h.to_grid(2001).unwrap();
    let region: NullRegion = serde_json::from_str(r#"{"intervals":[[null,-0.2],[0.3,null]]}"#).unwrap();
    let mut g = c.benchmark_group("cd");
    g.bench_function("analytic_eval", |b| b.iter(|| h.eval(black_box(0.1))));
    g.bench_function("grid_eval", |b| b.iter(|| grid.eval(black_box(0.1))));
    g.bench_function("grid_quantile", |b| b.iter(|| grid.quantile(black_box(0.3)).unwrap()));
    g.bench_function("to_grid_2001", |b| b.iter(|| h.to_grid(2001).unwrap()));
    g.bench_function("support_report", |b| b.iter(|| support_report(&h, black_box(&region))));
    g.finish();
}

fn bootstrap(c: &mut Criterion) {
    let xs = draw(&RngStream::new(2, 0), &DistKind::standard_normal(), 100).unwrap();
    let data = DataSample::new(xs).unwrap();
    let plan = ResamplePlan::for_mean(2000, RngStream::new(3, 0)).unwrap();
    c.bench_function("bootstrap/resample_mean_2000", |b| {
        b.iter(|| raw_bootstrap_cd(&resample(&data, &plan).unwrap()).unwrap())
    });
}

fn depths(c: &mut Criterion) {
    let s = RngStream::new(4, 0);
    let z = draw(&s, &DistKind::standard_normal(), 2000).unwrap();
    let points: Vec<Vec<f64>> = z.chunks(2).map(|p| p.to_vec()).collect();
    let cloud = MultiCD::from_points(2, &points).unwrap();
    let x = [0.3, -0.4];
    let mut g = c.benchmark_group("depth");
    g.bench_function("mahalanobis_1000", |b| b.iter(|| depth(DepthSpec::Mahalanobis, &cloud, black_box(&x)).unwrap()));
    g.bench_function("tukey_1000", |b| b.iter(|| depth(DepthSpec::tukey(), &cloud, black_box(&x)).unwrap()));
    g.finish();
}

criterion_group!(benches, quantiles, cd_ops, bootstrap, depths);
criterion_main!(benches);
