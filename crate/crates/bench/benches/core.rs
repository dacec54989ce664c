use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use diffloss::diffusion::{sensor_staggered_md, sensor_true_md, SensorConfig};
use diffloss::experiment::initial_spec;
use diffloss::gpr::NOISELESS_JITTER;
use diffloss::kernels::KernelKind;
use diffloss::mesh::build_staggered_mesh;
use diffloss_bench::problem;

fn sensors(c: &mut Criterion) {
    let mut g = c.benchmark_group("sensors");
    for shape in [[19usize, 15, 5], [40, 40, 10]] {
        let p = problem(&shape);
        let stag = build_staggered_mesh(&p.mesh).unwrap();
        let stag_values = vec![0.5; stag.len()];
        let name = format!("{}x{}x{}", shape[0], shape[1], shape[2]);
        let cfg = SensorConfig::default();
        g.bench_with_input(BenchmarkId::new("true", &name), &p, |b, p| {
            b.iter(|| sensor_true_md(black_box(&p.mesh), &cfg).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("staggered", &name), &p, |b, p| {
            b.iter(|| sensor_staggered_md(p.mesh.shape(), black_box(p.mesh.values()), &stag_values, &cfg).unwrap())
        });
    }
    g.finish();
}

fn fit_and_loss(c: &mut Criterion) {
    let p = problem(&[19, 15, 5]);
    let spec = initial_spec(KernelKind::SE, 3, 0.15, 1.0, None, false).unwrap();
    let mut g = c.benchmark_group("gp");
    g.sample_size(10);
    g.bench_function("fit 1425 points", |b| b.iter(|| p.fit(black_box(&spec), NOISELESS_JITTER).unwrap()));
    let model = p.fit(&spec, NOISELESS_JITTER).unwrap();
    g.bench_function("lml gradient", |b| b.iter(|| model.lml_gradient().unwrap()));
    g.bench_function("diffusion loss", |b| b.iter(|| p.loss(black_box(&model)).unwrap()));
    g.finish();
}

criterion_group!(benches, sensors, fit_and_loss);
criterion_main!(benches);
