use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pgk_core::kernels::verify_pgk;
use pgk_core::{FejerSeries, KernelSpec, ParamSpace, PredictOptions, TrainingSet};

fn kernel_eval(c: &mut Criterion) {
    let plane = ParamSpace::uniform(2, 3.0).unwrap();
    let fejer = KernelSpec::fejer(50, plane.clone()).unwrap();
    let gauss = KernelSpec::gaussian(0.05, plane).unwrap();
    c.bench_function("fejer_eval_m2", |b| {
        b.iter(|| fejer.eval(black_box(&[0.31, -0.72])))
    });
    c.bench_function("gaussian_eval_m2", |b| {
        b.iter(|| gauss.eval(black_box(&[0.31, -0.72])))
    });
}

fn verify(c: &mut Criterion) {
    let line = ParamSpace::uniform(1, 2.0).unwrap();
    let spec = KernelSpec::fejer(64, line).unwrap();
    c.bench_function("verify_pgk_fejer64_m1", |b| {
        b.iter(|| verify_pgk(&spec, &[0.25, 0.5], 4096).unwrap())
    });
}

fn predictors(c: &mut Criterion) {
    let mut group = c.benchmark_group("energy_predictor");
    group.sample_size(10);
    let line = ParamSpace::uniform(1, 3.0).unwrap();
    let spec = KernelSpec::fejer(50, line.clone()).unwrap();
    for n in [1_000usize, 10_000] {
        let set = TrainingSet::sample(&line, n, 1, |x| Ok(x.coords()[0].cos())).unwrap();
        let x = line.point(vec![0.4]).unwrap();
        group.bench_with_input(BenchmarkId::new("direct_point", n), &set, |b, set| {
            b.iter(|| {
                pgk_core::estimator::predict_scalar(&x, set, &spec, &PredictOptions::default())
                    .unwrap()
            })
        });
        group.bench_with_input(BenchmarkId::new("series_grid_1000", n), &set, |b, set| {
            b.iter(|| {
                FejerSeries::fit(&spec, set.points(), &[set.labels().to_vec()])
                    .unwrap()
                    .eval_grid(1000)
                    .unwrap()
            })
        });
    }
    group.finish();

    let plane = ParamSpace::uniform(2, 3.0).unwrap();
    let spec = KernelSpec::fejer(50, plane.clone()).unwrap();
    let set =
        TrainingSet::sample(&plane, 10_000, 2, |x| Ok(x.coords()[0] * x.coords()[1])).unwrap();
    let mut group = c.benchmark_group("correlation_predictor_m2");
    group.sample_size(10);
    group.bench_function("series_grid_200", |b| {
        b.iter(|| {
            FejerSeries::fit(&spec, set.points(), &[set.labels().to_vec()])
                .unwrap()
                .eval_grid(200)
                .unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, kernel_eval, verify, predictors);
criterion_main!(benches);
