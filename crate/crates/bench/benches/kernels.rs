use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use nvheat::engine::{
    ensemble_power, DetuningDistribution, EngineLevels, EngineMode, PopulationGenerator,
};
use nvheat::fluorescence::{kappa, KappaMode};
use nvheat::numerics::{mat_exp, mat_exp_real, CMatrix, C64};
use nvheat::nv_model::optical_matrix;
use nvheat_bench::{engine_point, rates};

fn matrix_exponential(c: &mut Criterion) {
    let m = optical_matrix(&rates().with_pump(0.5)).unwrap();
    c.bench_function("mat_exp_real 7x7", |b| {
        b.iter(|| mat_exp_real(black_box(&m), 0.1).unwrap())
    });
    let z = CMatrix::from_fn(7, 7, |i, j| {
        C64::new(m[(i, j)], if i == j { 3.0 } else { 0.0 })
    });
    c.bench_function("mat_exp complex 7x7", |b| {
        b.iter(|| mat_exp(black_box(&z), 0.1).unwrap())
    });
}

fn engine(c: &mut Criterion) {
    let pg = PopulationGenerator::reduced(&rates(), 0.76).unwrap();
    let lv = EngineLevels::default();
    let mut g = c.benchmark_group("ensemble_power");
    g.sample_size(10);
    for (name, dist) in [
        (
            "resonant",
            DetuningDistribution {
                fwhm: 0.0,
                ..Default::default()
            },
        ),
        ("ensemble", DetuningDistribution::default()),
    ] {
        let cfg = engine_point(EngineMode::TwoStroke);
        g.bench_function(name, |b| {
            b.iter(|| ensemble_power(black_box(&cfg), &pg, &lv, &dist, 0.41).unwrap())
        });
    }
    g.finish();
}

fn conversion_factor(c: &mut Criterion) {
    let rc = rates();
    let mut g = c.benchmark_group("kappa");
    g.sample_size(20);
    g.bench_function("continuous", |b| {
        b.iter(|| kappa(&rc, black_box(0.76), KappaMode::Continuous, 0.06).unwrap())
    });
    g.bench_function("two_stroke", |b| {
        b.iter(|| {
            kappa(
                &rc,
                black_box(0.76),
                KappaMode::TwoStroke { duty: 1.0 / 3.0 },
                0.06,
            )
            .unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, matrix_exponential, engine, conversion_factor);
criterion_main!(benches);
