use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use lbblab::process::{simulate_tvar1, Scaling, SinArParams, SmileMaParams};
use lbblab::rng::StreamKey;
use lbblab::stats::{kernel_weights, Functional, Kernel, WeightScheme};
use lbblab::{lbb_resample, LbbPlan, ShiftTable};

fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    for t_len in [1000usize, 5000] {
        group.bench_with_input(BenchmarkId::new("smile_ma", t_len), &t_len, |b, &t| {
            b.iter(|| {
                SmileMaParams::default()
                    .simulate(t, black_box(3), Scaling::InvSqrtT)
                    .unwrap()
            })
        });
        let spec = SinArParams::default().spec().unwrap();
        group.bench_with_input(BenchmarkId::new("stable_tvar1", t_len), &t_len, |b, &t| {
            b.iter(|| simulate_tvar1(&spec, t, black_box(3)).unwrap())
        });
    }
    group.finish();
}

fn bootstrap(c: &mut Criterion) {
    let t_len = 2000;
    let path = SmileMaParams::default()
        .simulate(t_len, 1, Scaling::InvSqrtT)
        .unwrap();
    let plan = LbbPlan::new(t_len, 4, 100).unwrap();
    let unit = WeightScheme::unit(t_len).unwrap();
    let key = StreamKey::new(5);

    let mut group = c.benchmark_group("bootstrap");
    group.bench_function("full_resample", |b| {
        b.iter(|| lbb_resample(&path, &plan, black_box(key)).unwrap())
    });
    group.bench_function("shift_table_rv", |b| {
        b.iter(|| ShiftTable::new(&path, &plan, &unit, &[Functional::Square]).unwrap())
    });
    let table = ShiftTable::new(&path, &plan, &unit, &[Functional::Square]).unwrap();
    group.bench_function("draws_200_rv", |b| {
        b.iter(|| table.distribution(200, black_box(key)))
    });

    let ar = simulate_tvar1(&SinArParams::default().spec().unwrap(), 5000, 1).unwrap();
    let kernel = kernel_weights(0.4, 5000f64.powf(-0.4), 5000, Kernel::Epanechnikov).unwrap();
    let ar_plan = LbbPlan::new(5000, 25, 400).unwrap();
    let fs = [Functional::Cos(vec![6.0]), Functional::Sin(vec![6.0])];
    group.bench_function("ecf_table_and_200_draws", |b| {
        b.iter(|| {
            let t = ShiftTable::new(&ar, &ar_plan, &kernel, &fs).unwrap();
            t.distribution(200, black_box(key))
        })
    });
    group.finish();
}

criterion_group!(benches, simulation, bootstrap);
criterion_main!(benches);
