use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use tautgw::potentials::{build_h_series, cp1_h_sequence, PotentialSpec};
use tautgw::verify::wdvv_spec;
use tautgw::{gw_potential_series, GwEngine};
use tautgw_bench::{cp1_kappa_key, engine, p2_points_key};

fn kontsevich(c: &mut Criterion) {
    let mut g = c.benchmark_group("p2_curve_counts");
    for d in [3u32, 4, 5] {
        g.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, &d| {
            // Fresh engine each time so the memo does not hide the work.
            b.iter(|| {
                let gw = GwEngine::new(engine(2).target_arc().clone());
                gw.pure_gw(&vec![2; (3 * d - 1) as usize], d).unwrap()
            })
        });
    }
    g.finish();
}

fn correlators(c: &mut Criterion) {
    let mut g = c.benchmark_group("correlators");
    for n in [2u32, 3, 4] {
        g.bench_with_input(BenchmarkId::new("cp1_kappa", n), &n, |b, &n| {
            b.iter(|| engine(1).evaluate(black_box(&cp1_kappa_key(n))).unwrap())
        });
    }
    g.bench_function("p2_points_d4_main", |b| b.iter(|| engine(2).evaluate(&p2_points_key(4)).unwrap()));
    g.bench_function("p2_points_d3_alt", |b| b.iter(|| engine(2).evaluate_alt(&p2_points_key(3)).unwrap()));
    g.finish();
}

fn series(c: &mut Criterion) {
    let mut g = c.benchmark_group("series");
    g.sample_size(10);
    g.bench_function("cp1_h_sequence_20", |b| b.iter(|| cp1_h_sequence(black_box(20))));
    g.bench_function("cp1_five_variable_q3", |b| {
        let spec = PotentialSpec::cp1_five_variable(6, 3, Some(6)).unwrap();
        b.iter(|| build_h_series(&spec, &engine(1)).unwrap())
    });
    g.bench_function("p2_gw_potential_q3", |b| {
        let spec = wdvv_spec(2, 3).unwrap();
        b.iter(|| gw_potential_series(&spec.target, &spec.registry, &spec.truncation).unwrap())
    });
    g.finish();
}

criterion_group!(benches, kontsevich, correlators, series);
criterion_main!(benches);
