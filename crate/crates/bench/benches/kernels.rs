use std::hint::black_box;

use copula_diffusion::estimate::{pmle_objective, CdfVariant};
use copula_diffusion::inference::Dgp;
use copula_diffusion::numerics::special::ln_bessel_i;
use copula_diffusion::simulate::simulate_transformed;
use copula_diffusion::{Family, PathConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn bessel(c: &mut Criterion) {
    let mut group = c.benchmark_group("ln_bessel_i");
    // one argument per evaluation branch: series, Hankel, Debye, rescaled series
    for (q, z) in [(0.1653, 12.0), (0.1653, 250.0), (25.0, 400.0), (8.0, 40.0)] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("q{q}_z{z}")), &(q, z), |b, &(q, z)| {
            b.iter(|| ln_bessel_i(black_box(q), black_box(z)))
        });
    }
    group.finish();
}

fn cir_transition(c: &mut Criterion) {
    let model = Family::NormalizedCir.model(&[15.306, 1.1653]).unwrap();
    let spec = model.default_transition(0.0075);
    let pairs: Vec<(f64, f64)> = (1..=64).map(|i| (0.05 * i as f64, 0.05 * (65 - i) as f64)).collect();
    let mut group = c.benchmark_group("cir_transition_density");
    group.throughput(Throughput::Elements(pairs.len() as u64));
    group.bench_function("64_pairs", |b| {
        b.iter(|| {
            pairs.iter().map(|&(x, x0)| model.ln_transition_density(black_box(x), black_box(x0), &spec).unwrap()).sum::<f64>()
        })
    });
    group.finish();
}

fn pmle(c: &mut Criterion) {
    let mut group = c.benchmark_group("pmle_objective");
    group.sample_size(20);
    for dgp in [Dgp::OuSkst, Dgp::CirSkst] {
        let delta = dgp.delta(20.0).unwrap();
        let y = simulate_transformed(&dgp.structure(20.0).unwrap(), &PathConfig::new(2202, delta, 1)).unwrap();
        let model = dgp.family().model(&dgp.theta(20.0)).unwrap();
        group.throughput(Throughput::Elements(y.len() as u64));
        group.bench_function(format!("{dgp:?}_n2203"), |b| {
            b.iter(|| pmle_objective(black_box(&y), &model, delta, CdfVariant::Empirical).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bessel, cir_transition, pmle);
criterion_main!(benches);
