use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use latflow_core::dynamics::IntegratorConfig;
use latflow_core::observables::{LinearFunctional, Observable, SamplerSpec};
use latflow_core::par;
use latflow_core::thermo::{convergence_sweep, RegionNet};
use latflow_core::{LatticeModel, PotentialSpec};

fn sweep(c: &mut Criterion) {
    let bond = PotentialSpec::poly_bump(1, 0.3, 3.0, 6).unwrap();
    let model = LatticeModel::chain(9, 1.0, 1.0, &bond).unwrap();
    let f = Observable::gaussian(vec![LinearFunctional::p(4, 0), LinearFunctional::q(4, 0)]);
    let net = RegionNet::intervals(4, &[1, 2, 3, 4]).unwrap();
    let sampler = SamplerSpec {
        random_samples: 256,
        max_grid_points: 81,
        ..SamplerSpec::default()
    };
    let cfg = IntegratorConfig::strang(1e-2);
    let run = || convergence_sweep(&model, &net, &f, 1.0, &sampler, &cfg).unwrap();

    let mut group = c.benchmark_group("convergence_sweep");
    group.sample_size(10);
    group.bench_function("one_worker", |b| b.iter(|| par::install(Some(1), || black_box(run()))));
    group.bench_function("all_workers", |b| b.iter(|| par::install(None, || black_box(run()))));
    group.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
