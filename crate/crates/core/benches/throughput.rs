//! Throughput of the hot paths. With the default `parallel` feature every
//! operation is measured twice, on the default rayon pool and pinned to a
//! single thread, so the gain from data parallelism is visible directly.
//! Built with `--no-default-features` the same benches time the plain
//! sequential code instead.

use criterion::{criterion_group, criterion_main, Criterion};
use dyadic_density::bandwidth::rot_bandwidth;
use dyadic_density::covariance::{psd_project, sigma_hat};
use dyadic_density::estimator::fhat;
use dyadic_density::inference::{band_at, gaussian_quantile};
use dyadic_density::simulation::{generate, PiParams};
use dyadic_density::{EvaluationGrid, KernelFamily, KernelSpec};
use std::time::Duration;

const DOMAIN: (f64, f64) = (-2.0, 2.0);

fn bench_modes<R: Send>(c: &mut Criterion, name: &str, f: impl Fn() -> R + Sync) {
    let mut group = c.benchmark_group(name);
    group
        .sample_size(10)
        .warm_up_time(Duration::from_millis(500))
        .measurement_time(Duration::from_secs(2));
    #[cfg(feature = "parallel")]
    {
        group.bench_function("default-pool", |b| b.iter(&f));
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .expect("single-thread pool");
        group.bench_function("one-thread", |b| b.iter(|| single.install(&f)));
    }
    #[cfg(not(feature = "parallel"))]
    group.bench_function("sequential", |b| b.iter(&f));
    group.finish();
}

fn throughput(c: &mut Criterion) {
    let pi = PiParams::new(0.2, 0.2, 0.6).unwrap();
    let (big, _) = generate(&pi, 200, 7).unwrap();
    let (mid, _) = generate(&pi, 120, 8).unwrap();
    let selection = rot_bandwidth(&big, KernelFamily::Epanechnikov).unwrap();
    let spec = KernelSpec::new(KernelFamily::Epanechnikov, 4, selection.h, DOMAIN).unwrap();
    let fine = EvaluationGrid::equally_spaced(DOMAIN, 25).unwrap();
    let coarse = EvaluationGrid::equally_spaced(DOMAIN, 15).unwrap();

    bench_modes(c, "estimate/n200/d25", || fhat(&big, &spec, &fine).unwrap());
    bench_modes(c, "covariance/n120/d15", || {
        sigma_hat(&mid, &spec, &coarse).unwrap()
    });

    let raw = sigma_hat(&mid, &spec, &coarse).unwrap();
    let constants = spec.lipschitz_constants(&spec.default_sweep_grid()).unwrap();
    bench_modes(c, "projection/d15", || {
        psd_project(&raw, constants, mid.n(), spec.bandwidth()).unwrap()
    });

    let psd = psd_project(&raw, constants, mid.n(), spec.bandwidth()).unwrap();
    bench_modes(c, "quantile/d15/B2000", || {
        gaussian_quantile(&psd, 0.05, 2000, 3).unwrap()
    });

    bench_modes(c, "band/n120/d15/B1000", || {
        band_at(&mid, &spec, &coarse, 0.05, 1000, 5).unwrap()
    });
}

criterion_group!(benches, throughput);
criterion_main!(benches);
