use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use pulsepair::calib::fit_gauss_flat_ra;

fn drift_fit(c: &mut Criterion) {
    // Two hours of one-second samples across a 36 minute wide beam.
    let ra: Vec<f64> = (0..7200).map(|i| 4.25 + i as f64 / 3600.0).collect();
    let power: Vec<f64> = ra
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let sigma = 0.6 / (8.0f64.ln() * 2.0).sqrt();
            let ripple = 0.01 * ((i as f64) * 0.37).sin();
            10.0 + 0.2 * (-(x - 5.25).powi(2) / (2.0 * sigma * sigma)).exp() + ripple
        })
        .collect();
    c.bench_function("gauss plus flat fit, 7200 samples", |b| {
        b.iter(|| fit_gauss_flat_ra(black_box(&ra), black_box(&power)).unwrap())
    });
}

criterion_group!(benches, drift_fit);
criterion_main!(benches);
