use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mcs_core::signal::SynthConfig;
use mcs_core::{
    extract_lane_samples, form_measurement, reference_pattern, run_trial, somp, synthesize_multiband, BandSpec, Occupancy,
    RecoveryConfig, SensingMatrix, TrialConfig,
};
use std::hint::black_box;

const WINDOW: usize = 1024;

fn snapshot() -> mcs_core::LaneSampleBlock {
    let pattern = reference_pattern();
    let cfg = SynthConfig::new(pattern.grid_factor(), pattern.lane_rate_hz(), WINDOW);
    let bands = [BandSpec::new(0.0, 100e6), BandSpec::new(-325e6, 50e6)];
    let signal = synthesize_multiband(&bands, &cfg, 10.0, 7).unwrap();
    extract_lane_samples(&signal, &pattern, WINDOW).unwrap()
}

fn bench_measurement(c: &mut Criterion) {
    let block = snapshot();
    let mut group = c.benchmark_group("form_measurement");
    for d in [1, 4, 16] {
        group.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, &d| b.iter(|| form_measurement(black_box(&block), d).unwrap()));
    }
    group.finish();
}

fn bench_somp(c: &mut Criterion) {
    let pattern = reference_pattern();
    let a = SensingMatrix::new(&pattern);
    let x = form_measurement(&snapshot(), 1).unwrap();
    let config = RecoveryConfig::for_lanes(pattern.num_lanes());
    c.bench_function("somp", |b| b.iter(|| somp(black_box(&x), &a, &config).unwrap()));
}

fn bench_trial(c: &mut Criterion) {
    let config = TrialConfig::new(reference_pattern(), Occupancy::TotalMhz(200.0), 3);
    c.bench_function("run_trial_200mhz", |b| b.iter(|| run_trial(black_box(&config)).unwrap()));
}

criterion_group!(benches, bench_measurement, bench_somp, bench_trial);
criterion_main!(benches);
