//! Independent reference computations shared by the integration tests.
//!
//! Nothing here goes through the crate's own FFT wrapper or front end.

#![allow(dead_code)]

use mcs_core::signal::{BandSpec, SubbandLayout};
use mcs_core::{CMatrix, Complex64, GridSignal, SamplingPattern};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Θ from the full-grid spectrum: row `l`, column `n` is
/// `θ[l·N + n·d] / (L f_s)` with θ the unnormalised N·L-point FFT.
pub fn theta_truth(signal: &GridSignal, pattern: &SamplingPattern, window_len: usize, decimation: usize) -> CMatrix {
    let l = pattern.grid_factor();
    let m = window_len * l;
    let mut spec: Vec<Complex64> = signal.samples()[..m].to_vec();
    FftPlanner::new().plan_fft_forward(m).process(&mut spec);
    let scale = 1.0 / (l as f64 * pattern.lane_rate_hz());
    let bins = window_len / decimation;
    CMatrix::from_fn(l, bins, |row, n| spec[row * window_len + n * decimation] * scale)
}

/// `A_{p,l} = e^{+j2π c_p l / L}` evaluated directly.
pub fn sensing_oracle(pattern: &SamplingPattern) -> CMatrix {
    let l = pattern.grid_factor();
    CMatrix::from_fn(pattern.num_lanes(), l, |p, col| {
        Complex64::from_polar(1.0, 2.0 * PI * (pattern.cosets()[p] * col) as f64 / l as f64)
    })
}

/// O(N²) DFT, forward and unnormalised.
pub fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(i, v)| v * Complex64::from_polar(1.0, -2.0 * PI * ((k * i) % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

pub fn rel_frobenius(a: &CMatrix, b: &CMatrix) -> f64 {
    a.sub(b).frobenius_norm() / b.frobenius_norm()
}

/// Bands covering `k` distinct random subbands exactly.
pub fn random_subbands(layout: &SubbandLayout, k: usize, seed: u64) -> Vec<BandSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample(&mut rng, layout.grid_factor, k)
        .into_iter()
        .map(|s| {
            let (lo, hi) = layout.subband_interval(s);
            BandSpec::from_edges(lo, hi)
        })
        .collect()
}

pub fn random_sequence(n: usize, seed: u64) -> Vec<Complex64> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}
