//! FFT helpers shared by the simulator and the front-end.
//!
//! Forward transforms are unnormalised (`Σ x[i] e^{-j2π k i/N}`); the
//! inverse helper divides by `N`.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::sync::Arc;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// In-place unnormalised forward FFT.
pub fn fft_in_place(buf: &mut [Complex64]) {
    if buf.len() > 1 {
        plan(buf.len(), false).process(buf);
    }
}

/// Forward FFT of a copy.
pub fn fft(input: &[Complex64]) -> Vec<Complex64> {
    let mut buf = input.to_vec();
    fft_in_place(&mut buf);
    buf
}

/// Inverse FFT including the `1/N` factor, so `ifft(fft(x)) == x`.
pub fn ifft(input: &[Complex64]) -> Vec<Complex64> {
    let mut buf = input.to_vec();
    if buf.len() > 1 {
        plan(buf.len(), true).process(&mut buf);
    }
    let scale = 1.0 / buf.len().max(1) as f64;
    for z in buf.iter_mut() {
        *z *= scale;
    }
    buf
}

/// Mean of `|x|²`; zero for an empty slice.
pub fn mean_power(x: &[Complex64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|z| z.norm_sqr()).sum::<f64>() / x.len() as f64
}

/// Largest `|a_i - b_i|` divided by the largest `|b_i|`.
///
/// This is the "relative elementwise error" used throughout the test
/// suite: normalising each entry by itself would blow up on bins that are
/// zero up to rounding.
pub fn max_relative_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let err = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}
