//! Digital front-end: decimation by folding and the phase-corrected
//! measurement matrix `X`.
//!
//! Folding a length-`N` lane into `d` segments and summing keeps exactly
//! every `d`-th bin of its `N`-point spectrum, so the lane phase correction
//! is applied with `N' = N/d` in place of `N`.

use crate::dsp;
use crate::linalg::CMatrix;
use crate::pattern::SamplingPattern;
use crate::sampler::LaneSampleBlock;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrontendError {
    #[error("decimation {decimation} does not divide window {window_len}")]
    IndivisibleWindow { window_len: usize, decimation: usize },
}

/// `y[m] = Σ_k lane[m + k·N/d]` for `m < N/d`.
pub fn decimate_fold(lane: &[Complex64], d: usize) -> Result<Vec<Complex64>, FrontendError> {
    let n = lane.len();
    if d == 0 || n == 0 || n % d != 0 {
        return Err(FrontendError::IndivisibleWindow {
            window_len: n,
            decimation: d,
        });
    }
    let seg = n / d;
    let mut out = lane[..seg].to_vec();
    for chunk in lane[seg..].chunks_exact(seg) {
        for (o, x) in out.iter_mut().zip(chunk) {
            *o += x;
        }
    }
    Ok(out)
}

/// P×N′ matrix of phase-corrected lane spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    entries: CMatrix,
    pattern: SamplingPattern,
    window_len: usize,
    decimation: usize,
}

impl MeasurementMatrix {
    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn pattern(&self) -> &SamplingPattern {
        &self.pattern
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn decimation(&self) -> usize {
        self.decimation
    }

    /// Bins per lane after decimation, `N' = N/d`.
    pub fn bins(&self) -> usize {
        self.entries.cols()
    }

    /// Copy with every entry multiplied by `alpha`.
    pub fn scaled(&self, alpha: Complex64) -> Self {
        Self {
            entries: self.entries.scale(alpha),
            ..self.clone()
        }
    }

    /// One line per lane, cells written as `re+imj`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in 0..self.entries.rows() {
            let cells: Vec<String> = self.entries.row(r).iter().map(|z| format_complex(*z)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// `re+imj` / `re-imj` with full round-trip precision.
pub fn format_complex(z: Complex64) -> String {
    if z.im.is_sign_negative() {
        format!("{:e}-{:e}j", z.re, -z.im)
    } else {
        format!("{:e}+{:e}j", z.re, z.im)
    }
}

/// Phase-correction factor `e^{-j2π c n / (L N')}` for bin `n`.
fn coset_phase(coset: usize, bin: usize, grid_factor: usize, bins: usize) -> Complex64 {
    // reduce c·n modulo L·N' before converting to an angle
    let period = grid_factor * bins;
    let k = (coset * bin) % period;
    Complex64::from_polar(1.0, -2.0 * PI * k as f64 / period as f64)
}

/// Fold each lane by `d`, take its N′-point FFT, scale by `T` and apply
/// the coset phase correction.
pub fn form_measurement(block: &LaneSampleBlock, d: usize) -> Result<MeasurementMatrix, FrontendError> {
    let n = block.window_len();
    if d == 0 || n % d != 0 {
        return Err(FrontendError::IndivisibleWindow {
            window_len: n,
            decimation: d,
        });
    }
    let pattern = block.pattern();
    let bins = n / d;
    let l = pattern.grid_factor();
    let t = pattern.lane_period_s();
    let rows: Vec<Vec<Complex64>> = block
        .lanes()
        .par_iter()
        .zip(pattern.cosets().par_iter())
        .map(|(lane, &c)| {
            let mut y = decimate_fold(lane, d).expect("divisibility checked above");
            dsp::fft_in_place(&mut y);
            y.iter()
                .enumerate()
                .map(|(k, z)| z * t * coset_phase(c, k, l, bins))
                .collect()
        })
        .collect();
    let entries = CMatrix::from_vec(rows.len(), bins, rows.into_iter().flatten().collect());
    Ok(MeasurementMatrix {
        entries,
        pattern: pattern.clone(),
        window_len: n,
        decimation: d,
    })
}
