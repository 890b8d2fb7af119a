//! Sub-Nyquist acquisition models.
//!
//! Covers ideal coset extraction, the two equivalent architectures (analog
//! delay then uniform sampling, versus offset sampling clocks then digital
//! realignment), clock jitter, and frame-level lane latency absorbed by
//! buffered realignment.

use crate::dsp;
use crate::pattern::SamplingPattern;
use crate::signal::GridSignal;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::collections::VecDeque;
use std::f64::consts::PI;

/// Interpolation kernel half-width in grid taps.
pub const SINC_HALF_WIDTH: usize = 32;
/// Kaiser window shape parameter of the interpolation kernel.
pub const KAISER_BETA: f64 = 12.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SamplerError {
    #[error("signal has {have} samples, window needs {need}")]
    SignalTooShort { have: usize, need: usize },
    #[error("signal grid rate {signal_hz} Hz does not match pattern grid rate {pattern_hz} Hz")]
    GridMismatch { signal_hz: f64, pattern_hz: f64 },
    #[error("jitter RMS must be non-negative, got {0}")]
    NegativeJitter(f64),
    #[error("frame length {frame_len} does not divide window {window_len}")]
    FrameMismatch { frame_len: usize, window_len: usize },
    #[error("{0}")]
    InvalidBlock(String),
}

/// `P` lanes of `N` samples, lane `p` taken at coset `c_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneSampleBlock {
    lanes: Vec<Vec<Complex64>>,
    pattern: SamplingPattern,
    window_len: usize,
}

impl LaneSampleBlock {
    pub fn new(lanes: Vec<Vec<Complex64>>, pattern: SamplingPattern) -> Result<Self, SamplerError> {
        if lanes.len() != pattern.num_lanes() {
            return Err(SamplerError::InvalidBlock(format!(
                "{} lanes for a {}-lane pattern",
                lanes.len(),
                pattern.num_lanes()
            )));
        }
        let window_len = lanes.first().map_or(0, Vec::len);
        if window_len == 0 || lanes.iter().any(|l| l.len() != window_len) {
            return Err(SamplerError::InvalidBlock("lanes must be non-empty and of equal length".into()));
        }
        Ok(Self {
            lanes,
            pattern,
            window_len,
        })
    }

    pub fn lanes(&self) -> &[Vec<Complex64>] {
        &self.lanes
    }

    pub fn lane(&self, p: usize) -> &[Complex64] {
        &self.lanes[p]
    }

    pub fn pattern(&self) -> &SamplingPattern {
        &self.pattern
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn num_lanes(&self) -> usize {
        self.lanes.len()
    }
}

fn check_input(signal: &GridSignal, pattern: &SamplingPattern, n: usize) -> Result<(), SamplerError> {
    let pattern_hz = pattern.grid_rate_hz();
    if (signal.grid_rate_hz() - pattern_hz).abs() > 1e-9 * pattern_hz {
        return Err(SamplerError::GridMismatch {
            signal_hz: signal.grid_rate_hz(),
            pattern_hz,
        });
    }
    let need = n * pattern.grid_factor();
    if n == 0 || signal.len() < need {
        return Err(SamplerError::SignalTooShort {
            have: signal.len(),
            need: need.max(1),
        });
    }
    Ok(())
}

/// Ideal multicoset sampling: lane `p`, sample `n` is grid sample `n·L + c_p`.
pub fn extract_lane_samples(signal: &GridSignal, pattern: &SamplingPattern, n: usize) -> Result<LaneSampleBlock, SamplerError> {
    check_input(signal, pattern, n)?;
    let l = pattern.grid_factor();
    let x = signal.samples();
    let lanes = pattern
        .cosets()
        .iter()
        .map(|&c| (0..n).map(|i| x[i * l + c]).collect())
        .collect();
    LaneSampleBlock::new(lanes, pattern.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    /// Analog delay of `c_p·T/L` per lane, then phase-aligned uniform sampling.
    DelayPath,
    /// Undelayed signal sampled by clocks offset by `c_p·T/L`, then realigned.
    OffsetClockPath,
}

/// Per-lane `N`-point spectra, bin `k` at frequency `k·f_s/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneSpectra {
    pub spectra: Vec<Vec<Complex64>>,
    pub architecture: Architecture,
}

impl LaneSpectra {
    /// Largest elementwise relative error against `other`, normalised per lane.
    pub fn max_relative_error(&self, other: &LaneSpectra) -> f64 {
        assert_eq!(self.spectra.len(), other.spectra.len());
        self.spectra
            .iter()
            .zip(&other.spectra)
            .map(|(a, b)| dsp::max_relative_error(a, b))
            .fold(0.0, f64::max)
    }
}

/// Lane spectra of the delay-then-sample architecture.
///
/// The analog delay `x(t + c_p T/L)` is a shift by `c_p` samples on the
/// grid (circular over the window); the delayed copy is then sampled at
/// `n·T` and transformed.
pub fn spectral_path_mcs(signal: &GridSignal, pattern: &SamplingPattern, n: usize) -> Result<LaneSpectra, SamplerError> {
    check_input(signal, pattern, n)?;
    let l = pattern.grid_factor();
    let window = &signal.samples()[..n * l];
    let spectra = pattern
        .cosets()
        .par_iter()
        .map(|&c| {
            let mut delayed = window.to_vec();
            delayed.rotate_left(c);
            let mut lane: Vec<Complex64> = delayed.iter().step_by(l).copied().collect();
            dsp::fft_in_place(&mut lane);
            lane
        })
        .collect();
    Ok(LaneSpectra {
        spectra,
        architecture: Architecture::DelayPath,
    })
}

/// Realignment factor `e^{+j2π c_p T f / L}` undoing a clock offset of
/// `c_p·T/L` at frequency `freq_hz`.
pub fn realign_phase(coset: usize, grid_factor: usize, lane_period_s: f64, freq_hz: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * coset as f64 * lane_period_s * freq_hz / grid_factor as f64)
}

/// Lane spectra of the offset-clock architecture.
///
/// Each lane's samples sit at absolute instants `n·T + c_p·T/L`; their
/// spectrum at `f` therefore carries `e^{-j2π f c_p T/L}`. The digital
/// realignment multiplies by [`realign_phase`], which moves every sample
/// back onto the common `n·T` epoch.
pub fn spectral_path_gbsense(signal: &GridSignal, pattern: &SamplingPattern, n: usize) -> Result<LaneSpectra, SamplerError> {
    check_input(signal, pattern, n)?;
    let l = pattern.grid_factor();
    let t = pattern.lane_period_s();
    let x = signal.samples();
    let df = pattern.lane_rate_hz() / n as f64;
    let spectra = pattern
        .cosets()
        .par_iter()
        .map(|&c| {
            let offset = c as f64 * t / l as f64;
            let mut lane: Vec<Complex64> = (0..n).map(|i| x[i * l + c]).collect();
            dsp::fft_in_place(&mut lane);
            lane.iter()
                .enumerate()
                .map(|(k, z)| {
                    let f = k as f64 * df;
                    let timing = Complex64::from_polar(1.0, -2.0 * PI * f * offset);
                    z * timing * realign_phase(c, l, t, f)
                })
                .collect()
        })
        .collect();
    Ok(LaneSpectra {
        spectra,
        architecture: Architecture::OffsetClockPath,
    })
}

/// Modified Bessel function of the first kind, order zero.
fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc interpolator on a periodic grid.
struct SincInterpolator {
    inv_i0_beta: f64,
}

impl SincInterpolator {
    fn new() -> Self {
        Self {
            inv_i0_beta: 1.0 / bessel_i0(KAISER_BETA),
        }
    }

    fn weight(&self, dx: f64) -> f64 {
        let h = SINC_HALF_WIDTH as f64;
        if dx.abs() >= h {
            return 0.0;
        }
        let sinc = if dx == 0.0 { 1.0 } else { (PI * dx).sin() / (PI * dx) };
        let r = dx / h;
        sinc * bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) * self.inv_i0_beta
    }

    /// Value at fractional grid position `pos`, wrapping around `x`.
    fn sample(&self, x: &[Complex64], pos: f64) -> Complex64 {
        let m = x.len() as i64;
        let base = pos.floor() as i64;
        let h = SINC_HALF_WIDTH as i64;
        let mut acc = Complex64::new(0.0, 0.0);
        for k in base - h + 1..=base + h {
            let w = self.weight(pos - k as f64);
            if w != 0.0 {
                acc += x[k.rem_euclid(m) as usize] * w;
            }
        }
        acc
    }
}

/// Multicoset sampling with Gaussian clock jitter.
///
/// Every nominal instant `n·T + c_p·T/L` is displaced by an independent
/// `N(0, rms²)` draw and the signal is evaluated there by windowed-sinc
/// interpolation of the (periodic) grid signal. `rms_jitter_s = 0`
/// reproduces [`extract_lane_samples`] exactly.
pub fn apply_timing_jitter(
    signal: &GridSignal,
    pattern: &SamplingPattern,
    n: usize,
    rms_jitter_s: f64,
    seed: u64,
) -> Result<LaneSampleBlock, SamplerError> {
    if !(rms_jitter_s >= 0.0) {
        return Err(SamplerError::NegativeJitter(rms_jitter_s));
    }
    if rms_jitter_s == 0.0 {
        return extract_lane_samples(signal, pattern, n);
    }
    check_input(signal, pattern, n)?;
    let l = pattern.grid_factor();
    let grid_period = 1.0 / pattern.grid_rate_hz();
    let window = &signal.samples()[..n * l];
    let interp = SincInterpolator::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // draw all offsets up front so the lane order fixes the realisation
    let offsets: Vec<Vec<f64>> = (0..pattern.num_lanes())
        .map(|_| {
            (0..n)
                .map(|_| rms_jitter_s * rng.sample::<f64, _>(StandardNormal) / grid_period)
                .collect()
        })
        .collect();
    let lanes = pattern
        .cosets()
        .par_iter()
        .zip(offsets.par_iter())
        .map(|(&c, lane_offsets)| {
            lane_offsets
                .iter()
                .enumerate()
                .map(|(i, &d)| {
                    let nominal = i * l + c;
                    if d == 0.0 {
                        window[nominal]
                    } else {
                        interp.sample(window, nominal as f64 + d)
                    }
                })
                .collect()
        })
        .collect();
    LaneSampleBlock::new(lanes, pattern.clone())
}

/// Signal-to-error ratio in dB of `measured` against `reference`, pooled over lanes.
pub fn lane_snr_db(reference: &LaneSampleBlock, measured: &LaneSampleBlock) -> f64 {
    let mut signal = 0.0;
    let mut error = 0.0;
    for (r, m) in reference.lanes().iter().zip(measured.lanes()) {
        for (a, b) in r.iter().zip(m) {
            signal += a.norm_sqr();
            error += (a - b).norm_sqr();
        }
    }
    10.0 * (signal / error).log10()
}

/// What the link model did, for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkDiagnostics {
    /// Latency of each lane in frames.
    pub latencies: Vec<usize>,
    /// Frame tick at which the receiver released the first aligned frame.
    pub release_tick: usize,
    /// Deepest buffer occupancy seen on any lane, in frames.
    pub peak_buffer_frames: usize,
}

/// Serial-link transport with per-lane frame latency and buffered realignment.
///
/// Each lane gets a uniform random latency in `[0, max_latency_frames]`.
pub fn simulate_link_and_realign(
    block: &LaneSampleBlock,
    frame_len: usize,
    max_latency_frames: usize,
    seed: u64,
) -> Result<(LaneSampleBlock, LinkDiagnostics), SamplerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let latencies: Vec<usize> = (0..block.num_lanes())
        .map(|_| rng.random_range(0..=max_latency_frames))
        .collect();
    realign_with_latencies(block, frame_len, &latencies)
}

/// Link model with explicit per-lane latencies (in frames).
///
/// Lane `p`'s frame `i` arrives at tick `i + latencies[p]` into that lane's
/// FIFO. The receiver holds everything until every lane has delivered its
/// first frame, then pops one frame per lane per tick, which yields the
/// lanes back on a common epoch.
pub fn realign_with_latencies(
    block: &LaneSampleBlock,
    frame_len: usize,
    latencies: &[usize],
) -> Result<(LaneSampleBlock, LinkDiagnostics), SamplerError> {
    let n = block.window_len();
    if frame_len == 0 || n % frame_len != 0 {
        return Err(SamplerError::FrameMismatch { frame_len, window_len: n });
    }
    if latencies.len() != block.num_lanes() {
        return Err(SamplerError::InvalidBlock(format!(
            "{} latencies for {} lanes",
            latencies.len(),
            block.num_lanes()
        )));
    }
    let frames = n / frame_len;
    let lanes = block.num_lanes();
    let mut fifos: Vec<VecDeque<&[Complex64]>> = vec![VecDeque::new(); lanes];
    let mut out: Vec<Vec<Complex64>> = vec![Vec::with_capacity(n); lanes];
    let mut release_tick = None;
    let mut peak = 0;
    let last_arrival = latencies.iter().max().copied().unwrap_or(0) + frames;
    let mut tick = 0;
    while out.iter().any(|o| o.len() < n) {
        if tick <= last_arrival {
            for (p, fifo) in fifos.iter_mut().enumerate() {
                if let Some(i) = tick.checked_sub(latencies[p]).filter(|&i| i < frames) {
                    fifo.push_back(&block.lane(p)[i * frame_len..(i + 1) * frame_len]);
                }
            }
        }
        peak = peak.max(fifos.iter().map(VecDeque::len).max().unwrap_or(0));
        if release_tick.is_none() && fifos.iter().all(|f| !f.is_empty()) {
            release_tick = Some(tick);
        }
        if release_tick.is_some() {
            for (fifo, lane_out) in fifos.iter_mut().zip(out.iter_mut()) {
                if let Some(frame) = fifo.pop_front() {
                    lane_out.extend_from_slice(frame);
                }
            }
        }
        tick += 1;
    }
    let realigned = LaneSampleBlock::new(out, block.pattern().clone())?;
    Ok((
        realigned,
        LinkDiagnostics {
            latencies: latencies.to_vec(),
            release_tick: release_tick.unwrap_or(0),
            peak_buffer_frames: peak,
        },
    ))
}
