//! Monte-Carlo experiments on the full acquisition and recovery chain.
//!
//! A trial synthesises a multiband signal, samples it through the
//! multicoset model (optionally with clock jitter and the serial-link
//! model), forms `X`, runs SOMP plus energy detection and scores the
//! detected subbands against the ground truth. Trials are independent and
//! seeded with `base seed + trial index`, so sweeps run in parallel and
//! still reproduce bit-for-bit.

use crate::frontend::{form_measurement, FrontendError};
use crate::pattern::{generate_pattern, PatternStrategy, SamplingPattern, SensingMatrix};
use crate::recovery::{energy_detect, estimate_noise_floor, somp, RecoveryConfig, RecoveryError, SpectrumEstimate};
use crate::sampler::{apply_timing_jitter, simulate_link_and_realign, spectral_path_gbsense, spectral_path_mcs, LaneSampleBlock, SamplerError};
use crate::signal::{synthesize_multiband, BandSpec, SignalError, SubbandLayout, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

/// Bandwidth of one test transmission.
pub const TRANSMISSION_WIDTH_HZ: f64 = 100e6;
/// Finest placement grid for transmission edges.
pub const FINE_PLACEMENT_GRID_HZ: f64 = 10e6;

const PLACEMENT_SALT: u64 = 0x706c_6163_655f_7631;
const JITTER_SALT: u64 = 0x6a69_7474_6572_5f31;
const LINK_SALT: u64 = 0x6c69_6e6b_5f76_3031;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error("synthesis: {0}")]
    Synthesis(#[from] SignalError),
    #[error("sampling: {0}")]
    Sampling(#[from] SamplerError),
    #[error("front-end: {0}")]
    Frontend(#[from] FrontendError),
    #[error("recovery: {0}")]
    Recovery(#[from] RecoveryError),
    #[error("occupancy {occupancy_mhz} MHz exceeds the {bandwidth_mhz} MHz instantaneous bandwidth")]
    OccupancyTooLarge { occupancy_mhz: f64, bandwidth_mhz: f64 },
    #[error("could not place {0} MHz of non-overlapping transmissions")]
    PlacementFailed(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// What to put on the air in a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Occupancy {
    /// Exactly these bands.
    Bands(Vec<BandSpec>),
    /// Total occupied bandwidth, split into 100 MHz transmissions (plus one
    /// narrower remainder band) at seeded random positions.
    TotalMhz(f64),
}

/// Serial-link model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub frame_len: usize,
    pub max_latency_frames: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub pattern: SamplingPattern,
    pub window_len: usize,
    pub decimation: usize,
    /// `f64::INFINITY` for noiseless trials.
    pub snr_db: f64,
    pub occupancy: Occupancy,
    pub recovery: RecoveryConfig,
    pub jitter_rms_s: f64,
    pub link: Option<LinkConfig>,
    /// Lower edges of auto-placed transmissions are multiples of this.
    /// Defaults to the lane rate, which keeps each transmission on whole
    /// subbands; [`FINE_PLACEMENT_GRID_HZ`] lets them straddle boundaries.
    pub placement_grid_hz: f64,
    pub seed: u64,
}

impl TrialConfig {
    /// Configuration with the given pattern and the reference window
    /// (N = 1024, d = 1, 10 dB, no jitter, no link model, subband-aligned
    /// placement).
    pub fn new(pattern: SamplingPattern, occupancy: Occupancy, seed: u64) -> Self {
        let recovery = RecoveryConfig::for_lanes(pattern.num_lanes());
        let placement_grid_hz = pattern.lane_rate_hz();
        Self {
            pattern,
            window_len: 1024,
            decimation: 1,
            snr_db: 10.0,
            occupancy,
            recovery,
            jitter_rms_s: 0.0,
            link: None,
            placement_grid_hz,
            seed,
        }
    }

    fn layout(&self) -> SubbandLayout {
        SubbandLayout::new(self.pattern.grid_factor(), self.pattern.lane_rate_hz())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.window_len == 0 || self.decimation == 0 || self.window_len % self.decimation != 0 {
            return Err(HarnessError::InvalidConfig(format!(
                "decimation {} must divide window {}",
                self.decimation, self.window_len
            )));
        }
        if let Some(link) = self.link {
            if link.frame_len == 0 || self.window_len % link.frame_len != 0 {
                return Err(HarnessError::InvalidConfig(format!(
                    "link frame length {} must divide window {}",
                    link.frame_len, self.window_len
                )));
            }
        }
        self.recovery.validate(self.pattern.num_lanes())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub synthesis: Duration,
    pub sampling: Duration,
    pub frontend: Duration,
    pub recovery: Duration,
    pub detection: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.synthesis + self.sampling + self.frontend + self.recovery + self.detection
    }
}

/// Outcome of [`detection_probability`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionScore {
    /// `|truth ∩ detected| / |truth|`, or 1 when the truth set is empty.
    pub probability: f64,
    pub false_alarm_count: usize,
    /// Set when the truth set was empty and the probability is vacuous.
    pub no_truth: bool,
}

/// Fraction of active subbands that were detected. False alarms are
/// reported separately and do not lower the probability.
pub fn detection_probability(truth: &BTreeSet<usize>, detected: &BTreeSet<usize>) -> DetectionScore {
    let false_alarm_count = detected.difference(truth).count();
    if truth.is_empty() {
        return DetectionScore {
            probability: 1.0,
            false_alarm_count,
            no_truth: true,
        };
    }
    let hits = truth.intersection(detected).count();
    DetectionScore {
        probability: hits as f64 / truth.len() as f64,
        false_alarm_count,
        no_truth: false,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    /// Active subband indices.
    pub truth: BTreeSet<usize>,
    /// Detected subband indices.
    pub detected: BTreeSet<usize>,
    pub detection_probability: f64,
    pub false_alarm_count: usize,
    pub no_truth: bool,
    pub bands: Vec<BandSpec>,
    pub timing: StageTimings,
}

/// Random non-overlapping placement of `occupancy_mhz` worth of
/// transmissions with lower edges on multiples of `grid_hz`.
pub fn place_transmissions(occupancy_mhz: f64, layout: &SubbandLayout, grid_hz: f64, seed: u64) -> Result<Vec<BandSpec>, HarnessError> {
    let total_hz = occupancy_mhz * 1e6;
    let bandwidth = layout.bandwidth_hz();
    if !(grid_hz > 0.0) {
        return Err(HarnessError::InvalidConfig(format!("placement grid {grid_hz} Hz")));
    }
    if !(total_hz >= 0.0) || total_hz > bandwidth {
        return Err(HarnessError::OccupancyTooLarge {
            occupancy_mhz,
            bandwidth_mhz: bandwidth / 1e6,
        });
    }
    let full = (total_hz / TRANSMISSION_WIDTH_HZ + 1e-9).floor() as usize;
    let mut widths = vec![TRANSMISSION_WIDTH_HZ; full];
    let remainder = total_hz - full as f64 * TRANSMISSION_WIDTH_HZ;
    if remainder > 1e-3 {
        widths.push(remainder);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ PLACEMENT_SALT);
    let half = 0.5 * bandwidth;
    'attempt: for _ in 0..64 {
        let mut placed: Vec<BandSpec> = Vec::with_capacity(widths.len());
        for &w in &widths {
            // admissible lower edges on the grid: band inside [-B/2, B/2)
            // and clear of everything placed so far
            let lo_k = (-half / grid_hz - 1e-9).ceil() as i64;
            let hi_k = ((half - w) / grid_hz + 1e-9).floor() as i64;
            let candidates: Vec<f64> = (lo_k..=hi_k)
                .map(|k| k as f64 * grid_hz)
                .filter(|&lo| {
                    placed.iter().all(|b| {
                        let overlap = (lo + w).min(b.hi_hz()) - lo.max(b.lo_hz());
                        overlap <= 1e-3
                    })
                })
                .collect();
            if candidates.is_empty() {
                continue 'attempt;
            }
            let lo = candidates[rng.random_range(0..candidates.len())];
            placed.push(BandSpec::from_edges(lo, lo + w));
        }
        return Ok(placed);
    }
    Err(HarnessError::PlacementFailed(occupancy_mhz))
}

/// Front-end plus recovery on one snapshot of lane samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotReport {
    pub estimate: SpectrumEstimate,
    pub noise_floor: f64,
    /// Detected FFT sections.
    pub detected_sections: BTreeSet<usize>,
    /// Detected subbands.
    pub detected_subbands: BTreeSet<usize>,
}

pub fn reconstruct_block(block: &LaneSampleBlock, decimation: usize, recovery: &RecoveryConfig) -> Result<SnapshotReport, HarnessError> {
    let pattern = block.pattern();
    let x = form_measurement(block, decimation)?;
    let a = SensingMatrix::new(pattern);
    let estimate = somp(&x, &a, recovery)?;
    let noise_floor = estimate_noise_floor(&x, &a, &estimate);
    let detected_sections = energy_detect(&estimate, noise_floor, recovery);
    let layout = SubbandLayout::new(pattern.grid_factor(), pattern.lane_rate_hz());
    let detected_subbands = detected_sections.iter().map(|&l| layout.subband_of_section(l)).collect();
    Ok(SnapshotReport {
        estimate,
        noise_floor,
        detected_sections,
        detected_subbands,
    })
}

/// Run one seeded trial end to end.
pub fn run_trial(config: &TrialConfig) -> Result<TrialResult, HarnessError> {
    config.validate()?;
    let layout = config.layout();
    let mut timing = StageTimings::default();

    let started = Instant::now();
    let bands = match &config.occupancy {
        Occupancy::Bands(b) => b.clone(),
        Occupancy::TotalMhz(mhz) => place_transmissions(*mhz, &layout, config.placement_grid_hz, config.seed)?,
    };
    let synth = SynthConfig::new(config.pattern.grid_factor(), config.pattern.lane_rate_hz(), config.window_len);
    let signal = synthesize_multiband(&bands, &synth, config.snr_db, config.seed)?;
    timing.synthesis = started.elapsed();

    let started = Instant::now();
    let mut block = apply_timing_jitter(
        &signal,
        &config.pattern,
        config.window_len,
        config.jitter_rms_s,
        config.seed ^ JITTER_SALT,
    )?;
    if let Some(link) = config.link {
        block = simulate_link_and_realign(&block, link.frame_len, link.max_latency_frames, config.seed ^ LINK_SALT)?.0;
    }
    timing.sampling = started.elapsed();

    let started = Instant::now();
    let x = form_measurement(&block, config.decimation)?;
    let a = SensingMatrix::new(&config.pattern);
    timing.frontend = started.elapsed();

    let started = Instant::now();
    let estimate = somp(&x, &a, &config.recovery)?;
    timing.recovery = started.elapsed();

    let started = Instant::now();
    let noise = estimate_noise_floor(&x, &a, &estimate);
    let detected: BTreeSet<usize> = energy_detect(&estimate, noise, &config.recovery)
        .into_iter()
        .map(|l| layout.subband_of_section(l))
        .collect();
    timing.detection = started.elapsed();

    let truth = signal.truth_support().clone();
    let score = detection_probability(&truth, &detected);
    Ok(TrialResult {
        truth,
        detected,
        detection_probability: score.probability,
        false_alarm_count: score.false_alarm_count,
        no_truth: score.no_truth,
        bands,
        timing,
    })
}

/// Run `trials` trials with seeds `base.seed + i` (in parallel).
pub fn run_trials(base: &TrialConfig, trials: usize) -> Result<Vec<TrialResult>, HarnessError> {
    (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut cfg = base.clone();
            cfg.seed = base.seed.wrapping_add(i);
            run_trial(&cfg)
        })
        .collect()
}

/// One point of a detection-probability curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub occupancy_mhz: f64,
    pub mean_pd: f64,
    /// 95% normal-approximation half-width of the mean.
    pub ci95: f64,
    pub trials: usize,
    pub snr_db: f64,
    /// Mean number of falsely detected subbands per trial.
    pub mean_false_alarms: f64,
}

/// Mean and 95% half-width of per-trial probabilities.
pub fn summarize(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

/// Detection probability versus occupancy.
pub fn sweep_occupancy(base: &TrialConfig, occupancies_mhz: &[f64], trials: usize) -> Result<Vec<CurvePoint>, HarnessError> {
    if trials == 0 {
        return Err(HarnessError::InvalidConfig("trials must be at least 1".into()));
    }
    let bandwidth_mhz = base.pattern.grid_rate_hz() / 1e6;
    if let Some(&bad) = occupancies_mhz.iter().find(|&&o| !(o >= 0.0) || o > bandwidth_mhz) {
        return Err(HarnessError::OccupancyTooLarge {
            occupancy_mhz: bad,
            bandwidth_mhz,
        });
    }
    occupancies_mhz
        .iter()
        .map(|&occ| {
            let mut cfg = base.clone();
            cfg.occupancy = Occupancy::TotalMhz(occ);
            let results = run_trials(&cfg, trials)?;
            let pd: Vec<f64> = results.iter().map(|r| r.detection_probability).collect();
            let (mean_pd, ci95) = summarize(&pd);
            let fa = results.iter().map(|r| r.false_alarm_count as f64).sum::<f64>() / trials as f64;
            Ok(CurvePoint {
                occupancy_mhz: occ,
                mean_pd,
                ci95,
                trials,
                snr_db: base.snr_db,
                mean_false_alarms: fa,
            })
        })
        .collect()
}

/// `occupancy_mhz,mean_pd,ci95,trials,snr_db` with one row per point.
pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("occupancy_mhz,mean_pd,ci95,trials,snr_db\n");
    for p in points {
        let _ = writeln!(out, "{},{},{},{},{}", p.occupancy_mhz, p.mean_pd, p.ci95, p.trials, p.snr_db);
    }
    out
}

/// Largest elementwise relative error between the delay-path and
/// offset-clock-path lane spectra over random signals and patterns.
pub fn verify_equivalence(trials: usize, window_len: usize, seed: u64) -> Result<f64, HarnessError> {
    if trials == 0 || window_len == 0 {
        return Err(HarnessError::InvalidConfig("trials and window length must be positive".into()));
    }
    let errors: Result<Vec<f64>, HarnessError> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i));
            let grid_factor = rng.random_range(4..=40usize);
            let lanes = rng.random_range(1..grid_factor.min(12));
            let pattern = generate_pattern(lanes, grid_factor, PatternStrategy::Random, rng.random(), 50e6)
                .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
            let layout = SubbandLayout::new(grid_factor, 50e6);
            let active = rng.random_range(1..=3usize.min(grid_factor));
            let bands: Vec<BandSpec> = rand::seq::index::sample(&mut rng, grid_factor, active)
                .into_iter()
                .map(|s| {
                    let (lo, hi) = layout.subband_interval(s);
                    BandSpec::from_edges(lo.max(-0.5 * layout.bandwidth_hz()), hi.min(0.5 * layout.bandwidth_hz()))
                })
                .collect();
            let synth = SynthConfig::new(grid_factor, 50e6, window_len);
            let signal = synthesize_multiband(&bands, &synth, 20.0, rng.random())?;
            let mcs = spectral_path_mcs(&signal, &pattern, window_len)?;
            let offset = spectral_path_gbsense(&signal, &pattern, window_len)?;
            Ok(offset.max_relative_error(&mcs))
        })
        .collect();
    Ok(errors?.into_iter().fold(0.0, f64::max))
}
