//! Multicoset (periodic nonuniform) sub-Nyquist spectrum sensing.
//!
//! The crate simulates a time-interleaved multicoset sampler and the
//! digital chain behind it:
//!
//! ```text
//! signal ─► sampler ─► frontend ─► recovery ─► harness
//! (grid)    (P lanes)  (X = AΘ)    (SOMP+ED)   (Monte-Carlo)
//! ```
//!
//! - [`pattern`]: sampling patterns and sensing matrices
//! - [`signal`]: sparse multiband test signals with ground truth
//! - [`sampler`]: coset extraction, architecture models, jitter, link realignment
//! - [`frontend`]: decimation by folding and the measurement matrix
//! - [`recovery`]: SOMP and energy detection
//! - [`harness`]: trials, detection probability and sweeps
//! - [`container`]: the binary IQ file format

pub mod container;
pub mod dsp;
pub mod frontend;
pub mod harness;
pub mod linalg;
pub mod pattern;
pub mod recovery;
pub mod sampler;
pub mod signal;

pub use num_complex::Complex64;

pub use frontend::{decimate_fold, form_measurement, MeasurementMatrix};
pub use harness::{
    detection_probability, reconstruct_block, run_trial, run_trials, sweep_occupancy, verify_equivalence, CurvePoint, HarnessError, Occupancy,
    TrialConfig, TrialResult,
};
pub use linalg::CMatrix;
pub use pattern::{check_hardware_delay_grid, generate_pattern, pattern_coherence, reference_pattern, PatternStrategy, SamplingPattern, SensingMatrix};
pub use recovery::{energy_detect, estimate_noise_floor, somp, RecoveryConfig, SpectrumEstimate};
pub use sampler::{apply_timing_jitter, extract_lane_samples, simulate_link_and_realign, LaneSampleBlock};
pub use signal::{add_noise, ground_truth_support, synthesize_multiband, BandSpec, GridSignal, SubbandLayout, SynthConfig};
