//! Sparse multiband test signals on the Nyquist grid.
//!
//! Signals are complex baseband sequences at the grid rate `L·f_s` covering
//! `[-L·f_s/2, L·f_s/2)`. The band is cut into `L` subbands of width `f_s`;
//! subband `s` spans `[(s - ⌊L/2⌋)·f_s, (s - ⌊L/2⌋ + 1)·f_s)`, taken modulo
//! `L·f_s` (only relevant for odd `L`, where the top subband wraps).

use crate::dsp;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::collections::BTreeSet;

/// Overlaps shorter than this fraction of a subband count as touching.
const MEASURE_ZERO: f64 = 1e-9;

/// Salt separating the noise stream from the band-content stream.
const NOISE_STREAM: u64 = 0x6e6f_6973_655f_7331;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SignalError {
    #[error("bands {0} and {1} overlap")]
    OverlappingBands(usize, usize),
    #[error("band {index} ({lo_hz} Hz .. {hi_hz} Hz) lies outside the instantaneous bandwidth")]
    BandOutOfRange { index: usize, lo_hz: f64, hi_hz: f64 },
    #[error("band {0} has non-positive width")]
    EmptyBand(usize),
    #[error("signal has zero power; SNR is undefined")]
    ZeroSignalPower,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// One occupied frequency interval `[center - width/2, center + width/2)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BandSpec {
    pub center_hz: f64,
    pub width_hz: f64,
}

impl BandSpec {
    pub fn new(center_hz: f64, width_hz: f64) -> Self {
        Self { center_hz, width_hz }
    }

    /// Band with the given lower edge.
    pub fn from_edges(lo_hz: f64, hi_hz: f64) -> Self {
        Self {
            center_hz: 0.5 * (lo_hz + hi_hz),
            width_hz: hi_hz - lo_hz,
        }
    }

    pub fn lo_hz(&self) -> f64 {
        self.center_hz - 0.5 * self.width_hz
    }

    pub fn hi_hz(&self) -> f64 {
        self.center_hz + 0.5 * self.width_hz
    }
}

/// Geometry of the subband split: `L` subbands of `f_s` each.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubbandLayout {
    pub grid_factor: usize,
    pub lane_rate_hz: f64,
}

impl SubbandLayout {
    pub fn new(grid_factor: usize, lane_rate_hz: f64) -> Self {
        Self {
            grid_factor,
            lane_rate_hz,
        }
    }

    fn half(&self) -> usize {
        self.grid_factor / 2
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.grid_factor as f64 * self.lane_rate_hz
    }

    /// Frequency interval of subband `s` on the baseband axis.
    pub fn subband_interval(&self, s: usize) -> (f64, f64) {
        let lo = (s as f64 - self.half() as f64) * self.lane_rate_hz;
        (lo, lo + self.lane_rate_hz)
    }

    /// FFT section (row of the spectrum matrix) holding subband `s`.
    pub fn section_of_subband(&self, s: usize) -> usize {
        (s + self.grid_factor - self.half()) % self.grid_factor
    }

    /// Inverse of [`section_of_subband`](Self::section_of_subband).
    pub fn subband_of_section(&self, l: usize) -> usize {
        (l + self.half()) % self.grid_factor
    }

    /// Subband containing frequency `f` (taken modulo the full bandwidth).
    pub fn subband_of_frequency(&self, f: f64) -> usize {
        let steps = (f / self.lane_rate_hz).floor() as i64 + self.half() as i64;
        steps.rem_euclid(self.grid_factor as i64) as usize
    }

    fn check_band(&self, index: usize, band: &BandSpec) -> Result<(), SignalError> {
        if !(band.width_hz > 0.0) {
            return Err(SignalError::EmptyBand(index));
        }
        let edge = 0.5 * self.bandwidth_hz();
        let slack = MEASURE_ZERO * self.lane_rate_hz;
        if band.lo_hz() < -edge - slack || band.hi_hz() > edge + slack {
            return Err(SignalError::BandOutOfRange {
                index,
                lo_hz: band.lo_hz(),
                hi_hz: band.hi_hz(),
            });
        }
        Ok(())
    }

    /// Positive-measure overlap of `[lo, hi)` with subband `s`, modulo the bandwidth.
    fn overlap(&self, s: usize, lo: f64, hi: f64) -> f64 {
        let (a, b) = self.subband_interval(s);
        let span = self.bandwidth_hz();
        [-span, 0.0, span]
            .iter()
            .map(|shift| (hi.min(b + shift) - lo.max(a + shift)).max(0.0))
            .sum()
    }
}

/// Subbands overlapped (with nonzero measure) by any of `bands`.
pub fn ground_truth_support(bands: &[BandSpec], layout: &SubbandLayout) -> Result<BTreeSet<usize>, SignalError> {
    let mut out = BTreeSet::new();
    for (i, band) in bands.iter().enumerate() {
        layout.check_band(i, band)?;
        for s in 0..layout.grid_factor {
            if layout.overlap(s, band.lo_hz(), band.hi_hz()) > MEASURE_ZERO * layout.lane_rate_hz {
                out.insert(s);
            }
        }
    }
    Ok(out)
}

/// Complex samples on the Nyquist grid plus the occupied subbands.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSignal {
    samples: Vec<Complex64>,
    grid_rate_hz: f64,
    truth_support: BTreeSet<usize>,
}

impl GridSignal {
    pub fn new(samples: Vec<Complex64>, grid_rate_hz: f64, truth_support: BTreeSet<usize>) -> Self {
        Self {
            samples,
            grid_rate_hz,
            truth_support,
        }
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn grid_rate_hz(&self) -> f64 {
        self.grid_rate_hz
    }

    pub fn truth_support(&self) -> &BTreeSet<usize> {
        &self.truth_support
    }

    pub fn mean_power(&self) -> f64 {
        dsp::mean_power(&self.samples)
    }

    /// Linear combination `a·self + b·other` (truth supports are merged).
    pub fn combine(&self, a: Complex64, other: &GridSignal, b: Complex64) -> GridSignal {
        assert_eq!(self.len(), other.len());
        let samples = self.samples.iter().zip(&other.samples).map(|(x, y)| a * x + b * y).collect();
        GridSignal {
            samples,
            grid_rate_hz: self.grid_rate_hz,
            truth_support: self.truth_support.union(&other.truth_support).copied().collect(),
        }
    }
}

/// Grid geometry and window length for synthesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub layout: SubbandLayout,
    /// Samples per lane `N`; the grid signal has `N·L` samples.
    pub window_len: usize,
}

impl SynthConfig {
    pub fn new(grid_factor: usize, lane_rate_hz: f64, window_len: usize) -> Self {
        Self {
            layout: SubbandLayout::new(grid_factor, lane_rate_hz),
            window_len,
        }
    }

    pub fn grid_len(&self) -> usize {
        self.window_len * self.layout.grid_factor
    }

    /// Spacing of the full-grid FFT bins, `f_s/N`.
    pub fn bin_spacing_hz(&self) -> f64 {
        self.layout.lane_rate_hz / self.window_len as f64
    }

    /// Natural-order FFT bins whose frequency falls inside `[lo, hi)`.
    fn band_bins(&self, band: &BandSpec) -> Vec<usize> {
        let m = self.grid_len() as i64;
        let df = self.bin_spacing_hz();
        let first = (band.lo_hz() / df - MEASURE_ZERO).ceil() as i64;
        let end = (band.hi_hz() / df - MEASURE_ZERO).ceil() as i64;
        (first..end).map(|k| k.rem_euclid(m) as usize).collect()
    }
}

fn check_disjoint(bands: &[BandSpec], layout: &SubbandLayout) -> Result<(), SignalError> {
    let slack = MEASURE_ZERO * layout.lane_rate_hz;
    for i in 0..bands.len() {
        for j in i + 1..bands.len() {
            let overlap = bands[i].hi_hz().min(bands[j].hi_hz()) - bands[i].lo_hz().max(bands[j].lo_hz());
            if overlap > slack {
                return Err(SignalError::OverlappingBands(i, j));
            }
        }
    }
    Ok(())
}

/// Flat-spectrum multiband signal: i.i.d. complex Gaussian coefficients on
/// every grid bin inside a band, inverse-transformed and scaled to unit mean
/// power. White noise is then added at `snr_db` (total signal power over
/// total noise power); pass `f64::INFINITY` for a noiseless signal.
///
/// With no bands the result is pure noise at a reference power of 1.
pub fn synthesize_multiband(
    bands: &[BandSpec],
    config: &SynthConfig,
    snr_db: f64,
    seed: u64,
) -> Result<GridSignal, SignalError> {
    if config.window_len == 0 || config.layout.grid_factor == 0 {
        return Err(SignalError::InvalidConfig("empty window".into()));
    }
    let truth = ground_truth_support(bands, &config.layout)?;
    check_disjoint(bands, &config.layout)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spectrum = vec![Complex64::new(0.0, 0.0); config.grid_len()];
    for band in bands {
        for k in config.band_bins(band) {
            spectrum[k] = complex_gaussian(&mut rng, 1.0);
        }
    }
    let mut samples = dsp::ifft(&spectrum);
    let power = dsp::mean_power(&samples);
    if power > 0.0 {
        let scale = power.sqrt().recip();
        samples.iter_mut().for_each(|z| *z *= scale);
    }
    let grid_rate = config.layout.bandwidth_hz();
    let clean = GridSignal::new(samples, grid_rate, truth);
    if snr_db == f64::INFINITY {
        return Ok(clean);
    }
    // band content is normalised to unit power, which doubles as the
    // reference when there is no band content at all
    Ok(with_noise(clean, 1.0, snr_db, seed ^ NOISE_STREAM))
}

/// Single complex tone `amplitude·e^{j2π f t}` on the grid.
pub fn synthesize_tone(freq_hz: f64, amplitude: f64, config: &SynthConfig) -> GridSignal {
    let grid_rate = config.layout.bandwidth_hz();
    let samples = (0..config.grid_len())
        .map(|m| Complex64::from_polar(amplitude, 2.0 * std::f64::consts::PI * freq_hz * m as f64 / grid_rate))
        .collect();
    let truth = BTreeSet::from([config.layout.subband_of_frequency(freq_hz)]);
    GridSignal::new(samples, grid_rate, truth)
}

/// Add circular white Gaussian noise with per-sample variance
/// `signal_power / 10^(snr_db/10)`. `snr_db = +∞` returns the input unchanged.
pub fn add_noise(signal: &GridSignal, snr_db: f64, seed: u64) -> Result<GridSignal, SignalError> {
    if snr_db == f64::INFINITY {
        return Ok(signal.clone());
    }
    let power = signal.mean_power();
    if !(power > 0.0) {
        return Err(SignalError::ZeroSignalPower);
    }
    Ok(with_noise(signal.clone(), power, snr_db, seed))
}

fn with_noise(mut signal: GridSignal, reference_power: f64, snr_db: f64, seed: u64) -> GridSignal {
    let variance = reference_power / 10f64.powf(snr_db / 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for z in signal.samples.iter_mut() {
        *z += complex_gaussian(&mut rng, variance);
    }
    signal
}

/// Circular complex Gaussian with total variance `variance`.
pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 50e6;

    fn default_layout() -> SubbandLayout {
        SubbandLayout::new(40, FS)
    }

    #[test]
    fn layout_index_arithmetic() {
        let lay = default_layout();
        assert_eq!(lay.subband_interval(20), (0.0, 50e6));
        assert_eq!(lay.subband_interval(0), (-1e9, -950e6));
        assert_eq!(lay.section_of_subband(20), 0);
        assert_eq!(lay.section_of_subband(0), 20);
        for s in 0..40 {
            assert_eq!(lay.subband_of_section(lay.section_of_subband(s)), s);
            // matches floor((f + L f_s / 2) / f_s) for even L
            let (lo, _) = lay.subband_interval(s);
            assert_eq!(((lo + 1e6 + 1e9) / FS).floor() as usize, s);
            assert_eq!(lay.subband_of_frequency(lo + 1e6), s);
        }
    }

    #[test]
    fn truth_for_aligned_and_straddling_bands() {
        let lay = default_layout();
        let dc = ground_truth_support(&[BandSpec::from_edges(0.0, 50e6)], &lay).unwrap();
        assert_eq!(dc, BTreeSet::from([20]));
        // a 50 MHz band centred on DC straddles the boundary at 0 Hz
        let centred = ground_truth_support(&[BandSpec::new(0.0, 50e6)], &lay).unwrap();
        assert_eq!(centred, BTreeSet::from([19, 20]));
        // 100 MHz band shifted 10 MHz off the subband grid
        let straddle = ground_truth_support(&[BandSpec::from_edges(10e6, 110e6)], &lay).unwrap();
        assert_eq!(straddle, BTreeSet::from([20, 21, 22]));
        // edges touching subband boundaries do not activate neighbours
        let touching = ground_truth_support(&[BandSpec::from_edges(100e6, 200e6)], &lay).unwrap();
        assert_eq!(touching, BTreeSet::from([22, 23]));
    }

    #[test]
    fn truth_rejects_out_of_range() {
        let lay = default_layout();
        let err = ground_truth_support(&[BandSpec::from_edges(950e6, 1050e6)], &lay).unwrap_err();
        assert!(matches!(err, SignalError::BandOutOfRange { index: 0, .. }));
        assert!(ground_truth_support(&[BandSpec::from_edges(-1e9, -900e6)], &lay).is_ok());
        assert!(ground_truth_support(&[BandSpec::from_edges(900e6, 1e9)], &lay).is_ok());
    }

    #[test]
    fn odd_grid_factor_wraps_top_subband() {
        let lay = SubbandLayout::new(5, 10.0);
        // subband 4 spans [20, 30), i.e. [20, 25) ∪ [-25, -20) after wrapping
        let s = ground_truth_support(&[BandSpec::from_edges(-25.0, -21.0)], &lay).unwrap();
        assert_eq!(s, BTreeSet::from([4]));
        let s = ground_truth_support(&[BandSpec::from_edges(-25.0, -15.0)], &lay).unwrap();
        assert_eq!(s, BTreeSet::from([0, 4]));
        let s = ground_truth_support(&[BandSpec::from_edges(15.0, 25.0)], &lay).unwrap();
        assert_eq!(s, BTreeSet::from([3, 4]));
    }

    #[test]
    fn empty_band_list_is_pure_noise() {
        let cfg = SynthConfig::new(40, FS, 64);
        let sig = synthesize_multiband(&[], &cfg, 10.0, 1).unwrap();
        assert!(sig.truth_support().is_empty());
        assert_eq!(sig.len(), 64 * 40);
        assert!((sig.mean_power() - 0.1).abs() < 0.01);
    }

    #[test]
    fn four_transmissions_occupy_eight_subbands() {
        let cfg = SynthConfig::new(40, FS, 256);
        let bands: Vec<BandSpec> = [-800e6, -300e6, 100e6, 600e6].iter().map(|&lo| BandSpec::from_edges(lo, lo + 100e6)).collect();
        let sig = synthesize_multiband(&bands, &cfg, 10.0, 3).unwrap();
        assert_eq!(sig.truth_support().len(), 8);
    }

    #[test]
    fn overlapping_bands_rejected() {
        let cfg = SynthConfig::new(40, FS, 64);
        let bands = [BandSpec::from_edges(0.0, 100e6), BandSpec::from_edges(90e6, 190e6)];
        assert_eq!(synthesize_multiband(&bands, &cfg, 10.0, 0), Err(SignalError::OverlappingBands(0, 1)));
        let touching = [BandSpec::from_edges(0.0, 100e6), BandSpec::from_edges(100e6, 200e6)];
        assert!(synthesize_multiband(&touching, &cfg, 10.0, 0).is_ok());
    }

    #[test]
    fn noiseless_energy_stays_in_truth_subbands() {
        let cfg = SynthConfig::new(40, FS, 1024);
        let bands = [BandSpec::from_edges(-130e6, -30e6), BandSpec::from_edges(420e6, 520e6)];
        let sig = synthesize_multiband(&bands, &cfg, f64::INFINITY, 9).unwrap();
        let spec = dsp::fft(sig.samples());
        let df = cfg.bin_spacing_hz();
        let n = spec.len();
        let (mut inside, mut total) = (0.0, 0.0);
        for (k, z) in spec.iter().enumerate() {
            let f = if k < n / 2 { k as f64 * df } else { (k as f64 - n as f64) * df };
            let e = z.norm_sqr();
            total += e;
            if sig.truth_support().contains(&cfg.layout.subband_of_frequency(f)) {
                inside += e;
            }
        }
        assert!(inside / total >= 0.99);
        // time/frequency Parseval
        let time: f64 = sig.samples().iter().map(|z| z.norm_sqr()).sum();
        assert!((total / n as f64 - time).abs() / time < 1e-9);
        assert!((sig.mean_power() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn add_noise_behaviour() {
        let cfg = SynthConfig::new(8, FS, 1024);
        let clean = synthesize_multiband(&[BandSpec::from_edges(0.0, 50e6)], &cfg, f64::INFINITY, 5).unwrap();
        assert_eq!(add_noise(&clean, f64::INFINITY, 1).unwrap(), clean);

        let noisy = add_noise(&clean, 0.0, 11).unwrap();
        let noise: Vec<Complex64> = noisy.samples().iter().zip(clean.samples()).map(|(a, b)| a - b).collect();
        let ratio = clean.mean_power() / dsp::mean_power(&noise);
        assert!((0.95..=1.05).contains(&ratio), "ratio {ratio}");
        assert_eq!(noisy.truth_support(), clean.truth_support());
        assert_eq!(add_noise(&clean, 0.0, 11).unwrap(), noisy);

        let silent = GridSignal::new(vec![Complex64::new(0.0, 0.0); 16], 1.0, BTreeSet::new());
        assert_eq!(add_noise(&silent, 3.0, 0), Err(SignalError::ZeroSignalPower));
    }

    #[test]
    fn tone_lands_in_its_subband() {
        let cfg = SynthConfig::new(40, FS, 32);
        let t = synthesize_tone(-120e6, 1.0, &cfg);
        assert_eq!(t.truth_support(), &BTreeSet::from([17]));
    }
}
