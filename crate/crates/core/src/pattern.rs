//! Multicoset sampling patterns and their sensing matrices.
//!
//! A pattern picks `P` of the `L` grid offsets inside one lane period `T`.
//! Lane `p` samples at `n·T + c_p·T/L`; the grid rate is `L·f_s`.
//!
//! Sign convention (fixed here, used everywhere): with the forward FFT
//! `Σ x[i] e^{-j2π n i/N}` and lane phase correction `e^{-j2π c_p n/(L N)}`,
//! the sensing matrix is `A[p][l] = e^{+j2π c_p l / L}` with `l` in natural
//! FFT-section order (section 0 holds DC up to `f_s`).

use crate::linalg::{inner, CMatrix};
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Per-lane sample rate of the reference hardware, 50 MHz.
pub const DEFAULT_LANE_RATE_HZ: f64 = 50e6;

/// Finest clock-offset step the reference clock tree can realise: half a
/// 2 GHz VCO period.
pub const HARDWARE_DELAY_STEP_S: f64 = 250e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PatternError {
    #[error("coset {0} appears more than once")]
    DuplicateCoset(i64),
    #[error("coset {coset} outside [0, {grid_factor})")]
    CosetOutOfRange { coset: i64, grid_factor: usize },
    #[error("cosets must be strictly increasing")]
    NotSorted,
    #[error("first coset must be 0, got {0}")]
    FirstCosetNonzero(i64),
    #[error("grid factor L={grid_factor} must exceed lane count P={num_lanes}")]
    TooFewLanes { num_lanes: usize, grid_factor: usize },
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("pattern file: {0}")]
    Parse(String),
}

/// Validated multicoset sampling pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPattern {
    grid_factor: usize,
    cosets: Vec<usize>,
    lane_rate_hz: f64,
}

impl SamplingPattern {
    /// Validate `(P, L, cosets, f_s)` and build a pattern.
    ///
    /// Checks run in a fixed order so the reported error is stable:
    /// lane count, grid factor, range, duplicates, ordering, zero first coset.
    pub fn new(num_lanes: usize, grid_factor: usize, cosets: &[i64], lane_rate_hz: f64) -> Result<Self, PatternError> {
        if num_lanes == 0 || cosets.len() != num_lanes {
            return Err(PatternError::InvalidDimensions(format!(
                "P={num_lanes} but {} cosets given",
                cosets.len()
            )));
        }
        if grid_factor <= num_lanes {
            return Err(PatternError::TooFewLanes { num_lanes, grid_factor });
        }
        if !(lane_rate_hz.is_finite() && lane_rate_hz > 0.0) {
            return Err(PatternError::InvalidDimensions(format!("lane rate {lane_rate_hz} Hz")));
        }
        if let Some(&c) = cosets.iter().find(|&&c| c < 0 || c >= grid_factor as i64) {
            return Err(PatternError::CosetOutOfRange { coset: c, grid_factor });
        }
        let mut seen = vec![false; grid_factor];
        for &c in cosets {
            if std::mem::replace(&mut seen[c as usize], true) {
                return Err(PatternError::DuplicateCoset(c));
            }
        }
        if cosets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PatternError::NotSorted);
        }
        if cosets[0] != 0 {
            return Err(PatternError::FirstCosetNonzero(cosets[0]));
        }
        Ok(Self {
            grid_factor,
            cosets: cosets.iter().map(|&c| c as usize).collect(),
            lane_rate_hz,
        })
    }

    /// Number of lanes `P`.
    pub fn num_lanes(&self) -> usize {
        self.cosets.len()
    }

    /// Grid factor `L` (also the number of subbands).
    pub fn grid_factor(&self) -> usize {
        self.grid_factor
    }

    pub fn cosets(&self) -> &[usize] {
        &self.cosets
    }

    /// Lane sample rate `f_s` in Hz.
    pub fn lane_rate_hz(&self) -> f64 {
        self.lane_rate_hz
    }

    /// Lane period `T = 1/f_s`.
    pub fn lane_period_s(&self) -> f64 {
        1.0 / self.lane_rate_hz
    }

    /// Nyquist-grid rate `L·f_s`.
    pub fn grid_rate_hz(&self) -> f64 {
        self.grid_factor as f64 * self.lane_rate_hz
    }

    /// Aggregate rate of all lanes, `P·f_s`.
    pub fn average_rate_hz(&self) -> f64 {
        self.num_lanes() as f64 * self.lane_rate_hz
    }

    /// Time offset of each lane, `c_p·T/L`.
    pub fn lane_offsets_s(&self) -> Vec<f64> {
        let step = self.lane_period_s() / self.grid_factor as f64;
        self.cosets.iter().map(|&c| c as f64 * step).collect()
    }

    /// Serialise as `key=value` lines.
    pub fn to_text(&self) -> String {
        let cosets: Vec<String> = self.cosets.iter().map(|c| c.to_string()).collect();
        format!(
            "P={}\nL={}\nfs_hz={}\ncosets={}\n",
            self.num_lanes(),
            self.grid_factor,
            self.lane_rate_hz,
            cosets.join(",")
        )
    }
}

impl fmt::Display for SamplingPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P={} L={} cosets={:?}", self.num_lanes(), self.grid_factor, self.cosets)
    }
}

impl FromStr for SamplingPattern {
    type Err = PatternError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = None;
        let mut l = None;
        let mut fs = DEFAULT_LANE_RATE_HZ;
        let mut cosets = None;
        for (lineno, raw) in s.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| PatternError::Parse(format!("line {}: {what}: {line:?}", lineno + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            let value = value.trim();
            match key.trim() {
                "P" => p = Some(value.parse::<usize>().map_err(|_| bad("bad P"))?),
                "L" => l = Some(value.parse::<usize>().map_err(|_| bad("bad L"))?),
                "fs_hz" => fs = value.parse::<f64>().map_err(|_| bad("bad fs_hz"))?,
                "cosets" => {
                    let parsed: Result<Vec<i64>, _> = value.split(',').map(|c| c.trim().parse::<i64>()).collect();
                    cosets = Some(parsed.map_err(|_| bad("bad cosets"))?);
                }
                other => return Err(bad(&format!("unknown key {other}"))),
            }
        }
        let cosets = cosets.ok_or_else(|| PatternError::Parse("missing cosets".into()))?;
        let l = l.ok_or_else(|| PatternError::Parse("missing L".into()))?;
        let p = p.unwrap_or(cosets.len());
        SamplingPattern::new(p, l, &cosets, fs)
    }
}

/// True iff every lane offset `c_p·T/L` lands on the 250 ps clock-step grid.
///
/// Advisory only; patterns failing it are still valid for simulation.
pub fn check_hardware_delay_grid(pattern: &SamplingPattern) -> bool {
    // offset step T/L must be an integer multiple of 250 ps; compare in
    // integer femtoseconds to avoid float-remainder noise.
    let step_fs = pattern.lane_period_s() / pattern.grid_factor() as f64 * 1e15;
    let unit_fs = HARDWARE_DELAY_STEP_S * 1e15;
    let ratio = step_fs / unit_fs;
    (ratio - ratio.round()).abs() < 1e-9 && ratio.round() >= 1.0
}

/// P×L sensing matrix `A[p][l] = e^{+j2π c_p l / L}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    entries: CMatrix,
    pattern: SamplingPattern,
}

impl SensingMatrix {
    pub fn new(pattern: &SamplingPattern) -> Self {
        let l_f = pattern.grid_factor() as f64;
        let entries = CMatrix::from_fn(pattern.num_lanes(), pattern.grid_factor(), |p, l| {
            // reduce the exponent mod L first so large products stay exact
            let k = (pattern.cosets()[p] * l) % pattern.grid_factor();
            Complex64::from_polar(1.0, 2.0 * PI * k as f64 / l_f)
        });
        Self {
            entries,
            pattern: pattern.clone(),
        }
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn pattern(&self) -> &SamplingPattern {
        &self.pattern
    }

    pub fn num_lanes(&self) -> usize {
        self.entries.rows()
    }

    pub fn num_sections(&self) -> usize {
        self.entries.cols()
    }
}

/// Largest normalised inner product between distinct columns,
/// `max_{i≠j} |⟨a_i, a_j⟩| / P`.
pub fn pattern_coherence(a: &SensingMatrix) -> f64 {
    let cols: Vec<Vec<Complex64>> = (0..a.num_sections()).map(|l| a.entries().column(l)).collect();
    let p = a.num_lanes() as f64;
    let mut worst = 0.0_f64;
    for i in 0..cols.len() {
        for j in i + 1..cols.len() {
            worst = worst.max(inner(&cols[i], &cols[j]).norm() / p);
        }
    }
    worst.min(1.0)
}

/// Coherence of the partial pattern defined by `cosets`, without validation.
///
/// Column correlations of a multicoset matrix depend only on the column
/// difference `Δ`, so this scans `Δ = 1..L-1` instead of all pairs.
fn coset_coherence(cosets: &[usize], grid_factor: usize) -> f64 {
    let p = cosets.len() as f64;
    (1..grid_factor)
        .map(|delta| {
            let s: Complex64 = cosets
                .iter()
                .map(|&c| Complex64::from_polar(1.0, 2.0 * PI * ((c * delta) % grid_factor) as f64 / grid_factor as f64))
                .sum();
            s.norm() / p
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternStrategy {
    /// Uniformly random distinct cosets (seeded).
    Random,
    /// Add cosets one at a time, each minimising the partial coherence.
    GreedyMinCoherence,
}

impl FromStr for PatternStrategy {
    type Err = PatternError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(Self::Random),
            "greedy" | "greedy_min_coherence" => Ok(Self::GreedyMinCoherence),
            other => Err(PatternError::Parse(format!("unknown strategy {other:?}"))),
        }
    }
}

impl fmt::Display for PatternStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Random => "random",
            Self::GreedyMinCoherence => "greedy_min_coherence",
        })
    }
}

/// Default P=8, L=40 pattern at 50 MHz lanes: the greedy minimum-coherence
/// choice, cosets `[0, 1, 5, 12, 14, 19, 22, 25]`.
pub fn reference_pattern() -> SamplingPattern {
    generate_pattern(8, 40, PatternStrategy::GreedyMinCoherence, 0, DEFAULT_LANE_RATE_HZ).expect("8 < 40")
}

/// Generate a valid pattern with `c_1 = 0` forced.
///
/// The greedy strategy is deterministic and ignores `seed`; ties go to the
/// smallest candidate coset.
pub fn generate_pattern(
    num_lanes: usize,
    grid_factor: usize,
    strategy: PatternStrategy,
    seed: u64,
    lane_rate_hz: f64,
) -> Result<SamplingPattern, PatternError> {
    if num_lanes == 0 || grid_factor <= num_lanes {
        return Err(PatternError::InvalidDimensions(format!(
            "need 1 <= P < L, got P={num_lanes} L={grid_factor}"
        )));
    }
    let mut cosets = vec![0usize];
    match strategy {
        PatternStrategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            cosets.extend(sample(&mut rng, grid_factor - 1, num_lanes - 1).into_iter().map(|c| c + 1));
        }
        PatternStrategy::GreedyMinCoherence => {
            let mut used = vec![false; grid_factor];
            used[0] = true;
            while cosets.len() < num_lanes {
                let mut best: Option<(f64, usize)> = None;
                for cand in 1..grid_factor {
                    if used[cand] {
                        continue;
                    }
                    cosets.push(cand);
                    let mu = coset_coherence(&cosets, grid_factor);
                    cosets.pop();
                    // strict improvement only, so the lowest index wins ties;
                    // a tiny slack absorbs rounding between equal scores
                    if best.is_none_or(|(b, _)| mu < b - 1e-12) {
                        best = Some((mu, cand));
                    }
                }
                let (_, pick) = best.expect("L > P leaves a free coset");
                used[pick] = true;
                cosets.push(pick);
            }
        }
    }
    cosets.sort_unstable();
    let as_i64: Vec<i64> = cosets.iter().map(|&c| c as i64).collect();
    SamplingPattern::new(num_lanes, grid_factor, &as_i64, lane_rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = DEFAULT_LANE_RATE_HZ;

    fn pat(p: usize, l: usize, c: &[i64]) -> SamplingPattern {
        SamplingPattern::new(p, l, c, FS).unwrap()
    }

    #[test]
    fn validates_reference_configuration() {
        let p = pat(8, 40, &[0, 1, 5, 9, 16, 22, 31, 38]);
        assert_eq!(p.num_lanes(), 8);
        assert_eq!(p.grid_rate_hz(), 2e9);
        assert_eq!(p.average_rate_hz(), 400e6);
    }

    #[test]
    fn validation_errors() {
        assert_eq!(
            SamplingPattern::new(2, 2, &[0, 1], FS),
            Err(PatternError::TooFewLanes { num_lanes: 2, grid_factor: 2 })
        );
        assert_eq!(SamplingPattern::new(3, 8, &[0, 2, 2], FS), Err(PatternError::DuplicateCoset(2)));
        assert_eq!(SamplingPattern::new(3, 8, &[0, 5, 2], FS), Err(PatternError::NotSorted));
        assert_eq!(SamplingPattern::new(3, 8, &[1, 2, 5], FS), Err(PatternError::FirstCosetNonzero(1)));
        assert_eq!(
            SamplingPattern::new(3, 8, &[0, 2, 8], FS),
            Err(PatternError::CosetOutOfRange { coset: 8, grid_factor: 8 })
        );
        assert_eq!(
            SamplingPattern::new(3, 8, &[0, -1, 2], FS),
            Err(PatternError::CosetOutOfRange { coset: -1, grid_factor: 8 })
        );
        assert!(matches!(SamplingPattern::new(3, 8, &[0, 1], FS), Err(PatternError::InvalidDimensions(_))));
    }

    #[test]
    fn hardware_grid_examples() {
        assert!(check_hardware_delay_grid(&pat(2, 40, &[0, 3])));
        assert!(check_hardware_delay_grid(&pat(2, 80, &[0, 3])));
        assert!(!check_hardware_delay_grid(&pat(2, 33, &[0, 3])));
    }

    #[test]
    fn sensing_matrix_small_case() {
        let a = SensingMatrix::new(&pat(2, 4, &[0, 1]));
        let e = a.entries();
        for l in 0..4 {
            assert!((e[(0, l)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
        let expected = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        for (l, &(re, im)) in expected.iter().enumerate() {
            assert!((e[(1, l)] - Complex64::new(re, im)).norm() < 1e-12, "l={l}");
        }
    }

    #[test]
    fn sensing_matrix_unit_modulus() {
        let a = SensingMatrix::new(&pat(8, 40, &[0, 1, 5, 9, 16, 22, 31, 38]));
        assert_eq!(a.entries().as_slice().len(), 320);
        for z in a.entries().as_slice() {
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
        for p in 0..8 {
            assert_eq!(a.entries()[(p, 0)], Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn coherence_examples() {
        let full = SensingMatrix::new(&SamplingPattern::new(4, 5, &[0, 1, 2, 3], FS).unwrap());
        assert!(pattern_coherence(&full) < 1.0);
        let degenerate = SensingMatrix::new(&pat(2, 4, &[0, 2]));
        assert!((pattern_coherence(&degenerate) - 1.0).abs() < 1e-12);

        let consecutive = SensingMatrix::new(&pat(8, 40, &[0, 1, 2, 3, 4, 5, 6, 7]));
        // Dirichlet kernel |sin(8x/2)/sin(x/2)|/8 at x = 2π/40
        let x = 2.0 * PI / 40.0;
        let dirichlet = ((8.0 * x / 2.0).sin() / (x / 2.0).sin()).abs() / 8.0;
        assert!((pattern_coherence(&consecutive) - dirichlet).abs() < 1e-12);
        assert!((dirichlet - 0.936_46).abs() < 1e-4);
    }

    #[test]
    fn coherence_zero_for_full_dft() {
        // P = L is not a valid pattern, so exercise the column scan directly.
        let cosets: Vec<usize> = (0..6).collect();
        assert!(coset_coherence(&cosets, 6) < 1e-12);
    }

    #[test]
    fn coset_scan_matches_pairwise_scan() {
        let p = pat(5, 17, &[0, 2, 3, 9, 14]);
        let a = SensingMatrix::new(&p);
        assert!((coset_coherence(p.cosets(), 17) - pattern_coherence(&a)).abs() < 1e-12);
    }

    #[test]
    fn generator_edge_cases() {
        for s in [PatternStrategy::Random, PatternStrategy::GreedyMinCoherence] {
            assert_eq!(generate_pattern(1, 2, s, 3, FS).unwrap().cosets(), &[0]);
        }
        let a = generate_pattern(8, 40, PatternStrategy::Random, 7, FS).unwrap();
        let b = generate_pattern(8, 40, PatternStrategy::Random, 7, FS).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            generate_pattern(4, 4, PatternStrategy::Random, 0, FS),
            Err(PatternError::InvalidDimensions(_))
        ));
    }

    #[test]
    fn greedy_beats_consecutive_on_small_grid() {
        let greedy = generate_pattern(4, 8, PatternStrategy::GreedyMinCoherence, 0, FS).unwrap();
        let mu_greedy = pattern_coherence(&SensingMatrix::new(&greedy));
        let mu_consecutive = pattern_coherence(&SensingMatrix::new(&pat(4, 8, &[0, 1, 2, 3])));
        assert!(mu_greedy <= mu_consecutive + 1e-12);

        // exhaustive oracle over all C(7,3) completions of {0}
        let mut best = f64::INFINITY;
        for a in 1..8 {
            for b in a + 1..8 {
                for c in b + 1..8 {
                    best = best.min(coset_coherence(&[0, a, b, c], 8));
                }
            }
        }
        assert!(best <= mu_greedy + 1e-12);
        assert!(mu_consecutive >= best);
    }

    #[test]
    fn text_round_trip() {
        let p = pat(8, 40, &[0, 1, 5, 9, 16, 22, 31, 38]);
        let back: SamplingPattern = p.to_text().parse().unwrap();
        assert_eq!(back, p);
        assert!("L=8\ncosets=0,x".parse::<SamplingPattern>().is_err());
        assert!(matches!("P=2\nL=4\ncosets=0,0".parse::<SamplingPattern>(), Err(PatternError::DuplicateCoset(0))));
    }

    #[test]
    fn reference_pattern_is_pinned() {
        let p = reference_pattern();
        assert_eq!(p.cosets(), &[0, 1, 5, 12, 14, 19, 22, 25]);
        assert!(check_hardware_delay_grid(&p));
        assert!((pattern_coherence(&SensingMatrix::new(&p)) - 0.426776695).abs() < 1e-8);
    }
}
