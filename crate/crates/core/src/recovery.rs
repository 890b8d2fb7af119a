//! Joint-sparse spectrum recovery from `X = A Θ`.
//!
//! Simultaneous orthogonal matching pursuit picks one spectrum section per
//! iteration (the column of `A` most correlated with the residual across
//! all bins), refits every selected row by least squares and repeats. The
//! columns of `A` all have norm `√P`, so correlations are compared as-is.
//! Energy detection then keeps the selected sections whose recovered
//! energy clears `γ` times a noise reference.
//!
//! All indices here are FFT-section indices (rows of `Θ`, columns of `A`).

use crate::frontend::MeasurementMatrix;
use crate::linalg::{CMatrix, IncrementalQr};
use crate::pattern::SensingMatrix;
use crate::signal::SubbandLayout;
use std::collections::BTreeSet;
use std::fmt::Write as _;

/// Columns whose orthogonal remainder falls below this fraction of their
/// norm are treated as linearly dependent on the current support.
const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RecoveryError {
    #[error("dimension mismatch: X has {x_rows} rows, A has {a_rows}")]
    DimensionMismatch { x_rows: usize, a_rows: usize },
    #[error("section {section} is linearly dependent on the selected support {support:?}")]
    RankDeficientSupport { section: usize, support: Vec<usize> },
    #[error("invalid recovery configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RecoveryConfig {
    /// Iteration cap; the recovered support never exceeds it.
    pub max_support: usize,
    /// Stop once `‖R‖_F / ‖X‖_F` drops to this value.
    pub residual_tol: f64,
    /// Energy-detection factor `γ`.
    pub ed_threshold_factor: f64,
}

impl RecoveryConfig {
    /// Defaults for a `P`-lane pattern: `max_support = ⌊P/2⌋`,
    /// `residual_tol = 1e-6`, `γ = 2`.
    pub fn for_lanes(num_lanes: usize) -> Self {
        Self {
            max_support: (num_lanes / 2).max(1),
            residual_tol: 1e-6,
            ed_threshold_factor: 2.0,
        }
    }

    pub fn validate(&self, num_lanes: usize) -> Result<(), RecoveryError> {
        if self.max_support == 0 || self.max_support > num_lanes {
            return Err(RecoveryError::InvalidConfig(format!(
                "max_support {} must lie in 1..={num_lanes}",
                self.max_support
            )));
        }
        if !(self.residual_tol >= 0.0) {
            return Err(RecoveryError::InvalidConfig(format!("residual_tol {}", self.residual_tol)));
        }
        if !(self.ed_threshold_factor > 0.0) {
            return Err(RecoveryError::InvalidConfig(format!("gamma {}", self.ed_threshold_factor)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    /// Selected sections in selection order.
    pub selection_order: Vec<usize>,
    /// L×N′ recovered sections; rows outside the support are zero.
    pub theta: CMatrix,
    /// Squared norm of each row of `theta`.
    pub subband_energy: Vec<f64>,
    /// `‖X − A Θ‖_F` at termination.
    pub residual_norm: f64,
}

impl SpectrumEstimate {
    pub fn support(&self) -> BTreeSet<usize> {
        self.selection_order.iter().copied().collect()
    }
}

/// SOMP on typed inputs.
pub fn somp(x: &MeasurementMatrix, a: &SensingMatrix, config: &RecoveryConfig) -> Result<SpectrumEstimate, RecoveryError> {
    somp_matrices(x.entries(), a.entries(), config)
}

/// SOMP on raw matrices (`x` is P×N′, `a` is P×L).
pub fn somp_matrices(x: &CMatrix, a: &CMatrix, config: &RecoveryConfig) -> Result<SpectrumEstimate, RecoveryError> {
    let p = a.rows();
    if x.rows() != p {
        return Err(RecoveryError::DimensionMismatch {
            x_rows: x.rows(),
            a_rows: p,
        });
    }
    config.validate(p)?;
    let sections = a.cols();
    let bins = x.cols();
    let x_norm = x.frobenius_norm();

    let columns: Vec<Vec<_>> = (0..sections).map(|l| a.column(l)).collect();
    let a_adj = a.adjoint();
    let mut qr = IncrementalQr::new(p);
    let mut order: Vec<usize> = Vec::new();
    let mut selected = vec![false; sections];
    let mut residual = x.clone();
    let mut coeffs = CMatrix::zeros(0, bins);

    while order.len() < config.max_support && residual.frobenius_norm() > config.residual_tol * x_norm {
        if x_norm == 0.0 {
            break;
        }
        // ‖A_l^H R‖² for every section
        let corr = a_adj.matmul(&residual);
        let mut best: Option<(f64, usize)> = None;
        for l in (0..sections).filter(|&l| !selected[l]) {
            let score: f64 = corr.row(l).iter().map(|z| z.norm_sqr()).sum();
            if best.is_none_or(|(b, _)| score > b) {
                best = Some((score, l));
            }
        }
        let Some((_, pick)) = best else { break };
        if !qr.push(&columns[pick], RANK_TOL) {
            return Err(RecoveryError::RankDeficientSupport {
                section: pick,
                support: order,
            });
        }
        selected[pick] = true;
        order.push(pick);
        coeffs = qr.solve(x);
        residual = x.sub(&a.select_columns(&order).matmul(&coeffs));
    }

    let mut theta = CMatrix::zeros(sections, bins);
    for (row, &l) in order.iter().enumerate() {
        theta.row_mut(l).copy_from_slice(coeffs.row(row));
    }
    let subband_energy = (0..sections)
        .map(|l| theta.row(l).iter().map(|z| z.norm_sqr()).sum())
        .collect();
    Ok(SpectrumEstimate {
        selection_order: order,
        theta,
        subband_energy,
        residual_norm: residual.frobenius_norm(),
    })
}

/// Sections in the support whose energy exceeds `γ · noise_energy_per_subband`.
pub fn energy_detect(estimate: &SpectrumEstimate, noise_energy_per_subband: f64, config: &RecoveryConfig) -> BTreeSet<usize> {
    let threshold = config.ed_threshold_factor * noise_energy_per_subband.max(0.0);
    estimate
        .selection_order
        .iter()
        .copied()
        .filter(|&l| estimate.subband_energy[l] > threshold)
        .collect()
}

/// Residual energy after recovery spread over the unselected sections,
/// `‖X − A Θ‖_F² / (L − |S|)`.
pub fn estimate_noise_floor(x: &MeasurementMatrix, a: &SensingMatrix, estimate: &SpectrumEstimate) -> f64 {
    let residual = x.entries().sub(&a.entries().matmul(&estimate.theta));
    let free = a.num_sections().saturating_sub(estimate.selection_order.len()).max(1);
    residual.frobenius_norm_sqr() / free as f64
}

/// Per-subband report, rows ordered by subband index:
/// `subband,energy,detected`.
pub fn estimate_csv(estimate: &SpectrumEstimate, detected_sections: &BTreeSet<usize>, layout: &SubbandLayout) -> String {
    let mut out = String::from("subband,energy,detected\n");
    for s in 0..layout.grid_factor {
        let l = layout.section_of_subband(s);
        let _ = writeln!(
            out,
            "{s},{:e},{}",
            estimate.subband_energy[l],
            u8::from(detected_sections.contains(&l))
        );
    }
    out
}
