use serde::{Deserialize, Serialize};

use super::linalg::singular_values;
use super::tucker::check_ranks;
use super::{DenseTensor, TuckerTensor};
use crate::error::{Error, Result};

/// Per-mode spectra of a tensor at a declared Tucker rank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    /// All singular values of every matricization, non-increasing.
    pub singular_values: Vec<Vec<f64>>,
    /// `min_j σ_{r_j}(M_j(t))`
    pub lambda_min: f64,
    /// `max_j σ_1(M_j(t))`
    pub lambda_max: f64,
    pub kappa0: f64,
}

/// `√d* · ‖t‖_ℓ∞ / ‖t‖_F`, which lies in `[1, √d*]`.
pub fn spikiness(t: &DenseTensor) -> Result<f64> {
    let norm = t.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::ZeroTensor);
    }
    Ok((t.shape().numel() as f64).sqrt() * t.max_abs() / norm)
}

/// `μ0 = max_j max_i ‖e_iᵀU_j‖² · d_j / r_j`.
pub fn incoherence(tk: &TuckerTensor) -> f64 {
    tk.factors()
        .iter()
        .map(|u| {
            let scale = u.nrows() as f64 / u.ncols() as f64;
            u.row_iter().map(|row| row.norm_squared()).fold(0.0, f64::max) * scale
        })
        .fold(0.0, f64::max)
}

pub fn spectral_summary(t: &DenseTensor, r: &[usize]) -> Result<SpectralSummary> {
    check_ranks(t.shape(), r)?;
    let mut spectra = Vec::with_capacity(r.len());
    let mut lambda_min = f64::INFINITY;
    let mut lambda_max: f64 = 0.0;
    for (mode, &rj) in r.iter().enumerate() {
        let s = singular_values(&t.matricize(mode)?);
        if rj > s.len() {
            return Err(Error::RankOutOfRange {
                mode,
                rank: rj,
                dim: s.len(),
            });
        }
        if s[rj - 1] <= f64::EPSILON * s[0] * (s.len() as f64) || s[0] == 0.0 {
            return Err(Error::RankDeficient { mode, rank: rj });
        }
        lambda_min = lambda_min.min(s[rj - 1]);
        lambda_max = lambda_max.max(s[0]);
        spectra.push(s);
    }
    Ok(SpectralSummary {
        singular_values: spectra,
        lambda_min,
        lambda_max,
        kappa0: lambda_max / lambda_min,
    })
}
