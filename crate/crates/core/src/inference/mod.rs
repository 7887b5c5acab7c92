//! Post-run inference: noise variance, χ² quantiles, confidence sets, the
//! scaled estimation error, and a normality test.

mod confidence;
mod normality;
mod special;

pub use confidence::{
    confidence_set_ellipsoidal, confidence_set_spherical, contains, coverage_rate, ConfidenceSet,
    SetKind,
};
pub use normality::{lilliefors_p_value, normality_test, NormalityTest, MIN_NORMALITY_SAMPLES};
pub use special::{chi2_cdf, chi2_quantile, kolmogorov_sf, normal_cdf, regularized_gamma_p};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::eigen::orthonormal_complement;
use crate::engine::{dot, RoundLog, TrialRecord};
use crate::error::{Error, Result};

const UNIT_TOL: f64 = 1e-10;

/// `(2β²T/(d+1))^{1/4}·Uᵀ(θ̂_T − θ⋆)` with the basis it was computed in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltSample {
    pub statistic: DVector<f64>,
    /// FNV-1a hash of the bit patterns of `U`.
    pub basis_tag: u64,
}

/// `(2β²T/(d+1))^{1/4}`.
pub fn clt_prefactor(beta: f64, horizon: usize, d: usize) -> f64 {
    (2.0 * beta * beta * horizon as f64 / (d as f64 + 1.0)).powf(0.25)
}

/// Scaled error in the complement basis of `θ⋆` built by
/// [`orthonormal_complement`].
pub fn clt_statistic(
    theta_hat: &DVector<f64>,
    theta_star: &DVector<f64>,
    beta: f64,
    horizon: usize,
    d: usize,
) -> Result<CltSample> {
    let basis = orthonormal_complement(theta_star)?;
    clt_statistic_with_basis(theta_hat, theta_star, &basis, beta, horizon, d)
}

/// [`clt_statistic`] in a caller-supplied orthonormal basis of `θ⋆⊥`.
pub fn clt_statistic_with_basis(
    theta_hat: &DVector<f64>,
    theta_star: &DVector<f64>,
    basis: &DMatrix<f64>,
    beta: f64,
    horizon: usize,
    d: usize,
) -> Result<CltSample> {
    for v in [theta_hat, theta_star] {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: v.len(),
            });
        }
        let n = v.norm();
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotUnit(n));
        }
    }
    if basis.shape() != (d, d - 1) {
        return Err(Error::DimensionMismatch {
            expected: d - 1,
            got: basis.ncols(),
        });
    }
    let scale = clt_prefactor(beta, horizon, d);
    let statistic = basis.tr_mul(&(theta_hat - theta_star)) * scale;
    Ok(CltSample {
        statistic,
        basis_tag: fnv1a(basis.as_slice()),
    })
}

fn fnv1a(values: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for byte in v.to_bits().to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// `σ̂² = Σ_t (r_t − ⟨a_t, θ̂_T⟩)² / (T − d)`.
pub fn estimate_noise_variance(trial: &TrialRecord) -> Result<f64> {
    noise_variance_from_log(&trial.log, trial.estimator.theta_hat.as_slice())
}

/// [`estimate_noise_variance`] for an arbitrary log and estimate.
pub fn noise_variance_from_log(log: &RoundLog, theta_hat: &[f64]) -> Result<f64> {
    let t = log.len();
    let d = theta_hat.len();
    if t <= d {
        return Err(Error::NotEnoughData(format!(
            "need T > d, got T={t}, d={d}"
        )));
    }
    let ss: f64 = log
        .iter()
        .map(|(a, r, _)| (r - dot(a, theta_hat)).powi(2))
        .sum();
    Ok(ss / (t - d) as f64)
}

/// Residual mean square `Σ r_i² / (T − d)` for precomputed residuals.
pub fn residual_variance(residuals: &[f64], d: usize) -> Result<f64> {
    let t = residuals.len();
    if t <= d {
        return Err(Error::NotEnoughData(format!(
            "need T > d, got T={t}, d={d}"
        )));
    }
    Ok(residuals.iter().map(|r| r * r).sum::<f64>() / (t - d) as f64)
}
