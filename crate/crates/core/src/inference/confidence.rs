use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::special::chi2_quantile;
use crate::error::{Error, Result};

const CENTER_TOL: f64 = 1e-10;
const QUERY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetKind {
    Spherical,
    Ellipsoidal,
}

/// A Wald-type region on the unit sphere around `θ̂_T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSet {
    pub kind: SetKind,
    pub center: DVector<f64>,
    pub sigma2_hat: f64,
    /// `χ²_{d−1, 1−δ}`.
    pub quantile: f64,
    pub delta: f64,
    /// Squared Euclidean radius; spherical sets only.
    pub radius2: Option<f64>,
    /// `Λ_T`; ellipsoidal sets only.
    pub metric: Option<DMatrix<f64>>,
}

impl ConfidenceSet {
    /// Whether `θ` satisfies the set's defining inequality.
    pub fn contains(&self, theta: &DVector<f64>) -> Result<bool> {
        if theta.len() != self.center.len() {
            return Err(Error::DimensionMismatch {
                expected: self.center.len(),
                got: theta.len(),
            });
        }
        let norm = theta.norm();
        if (norm - 1.0).abs() > QUERY_TOL {
            return Err(Error::NotUnit(norm));
        }
        let diff = &self.center - theta;
        Ok(match self.kind {
            SetKind::Spherical => diff.norm_squared() <= self.radius2.unwrap_or(0.0),
            SetKind::Ellipsoidal => {
                let metric = self
                    .metric
                    .as_ref()
                    .expect("ellipsoidal set carries a metric");
                diff.dot(&(metric * &diff)) <= self.sigma2_hat * self.quantile
            }
        })
    }
}

/// Free-function form of [`ConfidenceSet::contains`].
pub fn contains(set: &ConfidenceSet, theta: &DVector<f64>) -> Result<bool> {
    set.contains(theta)
}

fn check_common(center: &DVector<f64>, sigma2_hat: f64, delta: f64) -> Result<()> {
    if center.len() < 2 {
        return Err(Error::DimensionTooSmall(center.len()));
    }
    let norm = center.norm();
    if (norm - 1.0).abs() > CENTER_TOL {
        return Err(Error::NotUnit(norm));
    }
    if !(sigma2_hat >= 0.0 && sigma2_hat.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sigma2_hat must be >= 0, got {sigma2_hat}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must be in (0,1), got {delta}"
        )));
    }
    Ok(())
}

/// `{θ ∈ S^{d−1} : ‖θ̂_T − θ‖² ≤ σ̂²·√((d+1)/(2β²T))·χ²_{d−1,1−δ}}`.
pub fn confidence_set_spherical(
    theta_hat: &DVector<f64>,
    sigma2_hat: f64,
    beta: f64,
    horizon: usize,
    d: usize,
    delta: f64,
) -> Result<ConfidenceSet> {
    check_common(theta_hat, sigma2_hat, delta)?;
    if theta_hat.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: theta_hat.len(),
        });
    }
    if !(beta > 0.0) || horizon == 0 {
        return Err(Error::InvalidArgument(format!("beta={beta}, T={horizon}")));
    }
    let quantile = chi2_quantile(d - 1, 1.0 - delta)?;
    let scale = ((d as f64 + 1.0) / (2.0 * beta * beta * horizon as f64)).sqrt();
    Ok(ConfidenceSet {
        kind: SetKind::Spherical,
        center: theta_hat.clone(),
        sigma2_hat,
        quantile,
        delta,
        radius2: Some(sigma2_hat * scale * quantile),
        metric: None,
    })
}

/// `{θ ∈ S^{d−1} : ‖θ̂_T − θ‖²_{Λ_T} ≤ σ̂²·χ²_{d−1,1−δ}}`.
pub fn confidence_set_ellipsoidal(
    theta_hat: &DVector<f64>,
    lambda_t: &DMatrix<f64>,
    sigma2_hat: f64,
    delta: f64,
) -> Result<ConfidenceSet> {
    check_common(theta_hat, sigma2_hat, delta)?;
    let d = theta_hat.len();
    if lambda_t.shape() != (d, d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: lambda_t.nrows(),
        });
    }
    let quantile = chi2_quantile(d - 1, 1.0 - delta)?;
    Ok(ConfidenceSet {
        kind: SetKind::Ellipsoidal,
        center: theta_hat.clone(),
        sigma2_hat,
        quantile,
        delta,
        radius2: None,
        metric: Some(lambda_t.clone()),
    })
}

/// Fraction of `sets` containing `θ⋆`.
pub fn coverage_rate(sets: &[ConfidenceSet], theta_star: &DVector<f64>) -> Result<f64> {
    if sets.is_empty() {
        return Err(Error::NotEnoughData(
            "coverage needs at least one set".into(),
        ));
    }
    let mut hits = 0usize;
    for set in sets {
        if set.contains(theta_star)? {
            hits += 1;
        }
    }
    Ok(hits as f64 / sets.len() as f64)
}
