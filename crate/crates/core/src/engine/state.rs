use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::BanditConfig;
use crate::eigen::{eig_sym, project_sphere, rank_one_update, EigenPairs};
use crate::error::Result;

/// The design covariance `Λ_t = λI + Σ a_s a_sᵀ` together with its
/// incrementally maintained eigendecomposition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovarianceState {
    t: usize,
    ridge: f64,
    lambda_matrix: DMatrix<f64>,
    pairs: EigenPairs,
    updates_since_refactor: usize,
    refactor_period: usize,
    /// Rank-one updates that failed and were replaced by a full decomposition.
    secular_fallbacks: usize,
}

impl CovarianceState {
    pub fn new(d: usize, ridge: f64, refactor_period: usize) -> Self {
        Self {
            t: 0,
            ridge,
            lambda_matrix: DMatrix::identity(d, d) * ridge,
            pairs: EigenPairs::scaled_identity(d, ridge),
            updates_since_refactor: 0,
            refactor_period: refactor_period.max(1),
            secular_fallbacks: 0,
        }
    }

    /// A state holding an arbitrary SPD matrix, for probing the solvers.
    pub fn from_matrix(matrix: DMatrix<f64>, ridge: f64, t: usize) -> Result<Self> {
        let pairs = eig_sym(&matrix)?;
        Ok(Self {
            t,
            ridge,
            lambda_matrix: matrix,
            pairs,
            updates_since_refactor: 0,
            refactor_period: usize::MAX,
            secular_fallbacks: 0,
        })
    }

    /// `Λ ← Λ + a aᵀ`; refactorizes every `refactor_period` updates.
    pub fn update(&mut self, a: &DVector<f64>) -> Result<()> {
        self.lambda_matrix.ger(1.0, a, a, 1.0);
        self.updates_since_refactor += 1;
        if self.updates_since_refactor >= self.refactor_period {
            self.refactor()?;
        } else {
            match rank_one_update(&self.pairs, a) {
                Ok(p) => self.pairs = p,
                Err(_) => {
                    self.secular_fallbacks += 1;
                    self.refactor()?;
                }
            }
        }
        self.t += 1;
        Ok(())
    }

    pub fn refactor(&mut self) -> Result<()> {
        self.pairs = eig_sym(&self.lambda_matrix)?;
        self.updates_since_refactor = 0;
        Ok(())
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.pairs.dim()
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn lambda_matrix(&self) -> &DMatrix<f64> {
        &self.lambda_matrix
    }

    pub fn pairs(&self) -> &EigenPairs {
        &self.pairs
    }

    pub fn updates_since_refactor(&self) -> usize {
        self.updates_since_refactor
    }

    pub fn secular_fallbacks(&self) -> usize {
        self.secular_fallbacks
    }
}

/// Ridge regression state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorState {
    /// `Σ a_s r_s`.
    pub b_vec: DVector<f64>,
    pub theta_bar: DVector<f64>,
    /// `θ̄` projected onto the unit sphere.
    pub theta_hat: DVector<f64>,
    /// `Σ a_s ε_s`; only a simulator can fill this in.
    pub eta_oracle: DVector<f64>,
}

/// `Λ_0 = λI`, empty accumulators, and `θ̂_0` from the override or a seeded
/// random direction.
pub fn init_state<R: Rng + ?Sized>(
    config: &BanditConfig,
    rng: &mut R,
) -> Result<(CovarianceState, EstimatorState)> {
    config.validate()?;
    let d = config.d;
    let cov = CovarianceState::new(d, config.ridge, config.refactor_period);
    let zero = DVector::zeros(d);
    let theta_hat = match &config.theta_hat_init {
        Some(v) => DVector::from_column_slice(v),
        None => project_sphere(&zero, rng),
    };
    let est = EstimatorState {
        b_vec: zero.clone(),
        theta_bar: zero.clone(),
        theta_hat,
        eta_oracle: zero,
    };
    Ok((cov, est))
}

/// `θ̄ = Λ⁻¹ b` through the maintained eigendecomposition.
pub fn ridge_estimate(cov: &CovarianceState, b_vec: &DVector<f64>) -> DVector<f64> {
    cov.pairs().solve(b_vec)
}
