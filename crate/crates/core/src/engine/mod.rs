//! The LinUCB loop on the unit ball.

mod action;
mod config;
mod state;

pub use action::{select_action, ucb_score, ActionDecomposition};
pub use config::{
    beta_stability, beta_stability_at, beta_theoretical, stability_threshold, BanditConfig,
    BetaSchedule, NoiseKind, DEFAULT_REFACTOR_PERIOD, DEFAULT_RIDGE,
};
pub use state::{init_state, ridge_estimate, CovarianceState, EstimatorState};

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::PhaseSnapshot;
use crate::eigen::project_sphere;
use crate::error::{Error, Result};

/// `r = ⟨a, θ⋆⟩ + ε`, returning the drawn `ε` as well.
pub fn sample_reward<R: Rng + ?Sized>(
    a: &DVector<f64>,
    theta_star: &DVector<f64>,
    sigma: f64,
    noise: NoiseKind,
    rng: &mut R,
) -> (f64, f64) {
    let eps = noise.draw(sigma, rng);
    (a.dot(theta_star) + eps, eps)
}

/// One round of play.
#[derive(Debug, Clone)]
pub struct RoundEntry {
    pub decomposition: ActionDecomposition,
    pub reward: f64,
    pub noise: f64,
}

/// Plays one round: choose `a_t`, observe `r_t`, update `Λ`, `b`, `θ̄`, `θ̂`.
pub fn step<R: Rng + ?Sized>(
    cov: &mut CovarianceState,
    est: &mut EstimatorState,
    config: &BanditConfig,
    beta: f64,
    rng: &mut R,
) -> Result<RoundEntry> {
    if cov.t() >= config.horizon {
        return Err(Error::InvalidArgument(format!(
            "round {} is past the horizon {}",
            cov.t() + 1,
            config.horizon
        )));
    }
    let decomposition = select_action(cov, &est.theta_hat, beta)?;
    let a = &decomposition.action;
    let eps = config.noise.draw(config.sigma, rng);
    let reward = dot(a.as_slice(), &config.theta_star) + eps;
    let noise = eps;
    cov.update(a)?;
    est.b_vec.axpy(reward, a, 1.0);
    est.eta_oracle.axpy(noise, a, 1.0);
    est.theta_bar = ridge_estimate(cov, &est.b_vec);
    est.theta_hat = project_sphere(&est.theta_bar, rng);
    Ok(RoundEntry {
        decomposition,
        reward,
        noise,
    })
}

/// Per-round actions, rewards, and noise draws in flat storage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    d: usize,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    noises: Vec<f64>,
}

impl RoundLog {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            ..Self::default()
        }
    }

    pub fn with_capacity(d: usize, rounds: usize) -> Self {
        Self {
            d,
            actions: Vec::with_capacity(d * rounds),
            rewards: Vec::with_capacity(rounds),
            noises: Vec::with_capacity(rounds),
        }
    }

    pub fn push(&mut self, action: &[f64], reward: f64, noise: f64) {
        assert_eq!(action.len(), self.d, "action dimension");
        self.actions.extend_from_slice(action);
        self.rewards.push(reward);
        self.noises.push(noise);
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Action of round `t` (zero-based).
    pub fn action(&self, t: usize) -> &[f64] {
        &self.actions[t * self.d..(t + 1) * self.d]
    }

    pub fn reward(&self, t: usize) -> f64 {
        self.rewards[t]
    }

    pub fn noise(&self, t: usize) -> f64 {
        self.noises[t]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn noises(&self) -> &[f64] {
        &self.noises
    }

    /// `(a_t, r_t, ε_t)` in round order.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64, f64)> + '_ {
        self.actions
            .chunks_exact(self.d.max(1))
            .zip(&self.rewards)
            .zip(&self.noises)
            .map(|((a, &r), &e)| (a, r, e))
    }
}

/// A diagnostic snapshot taken after round `snapshot.t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticPoint {
    pub snapshot: PhaseSnapshot,
    pub regret_so_far: f64,
}

/// Everything a completed trial leaves behind.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub config: BanditConfig,
    pub trial_index: u64,
    pub beta: f64,
    pub log: RoundLog,
    pub covariance: CovarianceState,
    pub estimator: EstimatorState,
    pub regret: f64,
    pub diagnostics: Vec<DiagnosticPoint>,
    /// Rounds where action selection fell back to projected ascent.
    pub kkt_fallbacks: usize,
}

/// `R_T = Σ_t (1 − ⟨a_t, θ⋆⟩)`, recomputed from the log.
pub fn regret(trial: &TrialRecord) -> f64 {
    regret_of_log(&trial.log, &trial.config.theta_star)
}

pub(crate) fn regret_of_log(log: &RoundLog, theta_star: &[f64]) -> f64 {
    log.iter().map(|(a, _, _)| 1.0 - dot(a, theta_star)).sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
