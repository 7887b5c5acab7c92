use nalgebra::DVector;

use super::seed::trial_rng;
use crate::diagnostics::{phase_snapshot, SnapshotSchedule};
use crate::engine::{dot, init_state, step, BanditConfig, DiagnosticPoint, RoundLog, TrialRecord};
use crate::error::Result;

/// Runs one trial with the default geometric snapshot schedule.
pub fn run_trial(config: &BanditConfig, trial_index: u64) -> Result<TrialRecord> {
    run_trial_with(config, trial_index, &SnapshotSchedule::default())
}

/// Runs one trial, seeded by `(config.base_seed, trial_index)`.
pub fn run_trial_with(
    config: &BanditConfig,
    trial_index: u64,
    schedule: &SnapshotSchedule,
) -> Result<TrialRecord> {
    config.validate()?;
    let beta = config.beta_value()?;
    let rounds = schedule.rounds(config.horizon)?;
    let theta_star = DVector::from_column_slice(&config.theta_star);

    let mut rng = trial_rng(config.base_seed, trial_index);
    let (mut cov, mut est) = init_state(config, &mut rng)?;
    let mut log = RoundLog::with_capacity(config.d, config.horizon);
    let mut diagnostics = Vec::with_capacity(rounds.len());
    let mut next = 0;
    let mut regret = 0.0;
    let mut kkt_fallbacks = 0;

    for t in 1..=config.horizon {
        let entry = step(&mut cov, &mut est, config, beta, &mut rng)?;
        let a = entry.decomposition.action.as_slice();
        regret += 1.0 - dot(a, &config.theta_star);
        log.push(a, entry.reward, entry.noise);
        if entry.decomposition.fallback {
            kkt_fallbacks += 1;
        }
        if rounds.get(next) == Some(&t) {
            diagnostics.push(DiagnosticPoint {
                snapshot: phase_snapshot(&cov, &est, &theta_star, beta)?,
                regret_so_far: regret,
            });
            next += 1;
        }
    }

    Ok(TrialRecord {
        config: config.clone(),
        trial_index,
        beta,
        log,
        covariance: cov,
        estimator: est,
        regret,
        diagnostics,
        kkt_fallbacks,
    })
}
