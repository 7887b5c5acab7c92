use std::ops::Range;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::HarnessOptions;
use super::trial::run_trial_with;
use crate::diagnostics::{eigen_benchmark, last_decade, slope_fit, weighted_error_max};
use crate::engine::{BanditConfig, DiagnosticPoint, TrialRecord};
use crate::error::{Error, Result};
use crate::inference::{
    clt_statistic, confidence_set_ellipsoidal, confidence_set_spherical, estimate_noise_variance,
    normality_test, MIN_NORMALITY_SAMPLES,
};

/// The per-trial quantities a Monte Carlo summary is built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial_index: u64,
    pub beta: f64,
    pub theta_hat: Vec<f64>,
    pub sigma2_hat: f64,
    /// `(2β²T/(d+1))^{1/4}·Uᵀ(θ̂_T − θ⋆)`.
    pub clt: Vec<f64>,
    pub covered_spherical: bool,
    pub covered_ellipsoidal: bool,
    /// Eigenvalues of `Λ_T`, non-increasing.
    pub eigenvalues: Vec<f64>,
    pub regret: f64,
    pub diagnostics: Vec<DiagnosticPoint>,
    pub kkt_fallbacks: usize,
    pub secular_fallbacks: usize,
    pub wall_clock_seconds: f64,
}

/// Distills a finished trial into its outcome.
pub fn outcome_of(
    record: &TrialRecord,
    delta: f64,
    wall_clock_seconds: f64,
) -> Result<TrialOutcome> {
    let config = &record.config;
    if !(record.beta > 0.0) {
        return Err(Error::InvalidConfig("inference needs beta > 0".into()));
    }
    let theta_star = DVector::from_column_slice(&config.theta_star);
    let theta_hat = &record.estimator.theta_hat;
    let sigma2_hat = estimate_noise_variance(record)?;
    let clt = clt_statistic(
        theta_hat,
        &theta_star,
        record.beta,
        config.horizon,
        config.d,
    )?;
    let spherical = confidence_set_spherical(
        theta_hat,
        sigma2_hat,
        record.beta,
        config.horizon,
        config.d,
        delta,
    )?;
    let ellipsoidal = confidence_set_ellipsoidal(
        theta_hat,
        record.covariance.lambda_matrix(),
        sigma2_hat,
        delta,
    )?;
    Ok(TrialOutcome {
        trial_index: record.trial_index,
        beta: record.beta,
        theta_hat: theta_hat.as_slice().to_vec(),
        sigma2_hat,
        clt: clt.statistic.as_slice().to_vec(),
        covered_spherical: spherical.contains(&theta_star)?,
        covered_ellipsoidal: ellipsoidal.contains(&theta_star)?,
        eigenvalues: record.covariance.pairs().values().as_slice().to_vec(),
        regret: record.regret,
        diagnostics: record.diagnostics.clone(),
        kkt_fallbacks: record.kkt_fallbacks,
        secular_fallbacks: record.covariance.secular_fallbacks(),
        wall_clock_seconds,
    })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

/// Runs the trials with indices in `indices`, returned in index order.
pub fn run_outcomes(
    config: &BanditConfig,
    options: &HarnessOptions,
    indices: Range<u64>,
) -> Result<Vec<TrialOutcome>> {
    config.validate()?;
    options.validate()?;
    let one = |index: u64| -> Result<TrialOutcome> {
        let start = Instant::now();
        let record = run_trial_with(config, index, &options.schedule)?;
        outcome_of(&record, options.delta, start.elapsed().as_secs_f64())
    };
    pool(options.workers)?.install(|| indices.into_par_iter().map(one).collect())
}

/// Normality of one pooled, studentized CLT coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateNormality {
    pub coordinate: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// Aggregate of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub n_trials: usize,
    pub d: usize,
    pub horizon: usize,
    pub sigma: f64,
    pub beta: f64,
    pub delta: f64,
    /// One entry per complement coordinate; empty below the test's minimum
    /// sample size.
    pub normality: Vec<CoordinateNormality>,
    pub coverage_spherical: f64,
    pub coverage_ellipsoidal: f64,
    /// Median of `λ_{T,i}/λ*_T` pooled over trials and `i ≥ 2`.
    pub eigen_ratio_median: f64,
    /// First and third quartiles of `λ_{T,i}/λ*_T`.
    pub eigen_ratio_iqr: [f64; 2],
    /// First and third quartiles of `λ_{T,i}/λ_{T,d}`, `i ≥ 2`.
    pub nonleading_ratio_quartiles: [f64; 2],
    /// Log-log slope of the trial-mean `‖θ̄_t − θ⋆‖₂` over the last decade.
    pub error_slope: Option<f64>,
    /// Log-log slope of the trial-mean `λ_{t,d}` over the last decade.
    pub min_eig_slope: Option<f64>,
    pub weighted_err_max_mean: f64,
    pub mean_regret: f64,
    pub kkt_fallbacks: usize,
    pub secular_fallbacks: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_per_trial: Option<f64>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Trial-mean of a diagnostic over the shared recording grid.
pub fn mean_series(
    outcomes: &[TrialOutcome],
    f: impl Fn(&DiagnosticPoint) -> f64,
) -> Vec<(f64, f64)> {
    let Some(first) = outcomes.first() else {
        return Vec::new();
    };
    let n = outcomes.len() as f64;
    (0..first.diagnostics.len())
        .map(|k| {
            let t = first.diagnostics[k].snapshot.t as f64;
            let mean = outcomes.iter().map(|o| f(&o.diagnostics[k])).sum::<f64>() / n;
            (t, mean)
        })
        .collect()
}

/// Deterministic fold over outcomes sorted by trial index.
pub fn summarize(
    config: &BanditConfig,
    options: &HarnessOptions,
    outcomes: &[TrialOutcome],
) -> Result<McSummary> {
    if outcomes.is_empty() {
        return Err(Error::NotEnoughData("no trials to summarize".into()));
    }
    let mut outcomes: Vec<&TrialOutcome> = outcomes.iter().collect();
    outcomes.sort_by_key(|o| o.trial_index);
    if outcomes
        .windows(2)
        .any(|w| w[0].trial_index == w[1].trial_index)
    {
        return Err(Error::InvalidArgument("duplicate trial index".into()));
    }
    let owned: Vec<TrialOutcome> = outcomes.iter().map(|o| (*o).clone()).collect();
    let n = owned.len();
    let nf = n as f64;
    let d = config.d;
    let beta = owned[0].beta;

    let mut normality = Vec::new();
    if n >= MIN_NORMALITY_SAMPLES {
        for j in 0..d - 1 {
            let pooled: Vec<f64> = owned
                .iter()
                .map(|o| o.clt[j] / o.sigma2_hat.sqrt())
                .collect();
            if let Ok(t) = normality_test(&pooled) {
                normality.push(CoordinateNormality {
                    coordinate: j + 1,
                    statistic: t.statistic,
                    p_value: t.p_value,
                });
            }
        }
    }

    let (lambda_star, _) = eigen_benchmark(beta, config.horizon as f64, d)?;
    let ratios = sorted(
        owned
            .iter()
            .flat_map(|o| o.eigenvalues[1..].iter().map(|l| l / lambda_star))
            .collect(),
    );
    let nonleading = sorted(
        owned
            .iter()
            .flat_map(|o| {
                let min = o.eigenvalues[d - 1];
                o.eigenvalues[1..].iter().map(move |l| l / min)
            })
            .collect(),
    );

    let slope = |pts: Vec<(f64, f64)>| slope_fit(&last_decade(&pts)).ok().map(|(s, _)| s);
    let error_slope = slope(mean_series(&owned, |p| p.snapshot.plain_err));
    let min_eig_slope = slope(mean_series(&owned, |p| p.snapshot.lambda_min));

    let mut weighted_sum = 0.0;
    for o in &owned {
        let series: Vec<_> = o.diagnostics.iter().map(|p| p.snapshot.clone()).collect();
        weighted_sum += weighted_error_max(&series)?;
    }

    Ok(McSummary {
        n_trials: n,
        d,
        horizon: config.horizon,
        sigma: config.sigma,
        beta,
        delta: options.delta,
        normality,
        coverage_spherical: owned.iter().filter(|o| o.covered_spherical).count() as f64 / nf,
        coverage_ellipsoidal: owned.iter().filter(|o| o.covered_ellipsoidal).count() as f64 / nf,
        eigen_ratio_median: quantile_sorted(&ratios, 0.5),
        eigen_ratio_iqr: [
            quantile_sorted(&ratios, 0.25),
            quantile_sorted(&ratios, 0.75),
        ],
        nonleading_ratio_quartiles: [
            quantile_sorted(&nonleading, 0.25),
            quantile_sorted(&nonleading, 0.75),
        ],
        error_slope,
        min_eig_slope,
        weighted_err_max_mean: weighted_sum / nf,
        mean_regret: owned.iter().map(|o| o.regret).sum::<f64>() / nf,
        kkt_fallbacks: owned.iter().map(|o| o.kkt_fallbacks).sum(),
        secular_fallbacks: owned.iter().map(|o| o.secular_fallbacks).sum(),
        wall_clock_per_trial: options
            .timing
            .then(|| owned.iter().map(|o| o.wall_clock_seconds).sum::<f64>() / nf),
    })
}

/// Runs `options.trials` trials and summarizes them.
pub fn run_montecarlo(config: &BanditConfig, options: &HarnessOptions) -> Result<McSummary> {
    let outcomes = run_outcomes(config, options, 0..options.trials as u64)?;
    summarize(config, options, &outcomes)
}
