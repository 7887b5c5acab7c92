//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use linucb_core::diagnostics::{eigen_benchmark, mab_balance, weighted_error_max};
use linucb_core::engine::{select_action, BanditConfig, BetaSchedule, CovarianceState};
use linucb_core::harness::{
    run_montecarlo, run_outcomes, run_trial, summarize, to_json_string, HarnessOptions,
    TrialOutcome,
};
use linucb_core::inference::normality_test;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<(bool, String), String>;

fn fmt_err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// UCB of `(cos φ, sin φ)` against a 2×2 SPD matrix, via the explicit inverse.
fn ucb_2d(m: &[[f64; 2]; 2], theta: [f64; 2], beta: f64, phi: f64) -> f64 {
    let (a0, a1) = (phi.cos(), phi.sin());
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let q = (m[1][1] * a0 * a0 - 2.0 * m[0][1] * a0 * a1 + m[0][0] * a1 * a1) / det;
    a0 * theta[0] + a1 * theta[1] + beta * q.max(0.0).sqrt()
}

fn grid_argmax(m: &[[f64; 2]; 2], theta: [f64; 2], beta: f64) -> (f64, f64) {
    const N: usize = 100_000;
    let h = 2.0 * PI / N as f64;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 0..N {
        let phi = k as f64 * h;
        let v = ucb_2d(m, theta, beta, phi);
        if v > best.0 {
            best = (v, phi);
        }
    }
    let (mut lo, mut hi) = (best.1 - h, best.1 + h);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if ucb_2d(m, theta, beta, m1) < ucb_2d(m, theta, beta, m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let phi = 0.5 * (lo + hi);
    let refined = ucb_2d(m, theta, beta, phi);
    if refined >= best.0 {
        (refined, phi)
    } else {
        best
    }
}

fn action_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xa1);
    let (mut worst_ucb, mut worst_action) = (0.0_f64, 0.0_f64);
    for _ in 0..200 {
        let l1 = 10f64.powf(rng.random_range(0.0..4.0));
        let l2 = 10f64.powf(rng.random_range(0.0..4.0));
        let rot = rng.random_range(0.0..PI);
        let (c, s) = (rot.cos(), rot.sin());
        let m = [
            [l1 * c * c + l2 * s * s, (l1 - l2) * c * s],
            [(l1 - l2) * c * s, l1 * s * s + l2 * c * c],
        ];
        let psi = rng.random_range(0.0..2.0 * PI);
        let theta = [psi.cos(), psi.sin()];
        let beta = rng.random_range(0.1..20.0);

        let matrix = DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]]);
        let cov = CovarianceState::from_matrix(matrix, 1.0, 0).map_err(fmt_err)?;
        let dec =
            select_action(&cov, &DVector::from_column_slice(&theta), beta).map_err(fmt_err)?;
        let a = dec.action.as_slice();
        let attained = ucb_2d(&m, theta, beta, a[1].atan2(a[0]));

        let (best, phi) = grid_argmax(&m, theta, beta);
        let gap = (attained - best).abs();
        let dist = ((a[0] - phi.cos()).powi(2) + (a[1] - phi.sin()).powi(2)).sqrt();
        worst_ucb = worst_ucb.max(gap);
        worst_action = worst_action.max(dist);
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst_ucb <= 1e-6 && worst_action <= 1e-3 && secs < 10.0,
        format!("max |ΔUCB| = {worst_ucb:.3e}, max ‖Δa‖ = {worst_action:.3e}, {secs:.2} s"),
    ))
}

fn eigen_tracking() -> Verdict {
    let start = Instant::now();
    let mut cfg = BanditConfig::new(5, 10_000, 0.25).with_seed(0xa2);
    cfg.refactor_period = cfg.horizon + 1;
    let record = run_trial(&cfg, 0).map_err(fmt_err)?;

    let mut lambda = DMatrix::<f64>::identity(5, 5) * cfg.ridge;
    for t in 0..record.log.len() {
        let a = DVector::from_column_slice(record.log.action(t));
        lambda += &a * a.transpose();
    }
    let mut oracle: Vec<f64> = lambda
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    oracle.sort_by(|a, b| b.total_cmp(a));
    let tracked = record.covariance.pairs().values();
    let rel = oracle
        .iter()
        .zip(tracked.iter())
        .map(|(o, t)| ((t - o) / o).abs())
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    Ok((
        rel <= 1e-8 && secs < 30.0 && record.covariance.updates_since_refactor() == cfg.horizon,
        format!("max relative error = {rel:.3e} with no refactorization, {secs:.2} s"),
    ))
}

struct PhaseRuns {
    config: BanditConfig,
    options: HarnessOptions,
    outcomes: Vec<TrialOutcome>,
}

fn phase_runs() -> Result<PhaseRuns, String> {
    let config = BanditConfig::new(2, 200_000, 0.25)
        .with_seed(0xa3)
        .with_beta(BetaSchedule::Stability { c: 1.0 });
    let options = HarnessOptions {
        trials: 50,
        ..HarnessOptions::default()
    };
    let outcomes = run_outcomes(&config, &options, 0..50).map_err(fmt_err)?;
    Ok(PhaseRuns {
        config,
        options,
        outcomes,
    })
}

fn eigen_limit(runs: &PhaseRuns) -> Verdict {
    let s = summarize(&runs.config, &runs.options, &runs.outcomes).map_err(fmt_err)?;
    let (lambda_star, _) =
        eigen_benchmark(s.beta, runs.config.horizon as f64, runs.config.d).map_err(fmt_err)?;
    let mut ratios: Vec<f64> = runs
        .outcomes
        .iter()
        .map(|o| o.eigenvalues[1] / lambda_star)
        .collect();
    ratios.sort_by(f64::total_cmp);
    let median = 0.5 * (ratios[24] + ratios[25]);
    let [q1, q3] = s.nonleading_ratio_quartiles;
    Ok((
        (0.75..=1.25).contains(&median)
            && (median - s.eigen_ratio_median).abs() < 1e-12
            && q1 >= 1.0
            && q3 <= 1.3,
        format!("median λ_T,2/λ* = {median:.4}, non-leading ratio quartiles [{q1:.4}, {q3:.4}]"),
    ))
}

fn linear_phase(runs: &PhaseRuns) -> Verdict {
    let d = runs.config.d as f64;
    let mut checked = 0;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for o in &runs.outcomes {
        let upper = 0.5 * o.beta * o.beta * d;
        for p in &o.diagnostics {
            let t = p.snapshot.t as f64;
            if t >= 10.0 * d && t <= upper {
                let r = p.snapshot.lambda_min / (t / d);
                lo = lo.min(r);
                hi = hi.max(r);
                checked += 1;
            }
        }
    }
    Ok((
        checked > 0 && lo >= 0.1 && hi <= 1.5,
        format!("λ_t,d/(t/d) in [{lo:.4}, {hi:.4}] over {checked} recorded points"),
    ))
}

fn min_eig_slope(runs: &PhaseRuns) -> Verdict {
    let s = summarize(&runs.config, &runs.options, &runs.outcomes).map_err(fmt_err)?;
    let slope = s.min_eig_slope.ok_or("no slope fitted")?;
    Ok((
        (0.4..=0.6).contains(&slope),
        format!("last-decade slope of log λ_t,d = {slope:.4} (target 0.5)"),
    ))
}

fn error_slope(runs: &PhaseRuns) -> Verdict {
    let s = summarize(&runs.config, &runs.options, &runs.outcomes).map_err(fmt_err)?;
    let slope = s.error_slope.ok_or("no slope fitted")?;
    Ok((
        (-0.4..=-0.1).contains(&slope),
        format!("last-decade slope of log ‖θ̄_t − θ⋆‖ = {slope:.4} (target −0.25)"),
    ))
}

struct InferenceRuns {
    config: BanditConfig,
    outcomes: Vec<TrialOutcome>,
}

fn inference_runs() -> Result<InferenceRuns, String> {
    let config = BanditConfig::new(2, 100_000, 0.25)
        .with_seed(0xa7)
        .with_beta(BetaSchedule::Stability { c: 1.0 });
    let options = HarnessOptions {
        trials: 500,
        delta: 0.1,
        ..HarnessOptions::default()
    };
    let outcomes = run_outcomes(&config, &options, 0..500).map_err(fmt_err)?;
    Ok(InferenceRuns { config, outcomes })
}

fn normality(runs: &InferenceRuns) -> Verdict {
    let pooled: Vec<f64> = runs
        .outcomes
        .iter()
        .map(|o| o.clt[0] / o.sigma2_hat.sqrt())
        .collect();
    let clean = normality_test(&pooled).map_err(fmt_err)?;
    let cubed: Vec<f64> = pooled.iter().map(|x| x * x * x).collect();
    let corrupted = normality_test(&cubed).map_err(fmt_err)?;
    Ok((
        clean.p_value > 0.01 && corrupted.p_value < 0.01,
        format!(
            "studentized p = {:.4} (D = {:.4}); cubed p = {:.2e}",
            clean.p_value, clean.statistic, corrupted.p_value
        ),
    ))
}

fn coverage(runs: &InferenceRuns) -> Verdict {
    let n = runs.outcomes.len() as f64;
    let ell = runs
        .outcomes
        .iter()
        .filter(|o| o.covered_ellipsoidal)
        .count() as f64
        / n;
    let sph = runs.outcomes.iter().filter(|o| o.covered_spherical).count() as f64 / n;
    let kkt: usize = runs.outcomes.iter().map(|o| o.kkt_fallbacks).sum();
    let secular: usize = runs.outcomes.iter().map(|o| o.secular_fallbacks).sum();
    Ok((
        (0.85..=1.0).contains(&ell) && sph >= 0.80,
        format!(
            "ellipsoidal {ell:.3}, spherical {sph:.3} at nominal 0.9 \
             (solver fallbacks: {kkt} ascent, {secular} refactor)"
        ),
    ))
}

fn weighted_error(runs: &InferenceRuns) -> Verdict {
    let cfg = &runs.config;
    let horizon = cfg.horizon as f64;
    let bound = 10.0 * (cfg.sigma * (cfg.d as f64 + horizon.ln().ln()).sqrt() + 1.0);
    let (mut full, mut tenth, mut worst) = (0.0, 0.0, 0.0_f64);
    let subset = &runs.outcomes[..50];
    for o in subset {
        let series: Vec<_> = o.diagnostics.iter().map(|p| p.snapshot.clone()).collect();
        let early: Vec<_> = series
            .iter()
            .filter(|s| s.t as f64 <= horizon / 10.0)
            .cloned()
            .collect();
        let m_full = weighted_error_max(&series).map_err(fmt_err)?;
        full += m_full;
        tenth += weighted_error_max(&early).map_err(fmt_err)?;
        worst = worst.max(m_full);
    }
    let growth = full / tenth;
    Ok((
        growth <= 1.5 && worst <= bound,
        format!("mean running max grows ×{growth:.4} from T/10 to T; worst {worst:.4} vs bound {bound:.4}"),
    ))
}

fn mab_balancing() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa10);
    let (mut worst_level, mut worst_sum) = (0.0_f64, 0.0_f64);
    for _ in 0..500 {
        let k = rng.random_range(2..=6);
        let mu: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let beta = rng.random_range(0.1..10.0);
        let horizon = 10f64.powf(rng.random_range(2.0..7.0));
        let b = mab_balance(&mu, beta, horizon).map_err(fmt_err)?;
        for (m, n) in mu.iter().zip(&b.counts) {
            let level = m + beta / n.sqrt();
            worst_level = worst_level.max(((level - b.level) / b.level).abs());
        }
        worst_sum = worst_sum.max((b.counts.iter().sum::<f64>() - horizon).abs());
    }
    let mut symmetric = true;
    for k in 2..=6 {
        for &horizon in &[10.0, 1000.0, 12345.0] {
            let b = mab_balance(&vec![0.3; k], 2.0, horizon).map_err(fmt_err)?;
            symmetric &= b.counts.iter().all(|&n| n == horizon / k as f64);
        }
    }
    Ok((
        worst_level <= 1e-9 && worst_sum <= 1e-6 && symmetric,
        format!(
            "max relative level spread {worst_level:.2e}, max sum error {worst_sum:.2e}, symmetric exact: {symmetric}"
        ),
    ))
}

fn determinism() -> Verdict {
    let cfg = BanditConfig::new(3, 3000, 0.3).with_seed(0xa11);
    let opts = HarnessOptions {
        trials: 40,
        ..HarnessOptions::default()
    };
    let first = to_json_string(&run_montecarlo(&cfg, &opts).map_err(fmt_err)?).map_err(fmt_err)?;
    let second = to_json_string(&run_montecarlo(&cfg, &opts).map_err(fmt_err)?).map_err(fmt_err)?;

    let mut outcomes = run_outcomes(&cfg, &opts, 0..40).map_err(fmt_err)?;
    outcomes.reverse();
    outcomes.swap(3, 17);
    let permuted =
        to_json_string(&summarize(&cfg, &opts, &outcomes).map_err(fmt_err)?).map_err(fmt_err)?;
    Ok((
        first == second && first == permuted,
        format!(
            "{} summary bytes; repeat identical: {}, permutation identical: {}",
            first.len(),
            first == second,
            first == permuted
        ),
    ))
}

fn report(failures: &mut usize, id: &str, name: &str, verdict: Verdict) {
    match verdict {
        Ok((true, detail)) => println!("PASS {id} {name}: {detail}"),
        Ok((false, detail)) => {
            *failures += 1;
            println!("FAIL {id} {name}: {detail}");
        }
        Err(e) => {
            *failures += 1;
            println!("FAIL {id} {name}: error: {e}");
        }
    }
}

fn main() -> ExitCode {
    let mut failures = 0;
    report(
        &mut failures,
        "1",
        "action selection matches grid oracle",
        action_oracle(),
    );
    report(
        &mut failures,
        "2",
        "incremental eigenvalues match full decomposition",
        eigen_tracking(),
    );

    match phase_runs() {
        Ok(runs) => {
            report(
                &mut failures,
                "3",
                "non-leading eigenvalue limit",
                eigen_limit(&runs),
            );
            report(
                &mut failures,
                "4",
                "linear growth of the minimum eigenvalue",
                linear_phase(&runs),
            );
            report(
                &mut failures,
                "5",
                "square-root growth of the minimum eigenvalue",
                min_eig_slope(&runs),
            );
            report(
                &mut failures,
                "6",
                "estimation error rate",
                error_slope(&runs),
            );
        }
        Err(e) => {
            for id in ["3", "4", "5", "6"] {
                report(&mut failures, id, "phase runs", Err(e.clone()));
            }
        }
    }

    match inference_runs() {
        Ok(runs) => {
            report(&mut failures, "7", "asymptotic normality", normality(&runs));
            report(
                &mut failures,
                "8",
                "confidence set coverage",
                coverage(&runs),
            );
            report(
                &mut failures,
                "9",
                "weighted error bound",
                weighted_error(&runs),
            );
        }
        Err(e) => {
            for id in ["7", "8", "9"] {
                report(&mut failures, id, "inference runs", Err(e.clone()));
            }
        }
    }

    report(
        &mut failures,
        "10",
        "multi-armed balancing",
        mab_balancing(),
    );
    report(&mut failures, "11", "determinism", determinism());

    if failures == 0 {
        println!("acceptance: all 11 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} of 11 criteria failed");
        ExitCode::FAILURE
    }
}
