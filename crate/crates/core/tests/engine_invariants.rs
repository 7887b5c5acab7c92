use linucb_core::diagnostics::SnapshotSchedule;
use linucb_core::engine::{BanditConfig, BetaSchedule, NoiseKind};
use linucb_core::harness::{run_trial, run_trial_with};
use nalgebra::{DMatrix, DVector};

fn theta_star(d: usize) -> Vec<f64> {
    let v: Vec<f64> = (1..=d).map(|i| i as f64).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

#[test]
fn trial_state_agrees_with_its_log() {
    for (d, noise) in [
        (2, NoiseKind::Gaussian),
        (3, NoiseKind::Rademacher),
        (5, NoiseKind::Uniform),
    ] {
        let cfg = BanditConfig::new(d, 1500, 0.4)
            .with_seed(d as u64)
            .with_noise(noise)
            .with_theta_star(theta_star(d));
        let r = run_trial(&cfg, 7).unwrap();
        let star = DVector::from_column_slice(&cfg.theta_star);

        let mut lambda = DMatrix::<f64>::identity(d, d) * cfg.ridge;
        let mut b = DVector::<f64>::zeros(d);
        for (a, reward, noise) in r.log.iter() {
            let a = DVector::from_column_slice(a);
            assert!((a.norm() - 1.0).abs() < 1e-12);
            assert!((reward - a.dot(&star) - noise).abs() < 1e-12);
            lambda += &a * a.transpose();
            b += &a * reward;
        }
        assert!((r.covariance.lambda_matrix() - &lambda).amax() < 1e-8);
        assert!((&r.estimator.b_vec - &b).amax() < 1e-9);

        let theta_bar = lambda.clone().cholesky().unwrap().solve(&b);
        assert!((&r.estimator.theta_bar - &theta_bar).amax() < 1e-9);
        let hat = &theta_bar / theta_bar.norm();
        assert!((&r.estimator.theta_hat - hat).amax() < 1e-9);
        assert!(r.regret >= 0.0);
        assert_eq!(r.covariance.t(), cfg.horizon);
    }
}

#[test]
fn estimator_approaches_truth() {
    let cfg = BanditConfig::new(3, 20_000, 0.1)
        .with_seed(9)
        .with_theta_star(theta_star(3));
    let r = run_trial(&cfg, 0).unwrap();
    let star = DVector::from_column_slice(&cfg.theta_star);
    assert!((&r.estimator.theta_hat - &star).norm() < 0.1);
    let loss = |range: std::ops::Range<usize>| -> f64 {
        range
            .map(|t| 1.0 - DVector::from_column_slice(r.log.action(t)).dot(&star))
            .sum()
    };
    let half = cfg.horizon / 2;
    assert!(loss(half..cfg.horizon) < loss(0..half));
}

#[test]
fn stride_schedule_records_every_stride() {
    let cfg = BanditConfig::new(2, 95, 0.2).with_beta(BetaSchedule::Constant { value: 2.0 });
    let r = run_trial_with(&cfg, 0, &SnapshotSchedule::Stride { every: 10 }).unwrap();
    let ts: Vec<usize> = r.diagnostics.iter().map(|p| p.snapshot.t).collect();
    assert_eq!(ts, vec![10, 20, 30, 40, 50, 60, 70, 80, 90, 95]);
    assert!(r
        .diagnostics
        .windows(2)
        .all(|w| w[0].regret_so_far <= w[1].regret_so_far + 1e-12));
}
