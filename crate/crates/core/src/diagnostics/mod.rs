//! Observable spectral and estimation diagnostics of a LinUCB run.

mod mab;

pub use mab::{mab_balance, MabBalance};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::engine::{stability_threshold, CovarianceState, DiagnosticPoint, EstimatorState};
use crate::error::{Error, Result};

/// Spectral and error summary of the state after round `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSnapshot {
    pub t: usize,
    pub lambda_min: f64,
    /// Mean of the non-leading eigenvalues.
    pub lambda_bar: f64,
    pub lambda_top: f64,
    /// `λ_{t,d} / (β√t)`.
    pub c_t: f64,
    /// `√(2β²t/(d+1))`.
    pub benchmark: f64,
    /// `λ_{t,i}/benchmark − 1` for `i = 2..d`.
    pub delta_i: Vec<f64>,
    /// Distance from the top eigenvector to `±θ⋆`.
    pub align_star: f64,
    /// Distance from the top eigenvector to `±θ̂_t`.
    pub align_hat: f64,
    pub ratio_2d: f64,
    /// `‖θ̄_t − θ⋆‖_{Λ_t}`.
    pub weighted_err: f64,
    /// `‖θ̄_t − θ⋆‖₂`.
    pub plain_err: f64,
}

/// `(λ*_t, n_eff)`, both `√(2β²t/(d+1))`.
pub fn eigen_benchmark(beta: f64, t: f64, d: usize) -> Result<(f64, f64)> {
    if d < 2 {
        return Err(Error::DimensionTooSmall(d));
    }
    if !(beta > 0.0 && t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "beta={beta}, t={t} must be positive"
        )));
    }
    let v = (2.0 * beta * beta * t / (d as f64 + 1.0)).sqrt();
    Ok((v, v))
}

/// Sign-invariant distance between a unit eigenvector and a unit direction.
fn axis_distance(v: &DVector<f64>, u: &DVector<f64>) -> f64 {
    (v - u).norm().min((v + u).norm())
}

/// Reads every diagnostic off the maintained eigendecomposition.
pub fn phase_snapshot(
    cov: &CovarianceState,
    est: &EstimatorState,
    theta_star: &DVector<f64>,
    beta: f64,
) -> Result<PhaseSnapshot> {
    let d = cov.dim();
    if theta_star.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: theta_star.len(),
        });
    }
    let pairs = cov.pairs();
    let values = pairs.values();
    let t = cov.t();
    let tf = t as f64;
    let lambda_top = values[0];
    let lambda_min = values[d - 1];
    let lambda_bar = values.rows(1, d - 1).sum() / (d - 1) as f64;
    let benchmark = (2.0 * beta * beta * tf / (d as f64 + 1.0)).sqrt();
    let top = pairs.vectors().column(0).into_owned();
    let err = &est.theta_bar - theta_star;
    Ok(PhaseSnapshot {
        t,
        lambda_min,
        lambda_bar,
        lambda_top,
        c_t: lambda_min / (beta * tf.sqrt()),
        benchmark,
        delta_i: values.iter().skip(1).map(|l| l / benchmark - 1.0).collect(),
        align_star: axis_distance(&top, theta_star),
        align_hat: axis_distance(&top, &est.theta_hat),
        ratio_2d: values[1] / lambda_min,
        weighted_err: err.dot(&(cov.lambda_matrix() * &err)).max(0.0).sqrt(),
        plain_err: err.norm(),
    })
}

/// `max_t ‖θ̄_t − θ⋆‖_{Λ_t}` over the recorded snapshots.
pub fn weighted_error_max(series: &[PhaseSnapshot]) -> Result<f64> {
    series
        .iter()
        .map(|s| s.weighted_err)
        .reduce(f64::max)
        .ok_or_else(|| Error::NotEnoughData("empty snapshot series".into()))
}

/// Ordinary least squares of `log value` on `log t`; returns
/// `(slope, intercept)`.
pub fn slope_fit(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::NotEnoughData(format!(
            "slope fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    if let Some(&(t, v)) = points.iter().find(|(t, v)| !(*t > 0.0 && *v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "non-positive point ({t}, {v})"
        )));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all abscissae are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Points with `t` in the last decade `(t_max/10, t_max]`.
pub fn last_decade(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let t_max = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    points
        .iter()
        .copied()
        .filter(|p| p.0 >= t_max / 10.0)
        .collect()
}

/// Rounds at which diagnostics are recorded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SnapshotSchedule {
    /// `t = ⌈ratio^k⌉`, deduplicated.
    Geometric { ratio: f64 },
    /// Every `every` rounds.
    Stride { every: usize },
}

impl Default for SnapshotSchedule {
    fn default() -> Self {
        SnapshotSchedule::Geometric { ratio: 1.1 }
    }
}

impl SnapshotSchedule {
    /// Increasing recording rounds in `1..=horizon`, always ending at `horizon`.
    pub fn rounds(&self, horizon: usize) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        match *self {
            SnapshotSchedule::Geometric { ratio } => {
                if !(ratio > 1.0 && ratio.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "geometric ratio must exceed 1, got {ratio}"
                    )));
                }
                let mut k = 0i32;
                loop {
                    let t = ratio.powi(k).ceil();
                    if t > horizon as f64 {
                        break;
                    }
                    let t = t as usize;
                    if out.last() != Some(&t) {
                        out.push(t);
                    }
                    k += 1;
                }
            }
            SnapshotSchedule::Stride { every } => {
                if every == 0 {
                    return Err(Error::InvalidConfig("stride must be at least 1".into()));
                }
                out.extend((every..=horizon).step_by(every));
            }
        }
        if out.last() != Some(&horizon) && horizon > 0 {
            out.push(horizon);
        }
        Ok(out)
    }
}

/// Whether `β` exceeds `d²(σ√(d + log log T) + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub beta: f64,
    pub threshold: f64,
    pub ratio: f64,
    pub exceeds: bool,
}

pub fn stability_check(beta: f64, sigma: f64, d: usize, horizon: f64) -> Result<StabilityReport> {
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "beta must be positive, got {beta}"
        )));
    }
    let threshold = stability_threshold(sigma, d, horizon)?;
    let ratio = beta / threshold;
    Ok(StabilityReport {
        beta,
        threshold,
        ratio,
        exceeds: ratio > 1.0,
    })
}

/// Multipliers on the order-of-magnitude bands used to locate phase
/// boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseBands {
    /// Top-eigenvector misalignment `≤ c3·(σ√(d+log log T)+1)/√λ_{t,d}`.
    pub c3: f64,
    /// `λ_{t,2}/λ_{t,d} − 1 ≤ c4·d(σ√(d+log log T)+1)/β`.
    pub c4: f64,
}

impl Default for PhaseBands {
    fn default() -> Self {
        Self { c3: 5.0, c4: 1.0 }
    }
}

/// Phase boundaries and fitted rates of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub horizon: usize,
    pub beta: f64,
    /// Absent when `β = 0` or `T < 3`.
    pub stability: Option<StabilityReport>,
    pub bands: PhaseBands,
    /// First recorded `t` with `β/√λ_{t,d} ≤ 1`.
    pub t1: Option<usize>,
    /// First recorded `t` from which the alignment band holds to the end.
    pub t2: Option<usize>,
    /// First recorded `t` from which the near-equality band holds to the end.
    pub t3: Option<usize>,
    pub weighted_err_max: f64,
    /// Log-log slope of `λ_{t,d}` over the last decade.
    pub min_eig_slope: Option<f64>,
    /// Log-log slope of `‖θ̄_t − θ⋆‖₂` over the last decade.
    pub error_slope: Option<f64>,
    pub final_snapshot: PhaseSnapshot,
    pub regret: f64,
}

fn first_holding_to_end(
    series: &[PhaseSnapshot],
    holds: impl Fn(&PhaseSnapshot) -> bool,
) -> Option<usize> {
    let mut start = None;
    for s in series {
        if holds(s) {
            start.get_or_insert(s.t);
        } else {
            start = None;
        }
    }
    start
}

/// Locates phase boundaries on a recorded diagnostic series.
pub fn phase_report(
    points: &[DiagnosticPoint],
    beta: f64,
    sigma: f64,
    d: usize,
    horizon: usize,
    bands: PhaseBands,
) -> Result<PhaseReport> {
    let series: Vec<PhaseSnapshot> = points.iter().map(|p| p.snapshot.clone()).collect();
    let last = points
        .last()
        .ok_or_else(|| Error::NotEnoughData("no diagnostics recorded".into()))?;
    let stability = stability_check(beta, sigma, d, horizon as f64).ok();
    let noise_scale = sigma * (d as f64 + (horizon as f64).max(3.0).ln().ln()).sqrt() + 1.0;

    let t1 = series
        .iter()
        .find(|s| beta / s.lambda_min.sqrt() <= 1.0)
        .map(|s| s.t);
    let t2 = first_holding_to_end(&series, |s| {
        let band = bands.c3 * noise_scale / s.lambda_min.sqrt();
        s.align_star <= band && s.align_hat <= band
    });
    let t3 = first_holding_to_end(&series, |s| {
        s.ratio_2d - 1.0 <= bands.c4 * d as f64 * noise_scale / beta
    });

    let fit = |f: fn(&PhaseSnapshot) -> f64| -> Option<f64> {
        let pts: Vec<(f64, f64)> = series
            .iter()
            .filter(|s| s.t > 0)
            .map(|s| (s.t as f64, f(s)))
            .collect();
        slope_fit(&last_decade(&pts)).ok().map(|(slope, _)| slope)
    };

    Ok(PhaseReport {
        horizon,
        beta,
        stability,
        bands,
        t1,
        t2,
        t3,
        weighted_err_max: weighted_error_max(&series)?,
        min_eig_slope: fit(|s| s.lambda_min),
        error_slope: fit(|s| s.plain_err),
        final_snapshot: last.snapshot.clone(),
        regret: last.regret_so_far,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{init_state, BanditConfig};
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn estimator(theta_bar: DVector<f64>, theta_hat: DVector<f64>) -> EstimatorState {
        let d = theta_bar.len();
        EstimatorState {
            b_vec: DVector::zeros(d),
            theta_bar,
            theta_hat,
            eta_oracle: DVector::zeros(d),
        }
    }

    #[test]
    fn benchmark_reference() {
        let (l, n) = eigen_benchmark(5.0, 1e4, 3).unwrap();
        assert_eq!(l, n);
        assert!((l - 125_000.0_f64.sqrt()).abs() < 1e-9);
        assert!((l - 353.553).abs() < 1e-3);
        let (l4, _) = eigen_benchmark(5.0, 4e4, 3).unwrap();
        assert!((l4 / l - 2.0).abs() < 1e-14);
        assert!(matches!(
            eigen_benchmark(5.0, 1e4, 1),
            Err(Error::DimensionTooSmall(1))
        ));
    }

    #[test]
    fn snapshot_at_start() {
        let cfg = BanditConfig::new(3, 10, 1.0);
        let (cov, est) = init_state(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let s =
            phase_snapshot(&cov, &est, &DVector::from_vec(cfg.theta_star.clone()), 2.0).unwrap();
        assert_eq!(
            (s.lambda_min, s.lambda_bar, s.lambda_top, s.ratio_2d),
            (1.0, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn snapshot_of_fixed_matrix() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![9.0, 4.0, 1.0]));
        let cov = CovarianceState::from_matrix(m, 1.0, 11).unwrap();
        let star = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let bar = DVector::from_vec(vec![0.5, 0.5, 0.0]);
        let hat = &bar / bar.norm();
        let s = phase_snapshot(&cov, &estimator(bar.clone(), hat.clone()), &star, 2.0).unwrap();
        assert_eq!(s.lambda_bar, 2.5);
        assert_eq!(s.ratio_2d, 4.0);
        assert_eq!(s.align_star, 0.0);
        assert!((s.align_hat - (&star - &hat).norm()).abs() < 1e-15);
        assert!((s.weighted_err - (9.0 * 0.25 + 4.0 * 0.25_f64).sqrt()).abs() < 1e-14);
        assert!((s.plain_err - 0.5_f64.sqrt()).abs() < 1e-15);
        assert!((s.c_t - 1.0 / (2.0 * 11.0_f64.sqrt())).abs() < 1e-15);
        for (i, delta) in s.delta_i.iter().enumerate() {
            let lam = cov.pairs().values()[i + 1];
            assert!((s.benchmark * (1.0 + delta) - lam).abs() < 1e-9);
        }
        assert!(s.lambda_min <= s.lambda_bar && s.lambda_bar <= s.lambda_top);
    }

    #[test]
    fn slope_recovers_power_laws() {
        let pts: Vec<(f64, f64)> = (1..50)
            .map(|k| (k as f64 * 7.0, (k as f64 * 7.0).powf(-0.25)))
            .collect();
        let (slope, intercept) = slope_fit(&pts).unwrap();
        assert!((slope + 0.25).abs() < 1e-12 && intercept.abs() < 1e-12);
        let pts: Vec<(f64, f64)> = (1..50)
            .map(|k| (k as f64, 3.0 * (k as f64).sqrt()))
            .collect();
        let (slope, intercept) = slope_fit(&pts).unwrap();
        assert!((slope - 0.5).abs() < 1e-12 && (intercept - 3.0_f64.ln()).abs() < 1e-12);
        let (slope, _) = slope_fit(&[(2.0, 5.0), (8.0, 20.0)]).unwrap();
        assert!((slope - 1.0).abs() < 1e-14);
        assert!(slope_fit(&[(1.0, 1.0)]).is_err());
        assert!(slope_fit(&[(1.0, 1.0), (2.0, 0.0)]).is_err());
    }

    #[test]
    fn weighted_error_max_is_running_max() {
        let base = PhaseSnapshot {
            t: 1,
            lambda_min: 1.0,
            lambda_bar: 1.0,
            lambda_top: 1.0,
            c_t: 1.0,
            benchmark: 1.0,
            delta_i: vec![0.0],
            align_star: 0.0,
            align_hat: 0.0,
            ratio_2d: 1.0,
            weighted_err: 0.3,
            plain_err: 0.1,
        };
        let mut series = vec![base.clone()];
        assert_eq!(weighted_error_max(&series).unwrap(), 0.3);
        let mut prev = 0.3;
        for (k, w) in [0.1, 0.7, 0.2, 0.9].into_iter().enumerate() {
            series.push(PhaseSnapshot {
                t: k + 2,
                weighted_err: w,
                ..base.clone()
            });
            let m = weighted_error_max(&series).unwrap();
            assert!(m >= prev);
            prev = m;
        }
        assert_eq!(prev, 0.9);
        assert!(weighted_error_max(&[]).is_err());
    }

    #[test]
    fn geometric_schedule() {
        let r = SnapshotSchedule::default().rounds(30).unwrap();
        assert_eq!(&r[..6], &[1, 2, 3, 4, 5, 6]);
        assert!(r.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*r.last().unwrap(), 30);
        let r = SnapshotSchedule::Stride { every: 4 }.rounds(10).unwrap();
        assert_eq!(r, vec![4, 8, 10]);
        assert!(SnapshotSchedule::Geometric { ratio: 1.0 }
            .rounds(10)
            .is_err());
    }

    #[test]
    fn stability_ratios() {
        let t = std::f64::consts::E.powf(std::f64::consts::E);
        let thr = stability_threshold(1.0, 2, t).unwrap();
        assert!((stability_check(thr, 1.0, 2, t).unwrap().ratio - 1.0).abs() < 1e-15);
        let r = stability_check(2.0 * thr, 1.0, 2, t).unwrap();
        assert!((r.ratio - 2.0).abs() < 1e-15 && r.exceeds);
        // 43.712 is twice 8(√3+1); the threshold at c = 1 is 4(√3+1).
        let r = stability_check(43.712, 1.0, 2, t).unwrap();
        assert!((r.ratio - 4.0).abs() < 1e-4);
        assert!(stability_check(1.0, 1.0, 2, 2.0).is_err());
    }
}
