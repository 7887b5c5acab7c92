use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_BISECTIONS: usize = 2000;

/// Limiting pull counts of UCB on a `K`-armed bandit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MabBalance {
    pub counts: Vec<f64>,
    /// The common index `μ_a + β/√n_a`.
    pub level: f64,
}

/// Solves `μ_a + β/√n_a = L` for all arms with `Σ n_a = T`.
///
/// `n_a(L) = (β/(L − μ_a))²` is decreasing in `L`, so the level is found by
/// bisection on the offset `x = L − max μ` over `(0, β√(K/T) + β]` followed
/// by Newton polishing.
pub fn mab_balance(mu: &[f64], beta: f64, horizon: f64) -> Result<MabBalance> {
    let k = mu.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 arms, got {k}"
        )));
    }
    if mu.iter().any(|m| !m.is_finite()) {
        return Err(Error::InvalidArgument("arm means must be finite".into()));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "beta must be positive, got {beta}"
        )));
    }
    if !(horizon >= k as f64 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need T >= K, got T={horizon}, K={k}"
        )));
    }
    let kf = k as f64;
    let top = mu.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let gaps: Vec<f64> = mu.iter().map(|m| top - m).collect();

    if gaps.iter().all(|&g| g == 0.0) {
        return Ok(MabBalance {
            counts: vec![horizon / kf; k],
            level: top + beta * (kf / horizon).sqrt(),
        });
    }

    let excess =
        |x: f64| -> f64 { gaps.iter().map(|g| (beta / (x + g)).powi(2)).sum::<f64>() - horizon };
    let mut lo = 0.0;
    let mut hi = beta * (kf / horizon).sqrt() + beta;
    debug_assert!(excess(hi) <= 0.0);
    let mut converged = false;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            converged = true;
            break;
        }
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if !converged {
        return Err(Error::NoConvergence("balancing level".into()));
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..3 {
        let f = excess(x);
        let df: f64 = gaps
            .iter()
            .map(|g| -2.0 * beta * beta / (x + g).powi(3))
            .sum();
        let next = x - f / df;
        if next > 0.0 && excess(next).abs() < f.abs() {
            x = next;
        } else {
            break;
        }
    }
    let counts: Vec<f64> = gaps.iter().map(|g| (beta / (x + g)).powi(2)).collect();
    let total: f64 = counts.iter().sum();
    if (total - horizon).abs() > 1e-6 {
        return Err(Error::NoConvergence(format!(
            "balancing counts sum to {total}, expected {horizon}"
        )));
    }
    Ok(MabBalance {
        counts,
        level: top + x,
    })
}
