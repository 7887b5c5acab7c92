//! Exact LinUCB maximization over the unit ball.
//!
//! The maximizer is `a = P(θ̂ + βΛ^{-1/2}w)` where `w` maximizes
//! `‖θ̂ + βΛ^{-1/2}w‖` over the unit sphere. In the eigenbasis of `Λ` that is
//! `max Σ (ν_i + α_i w_i)²` with `α_i = β/√λ_i`, a sphere-constrained convex
//! quadratic. Its KKT point is `w_i = b_i / (μ − α_i²)` with `b_i = α_i ν_i`
//! and `μ > max α_i²` the root of `Σ (b_i/(μ − α_i²))² = 1`; when the
//! top-`α` group has no `b` weight the multiplier may sit on `max α_i²`
//! (the trust-region hard case).

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CovarianceState;
use crate::eigen::{project_sphere, EigenPairs};
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 200;
/// Eigenvalues within this relative distance of the minimum share its group.
const GROUP_TOL: f64 = 1e-12;
/// `b` weight on the top group below this fraction of `‖b‖` counts as zero.
const HARD_CASE_TOL: f64 = 1e-12;

const FALLBACK_STARTS: usize = 8;
const FALLBACK_SEED: u64 = 0x5eed_f00d;
const FALLBACK_ITERATIONS: usize = 20_000;

/// The chosen action with its spectral coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDecomposition {
    pub action: DVector<f64>,
    /// Inner maximizer `w_t`, in ambient coordinates.
    pub w_opt: DVector<f64>,
    /// `⟨v_i, a_t⟩`.
    pub kappa: DVector<f64>,
    /// `⟨v_i, θ̂_t⟩`.
    pub nu: DVector<f64>,
    /// `⟨a_t, θ̂_t⟩`.
    pub alpha: f64,
    /// `‖a_t − α_t θ̂_t‖`.
    pub xi_norm: f64,
    pub ucb_value: f64,
    /// Set when the KKT root solve failed and projected ascent was used.
    pub fallback: bool,
}

/// `⟨a, θ̂⟩ + β√(aᵀΛ⁻¹a)`.
pub fn ucb_score(
    cov: &CovarianceState,
    theta_hat: &DVector<f64>,
    beta: f64,
    a: &DVector<f64>,
) -> f64 {
    let exploit = a.dot(theta_hat);
    if beta == 0.0 {
        return exploit;
    }
    exploit + beta * cov.pairs().inverse_quadratic_form(a).sqrt()
}

/// Maximizes the UCB score over the unit ball.
pub fn select_action(
    cov: &CovarianceState,
    theta_hat: &DVector<f64>,
    beta: f64,
) -> Result<ActionDecomposition> {
    select_action_with(cov.pairs(), theta_hat, beta, false)
}

pub(crate) fn select_action_with(
    pairs: &EigenPairs,
    theta_hat: &DVector<f64>,
    beta: f64,
    force_fallback: bool,
) -> Result<ActionDecomposition> {
    let d = pairs.dim();
    if theta_hat.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: theta_hat.len(),
        });
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "beta must be non-negative, got {beta}"
        )));
    }
    let nu = pairs.coords(theta_hat);
    let lambdas = pairs.values();

    let (w, fallback) = if beta == 0.0 {
        // Objective is constant in w; keep the aligned choice.
        (nu.clone(), false)
    } else {
        let alpha: Vec<f64> = lambdas.iter().map(|l| beta / l.sqrt()).collect();
        let solved = if force_fallback {
            Err(Error::NoConvergence("forced".into()))
        } else {
            solve_kkt(&nu, lambdas, beta)
        };
        match solved {
            Ok(w) => (w, false),
            Err(_) => (maximize_by_ascent(&nu, &alpha), true),
        }
    };

    // y = θ̂ + βΛ^{-1/2}w in eigen coordinates.
    let y = DVector::from_iterator(d, (0..d).map(|i| nu[i] + beta * w[i] / lambdas[i].sqrt()));
    let ynorm = y.norm();
    let kappa = y / ynorm;
    let mut action = pairs.from_coords(&kappa);
    let anorm = action.norm();
    action /= anorm;

    let alpha = action.dot(theta_hat);
    let xi_norm = (&action - theta_hat * alpha).norm();
    let exploit = alpha;
    let bonus = if beta == 0.0 {
        0.0
    } else {
        beta * pairs.inverse_quadratic_form(&action).sqrt()
    };
    Ok(ActionDecomposition {
        w_opt: pairs.from_coords(&w),
        action,
        kappa,
        nu,
        alpha,
        xi_norm,
        ucb_value: exploit + bonus,
        fallback,
    })
}

/// KKT solution `w` (eigen coordinates) of `max_{‖w‖=1} Σ (ν_i + α_i w_i)²`.
fn solve_kkt(nu: &DVector<f64>, lambdas: &DVector<f64>, beta: f64) -> Result<DVector<f64>> {
    let d = nu.len();
    let lmin = lambdas[d - 1];
    let beta2 = beta * beta;
    let in_top = |i: usize| lambdas[i] - lmin <= GROUP_TOL * lmin;

    let mut b: Vec<f64> = (0..d).map(|i| beta * nu[i] / lambdas[i].sqrt()).collect();
    // μ − α_i² = τ + gap_i with τ = μ − α_max².
    let gap: Vec<f64> = (0..d)
        .map(|i| {
            if in_top(i) {
                0.0
            } else {
                beta2 * (1.0 / lmin - 1.0 / lambdas[i])
            }
        })
        .collect();
    let bnorm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Err(Error::InvalidArgument("theta_hat has no weight".into()));
    }

    let top_is_empty = (0..d)
        .filter(|&i| in_top(i))
        .all(|i| b[i].abs() < HARD_CASE_TOL * bnorm);
    if top_is_empty {
        let mut w = DVector::zeros(d);
        let mut used = 0.0;
        for i in (0..d).filter(|&i| !in_top(i)) {
            w[i] = b[i] / gap[i];
            used += w[i] * w[i];
        }
        let residual = 1.0 - used;
        if residual >= 0.0 {
            let first = (0..d).find(|&i| in_top(i)).expect("top group is non-empty");
            w[first] = residual.sqrt();
            return Ok(w);
        }
        for i in (0..d).filter(|&i| in_top(i)) {
            b[i] = 0.0;
        }
    }

    let wnorm = |tau: f64| -> (f64, f64) {
        // (‖w(τ)‖², Σ b²/(τ+g)³)
        let mut s2 = 0.0;
        let mut s3 = 0.0;
        for (bi, gi) in b.iter().zip(&gap) {
            let den = tau + gi;
            let q = bi * bi / (den * den);
            s2 += q;
            s3 += q / den;
        }
        (s2, s3)
    };

    // ψ(τ) = 1/‖w(τ)‖ − 1 is increasing; ψ(0⁺) < 0 ≤ ψ(‖b‖).
    let mut lo = 0.0;
    let mut hi = bnorm;
    let mut tau = 0.5 * hi;
    let mut last_step = hi - lo;
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        let (s2, s3) = wnorm(tau);
        let norm = s2.sqrt();
        let psi = 1.0 / norm - 1.0;
        if psi == 0.0 {
            converged = true;
            break;
        }
        if psi < 0.0 {
            lo = tau;
        } else {
            hi = tau;
        }
        let dpsi = s3 / (norm * s2);
        let newton = tau - psi / dpsi;
        let next = if newton.is_finite()
            && newton > lo
            && newton < hi
            && (2.0 * psi).abs() <= (last_step * dpsi).abs()
        {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - tau).abs();
        last_step = step;
        tau = next;
        if step <= 4.0 * f64::EPSILON * tau || hi - lo <= 4.0 * f64::EPSILON * tau {
            converged = true;
            break;
        }
    }
    if !converged || !(tau > 0.0) {
        return Err(Error::NoConvergence("KKT multiplier".into()));
    }
    Ok(DVector::from_iterator(
        d,
        (0..d).map(|i| b[i] / (tau + gap[i])),
    ))
}

/// Fixed-point ascent `w ← P(∇F(w))` from several seeded starts. The
/// objective is convex, so each step does not decrease it.
fn maximize_by_ascent(nu: &DVector<f64>, alpha: &[f64]) -> DVector<f64> {
    let d = nu.len();
    let objective =
        |w: &DVector<f64>| -> f64 { (0..d).map(|i| (nu[i] + alpha[i] * w[i]).powi(2)).sum() };
    let mut rng = ChaCha8Rng::seed_from_u64(FALLBACK_SEED);
    let mut best = nu.clone();
    let mut best_val = f64::NEG_INFINITY;
    for start in 0..FALLBACK_STARTS {
        let mut w = if start == 0 {
            nu.clone()
        } else {
            project_sphere(&DVector::zeros(d), &mut rng)
        };
        for _ in 0..FALLBACK_ITERATIONS {
            let grad =
                DVector::from_iterator(d, (0..d).map(|i| alpha[i] * (nu[i] + alpha[i] * w[i])));
            let next = project_sphere(&grad, &mut rng);
            let moved = (&next - &w).amax();
            w = next;
            if moved < 1e-15 {
                break;
            }
        }
        let val = objective(&w);
        if val > best_val {
            best_val = val;
            best = w;
        }
    }
    best
}
