//! Rank-one update `A + u uᵀ` of a known eigendecomposition.
//!
//! The new eigenvalues are the roots of the secular equation
//! `f(λ) = 1 + Σ z_i² / (d_i − λ)` where `z = Vᵀu`. Each root is located in
//! its interlacing interval and stored as an offset `τ` from the nearer pole
//! so that differences `λ̃ − d_i` stay accurate. Eigenvectors are assembled
//! from a recomputed `ẑ` (Gu–Eisenstat), which keeps them orthogonal even when
//! roots crowd against poles.

use nalgebra::{DMatrix, DVector};

use super::EigenPairs;
use crate::error::{Error, Result};

/// Relative tolerance on the root offset.
pub const SECULAR_REL_TOL: f64 = 1e-13;
pub const SECULAR_MAX_ITERATIONS: usize = 200;

/// Components of `z` below this fraction of `‖u‖` are deflated.
const DEFLATE_Z: f64 = 1e-12;
/// Eigenvalues within this relative distance are merged before solving.
const DEFLATE_EQUAL: f64 = 1e-12;

/// Eigenpairs of `A + u uᵀ` given those of `A`.
pub fn rank_one_update(pairs: &EigenPairs, u: &DVector<f64>) -> Result<EigenPairs> {
    let n = pairs.dim();
    if u.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: u.len(),
        });
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "update vector has non-finite entries".into(),
        ));
    }
    let unorm = u.norm();
    if unorm == 0.0 {
        return Ok(pairs.clone());
    }

    // Ascending working order.
    let mut d: Vec<f64> = (0..n).rev().map(|i| pairs.values()[i]).collect();
    let mut q = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        q.set_column(k, &pairs.vectors().column(n - 1 - k));
    }
    let mut z: Vec<f64> = q.tr_mul(u).iter().copied().collect();

    let ztol = DEFLATE_Z * unorm;
    let mut active: Vec<usize> = Vec::with_capacity(n);
    for k in 0..n {
        if z[k].abs() < ztol {
            z[k] = 0.0;
            continue;
        }
        if let Some(&p) = active.last() {
            if d[k] - d[p] <= DEFLATE_EQUAL * d[k].abs() {
                // Rotate the pair so all of z's weight lands on k; p keeps its
                // value with z_p = 0.
                let r = z[p].hypot(z[k]);
                let c = z[k] / r;
                let s = z[p] / r;
                for row in 0..n {
                    let vp = q[(row, p)];
                    let vk = q[(row, k)];
                    q[(row, p)] = c * vp - s * vk;
                    q[(row, k)] = s * vp + c * vk;
                }
                z[p] = 0.0;
                z[k] = r;
                d[k] = d[p].max(d[k]);
                active.pop();
            }
        }
        active.push(k);
    }

    let m = active.len();
    let dd: Vec<f64> = active.iter().map(|&k| d[k]).collect();
    let zz: Vec<f64> = active.iter().map(|&k| z[k]).collect();
    let zz2: Vec<f64> = zz.iter().map(|x| x * x).collect();
    let zsum: f64 = zz2.iter().sum();

    let roots = if m == 1 {
        vec![(0, zsum)]
    } else {
        (0..m)
            .map(|j| solve_root(&dd, &zz2, zsum, j))
            .collect::<Result<Vec<_>>>()?
    };

    // λ̃_k − d_i computed without cancellation.
    let diff = |k: usize, i: usize| -> f64 {
        let (origin, tau) = roots[k];
        (dd[origin] - dd[i]) + tau
    };

    let mut zhat = vec![0.0; m];
    for i in 0..m {
        let mut prod = diff(m - 1, i);
        for k in 0..i {
            prod *= diff(k, i) / (dd[k] - dd[i]);
        }
        for k in i..(m - 1) {
            prod *= diff(k, i) / (dd[k + 1] - dd[i]);
        }
        zhat[i] = prod.abs().sqrt().copysign(zz[i]);
    }

    let mut values = d.clone();
    let mut vectors = q.clone();
    let q_active = q.select_columns(active.iter());
    for k in 0..m {
        let (origin, tau) = roots[k];
        let y = DVector::from_iterator(m, (0..m).map(|i| -zhat[i] / diff(k, i)));
        let col = &q_active * y;
        let slot = active[k];
        values[slot] = dd[origin] + tau;
        vectors.set_column(slot, &col);
    }

    Ok(EigenPairs::from_unsorted(values, vectors))
}

/// Secular function with origin `d[origin]`, evaluated at offset `tau`.
/// Returns `(f, f')`.
fn secular(dd: &[f64], zz2: &[f64], origin: usize, tau: f64) -> (f64, f64) {
    let base = dd[origin];
    let mut f = 1.0;
    let mut fp = 0.0;
    for (di, zi2) in dd.iter().zip(zz2) {
        let denom = (di - base) - tau;
        let t = zi2 / denom;
        f += t;
        fp += t / denom;
    }
    (f, fp)
}

/// Root `j` of the secular equation as `(origin index, offset)`.
fn solve_root(dd: &[f64], zz2: &[f64], zsum: f64, j: usize) -> Result<(usize, f64)> {
    let m = dd.len();
    let (origin, mut lo, mut hi) = if j + 1 < m {
        let half = (dd[j + 1] - dd[j]) / 2.0;
        let (fmid, _) = secular(dd, zz2, j, half);
        if fmid >= 0.0 {
            (j, 0.0, half)
        } else {
            (j + 1, -half, 0.0)
        }
    } else {
        (j, 0.0, zsum)
    };

    // f is increasing on the bracket; f(lo) < 0 < f(hi).
    let mut tau = 0.5 * (lo + hi);
    let mut last_step = hi - lo;
    for _ in 0..SECULAR_MAX_ITERATIONS {
        let (f, fp) = secular(dd, zz2, origin, tau);
        if f == 0.0 {
            return Ok((origin, tau));
        }
        if f < 0.0 {
            lo = tau;
        } else {
            hi = tau;
        }
        // Newton unless it leaves the bracket or fails to halve the step.
        let newton = tau - f / fp;
        let next = if newton.is_finite()
            && newton > lo
            && newton < hi
            && (2.0 * f).abs() <= (last_step * fp).abs()
        {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - tau).abs();
        last_step = step;
        tau = next;
        if step <= 4.0 * f64::EPSILON * tau.abs() || hi - lo <= 4.0 * f64::EPSILON * tau.abs() {
            return Ok((origin, tau));
        }
    }
    if hi - lo <= SECULAR_REL_TOL * tau.abs() {
        return Ok((origin, tau));
    }
    Err(Error::SecularRoot {
        index: j,
        iterations: SECULAR_MAX_ITERATIONS,
    })
}
