use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Below this norm the radial projection is undefined and a random direction
/// is drawn instead.
pub const DEGENERATE_NORM: f64 = 1e-12;

const UNIT_TOL: f64 = 1e-10;

/// `x / ‖x‖₂`, or a uniformly random unit vector from `rng` when `x` is
/// (numerically) zero. The generator is only touched in the degenerate case.
pub fn project_sphere<R: Rng + ?Sized>(x: &DVector<f64>, rng: &mut R) -> DVector<f64> {
    let norm = x.norm();
    if norm >= DEGENERATE_NORM && norm.is_finite() {
        return x / norm;
    }
    random_unit(x.len(), rng)
}

pub(crate) fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let g = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = g.norm();
        if norm > DEGENERATE_NORM {
            return g / norm;
        }
    }
}

/// A `d × (d−1)` matrix whose columns are an orthonormal basis of `v⊥`.
///
/// Built from the Householder reflector that maps `v` onto its
/// largest-magnitude axis, so `v` and `−v` yield the same basis.
pub fn orthonormal_complement(v: &DVector<f64>) -> Result<DMatrix<f64>> {
    let d = v.len();
    if d < 2 {
        return Err(Error::DimensionTooSmall(d));
    }
    let norm = v.norm();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NotUnit(norm));
    }
    let k = v.iamax();
    let mut w = v.clone();
    w[k] += v[k].signum();
    let ww = w.norm_squared();
    let mut basis = DMatrix::zeros(d, d - 1);
    let mut col = 0;
    for j in 0..d {
        if j == k {
            continue;
        }
        // Column j of H = I − 2 w wᵀ / (wᵀw).
        for i in 0..d {
            let e = if i == j { 1.0 } else { 0.0 };
            basis[(i, col)] = e - 2.0 * w[i] * w[j] / ww;
        }
        col += 1;
    }
    Ok(basis)
}
