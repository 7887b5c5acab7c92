//! Dense symmetric eigen machinery.
//!
//! Everything downstream reads the design covariance through [`EigenPairs`]:
//! a full decomposition with values sorted non-increasingly and a fixed sign
//! convention on the vectors, so two decompositions of the same matrix are
//! comparable column by column.

mod jacobi;
mod secular;
mod sphere;

pub use jacobi::eig_sym;
pub use secular::{rank_one_update, SECULAR_MAX_ITERATIONS, SECULAR_REL_TOL};
pub use sphere::{orthonormal_complement, project_sphere, DEGENERATE_NORM};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Eigenvalues (non-increasing) and matching orthonormal eigenvectors
/// (column `i` pairs with value `i`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPairs {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
}

impl EigenPairs {
    /// `c·I_d` with the canonical basis.
    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        Self {
            values: DVector::from_element(dim, c),
            vectors: DMatrix::identity(dim, dim),
        }
    }

    /// Sorts the pairs non-increasingly and applies the sign convention.
    pub(crate) fn from_unsorted(values: Vec<f64>, vectors: DMatrix<f64>) -> Self {
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        // Stable sort keeps tie order deterministic.
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        let mut sorted_vectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            let mut col = vectors.column(src).into_owned();
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
            }
            apply_sign_convention(&mut col);
            sorted_vectors.set_column(dst, &col);
        }
        Self {
            values: DVector::from_iterator(n, order.iter().map(|&i| values[i])),
            vectors: sorted_vectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn largest(&self) -> f64 {
        self.values[0]
    }

    pub fn smallest(&self) -> f64 {
        self.values[self.dim() - 1]
    }

    pub fn trace(&self) -> f64 {
        self.values.sum()
    }

    /// `Σ λ_i v_i v_iᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = &self.vectors * DMatrix::from_diagonal(&self.values);
        scaled * self.vectors.transpose()
    }

    /// Coordinates of `x` in the eigenbasis, `Vᵀx`.
    pub fn coords(&self, x: &DVector<f64>) -> DVector<f64> {
        self.vectors.tr_mul(x)
    }

    /// Maps eigen-coordinates back to the ambient space, `V c`.
    pub fn from_coords(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.vectors * c
    }

    /// Solves `A x = b` through the decomposition.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut c = self.coords(b);
        for (ci, li) in c.iter_mut().zip(self.values.iter()) {
            *ci /= li;
        }
        self.from_coords(&c)
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &DVector<f64>) -> f64 {
        self.coords(x)
            .iter()
            .zip(self.values.iter())
            .map(|(c, l)| l * c * c)
            .sum()
    }

    /// `xᵀ A⁻¹ x`.
    pub fn inverse_quadratic_form(&self, x: &DVector<f64>) -> f64 {
        self.coords(x)
            .iter()
            .zip(self.values.iter())
            .map(|(c, l)| c * c / l)
            .sum()
    }
}

/// Flips `v` so its largest-magnitude coordinate is non-negative. Ties go to
/// the lowest index.
pub(crate) fn apply_sign_convention(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
}
