//! Dimension reduction by truncating the prior covariance spectrum.
//!
//! The prior covariance is decomposed as Σ_pr = U Λ Uᵀ and the unknown is
//! parameterized by the first `r` scaled singular vectors,
//! `x ≈ x₀ + P_r α` with `P_r = [√λ₁·u₁ … √λ_r·u_r]` and a standard normal
//! prior on α. The sampler then explores ℝʳ instead of ℝⁿ; directions
//! outside the span of `P_r` are frozen at the prior mean.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::{GaussianPrior, InverseProblem};
use crate::linalg;

/// Truncated prior basis with the full singular-value spectrum retained for
/// diagnostics.
#[derive(Debug, Clone)]
pub struct PriorBasis {
    rank: usize,
    basis: DMatrix<f64>,
    singular_values: DVector<f64>,
}

impl PriorBasis {
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// The n×r matrix whose column i is `√λ_i · u_i`.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// All n singular values of Σ_pr, descending.
    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }
}

/// Decomposes the prior covariance and keeps the `r` leading directions.
/// Column signs follow the deterministic convention of
/// [`linalg::sorted_symmetric_eigen`], so the basis is reproducible.
pub fn build_prior_basis(prior: &GaussianPrior, rank: usize) -> Result<PriorBasis> {
    let n = prior.dim();
    if rank == 0 || rank > n {
        return Err(Error::invalid(format!(
            "prior basis rank must be in 1..={n}, got {rank}"
        )));
    }
    let (values, vectors) = linalg::sorted_symmetric_eigen(prior.covariance());
    let mut basis = DMatrix::zeros(n, rank);
    for i in 0..rank {
        let scale = values[i].max(0.0).sqrt();
        basis.set_column(i, &(vectors.column(i) * scale));
    }
    Ok(PriorBasis {
        rank,
        basis,
        singular_values: values,
    })
}

/// Maps reduced coordinates back to state space: `x₀ + P_r α`.
pub fn lift(alpha: &DVector<f64>, basis: &PriorBasis, prior: &GaussianPrior) -> Result<DVector<f64>> {
    if alpha.len() != basis.rank {
        return Err(Error::DimensionMismatch {
            axis: "reduced coordinates",
            expected: basis.rank,
            actual: alpha.len(),
        });
    }
    Ok(prior.mean() + &basis.basis * alpha)
}

/// Unnormalized reduced log-posterior `−η(x₀+P_r α) − ½‖α‖²`.
pub fn reduced_log_posterior(
    alpha: &DVector<f64>,
    problem: &InverseProblem,
    basis: &PriorBasis,
) -> Result<f64> {
    let x = lift(alpha, basis, &problem.prior)?;
    Ok(-problem.misfit(&x)? - 0.5 * alpha.norm_squared())
}
