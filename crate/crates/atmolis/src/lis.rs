//! Likelihood-informed subspace construction and the associated parameter
//! split.
//!
//! The informative directions of a measurement are found from the
//! pre-whitened Jacobian `J̃ = L_obs⁻¹ J L_pr`: the right singular vectors
//! of `J̃` whose singular values reach 1 are exactly the directions where
//! the likelihood constrains the whitened state more than the unit prior
//! does. For nonlinear models a globalized basis is built from the Monte
//! Carlo average of `J̃` over reference samples.
//!
//! Given the leading right singular vectors `V_r`, the state space splits
//! through the oblique pair
//!
//! ```text
//! Φ_r = L_pr·V_r,   Θ_r = L_pr⁻ᵀ·V_r,   Π_r = Φ_r·Θ_rᵀ,
//! ```
//!
//! with the complement pair built from the remaining singular vectors. All
//! splits and recompositions are centered at the prior mean, so both the
//! reduced parameter `x_r` and the complement parameter `x_⊥` carry
//! independent standard normal priors and the complement can be sampled
//! analytically instead of by MCMC.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::{GaussianPrior, InverseProblem};
use crate::linalg;
use crate::rng;

/// How to pick the subspace rank from the spectrum of the averaged
/// whitened Jacobian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankSelection {
    /// Keep exactly this many directions.
    Rank(usize),
    /// Keep every direction whose singular value is at least the threshold
    /// (1.0 separates signal from noise in whitened coordinates).
    Threshold(f64),
}

/// The informativeness threshold in whitened coordinates.
pub const SIGNAL_THRESHOLD: f64 = 1.0;

/// Basis of the likelihood-informed subspace and its complement.
#[derive(Debug, Clone)]
pub struct LisBasis {
    rank: usize,
    singular_values: DVector<f64>,
    v_r: DMatrix<f64>,
    v_perp: DMatrix<f64>,
    phi_r: DMatrix<f64>,
    theta_r: DMatrix<f64>,
    phi_perp: DMatrix<f64>,
    theta_perp: DMatrix<f64>,
}

impl LisBasis {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn state_dim(&self) -> usize {
        self.v_r.nrows()
    }

    /// All n singular values of the averaged whitened Jacobian, descending.
    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    pub fn v_r(&self) -> &DMatrix<f64> {
        &self.v_r
    }

    pub fn v_perp(&self) -> &DMatrix<f64> {
        &self.v_perp
    }

    pub fn phi_r(&self) -> &DMatrix<f64> {
        &self.phi_r
    }

    pub fn theta_r(&self) -> &DMatrix<f64> {
        &self.theta_r
    }

    pub fn phi_perp(&self) -> &DMatrix<f64> {
        &self.phi_perp
    }

    pub fn theta_perp(&self) -> &DMatrix<f64> {
        &self.theta_perp
    }

    /// The rank-r oblique projection `Π_r = Φ_r·Θ_rᵀ`.
    pub fn projection(&self) -> DMatrix<f64> {
        &self.phi_r * self.theta_r.transpose()
    }
}

/// Prior-preconditioned Gauss-Newton Hessian `H̃(x) = J̃(x)ᵀ·J̃(x)`,
/// equal to `L_prᵀ Jᵀ Σ_obs⁻¹ J L_pr`. Symmetric positive semidefinite.
pub fn pp_hessian(x: &DVector<f64>, problem: &InverseProblem) -> Result<DMatrix<f64>> {
    let tilde = problem.whitened_jacobian(x)?;
    Ok(linalg::symmetrize(&(tilde.transpose() * &tilde)))
}

/// Rayleigh quotient `(vᵀ·H·v)/(vᵀ·v)`.
pub fn rayleigh(v: &DVector<f64>, hessian: &DMatrix<f64>) -> Result<f64> {
    if hessian.nrows() != v.len() || hessian.ncols() != v.len() {
        return Err(Error::DimensionMismatch {
            axis: "rayleigh quotient",
            expected: v.len(),
            actual: hessian.nrows(),
        });
    }
    let norm2 = v.norm_squared();
    if norm2 == 0.0 {
        return Err(Error::invalid(
            "rayleigh quotient of the zero vector".to_string(),
        ));
    }
    Ok((v.transpose() * hessian * v)[(0, 0)] / norm2)
}

/// Monte Carlo average of the whitened Jacobian over the given states.
/// The reduction is pairwise in sample-index order, so the result does not
/// depend on evaluation scheduling.
pub fn expected_jacobian(samples: &[DVector<f64>], problem: &InverseProblem) -> Result<DMatrix<f64>> {
    if samples.is_empty() {
        return Err(Error::invalid(
            "expected_jacobian needs at least one sample".to_string(),
        ));
    }
    let jacobians = samples
        .iter()
        .map(|x| problem.whitened_jacobian(x))
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum(&jacobians) / samples.len() as f64)
}

fn pairwise_sum(mats: &[DMatrix<f64>]) -> DMatrix<f64> {
    match mats.len() {
        1 => mats[0].clone(),
        2 => &mats[0] + &mats[1],
        len => {
            let mid = len / 2;
            pairwise_sum(&mats[..mid]) + pairwise_sum(&mats[mid..])
        }
    }
}

/// Number of singular values of a (whitened) Jacobian at or above the
/// threshold: the degrees of freedom for signal in the measurement.
pub fn dof_signal(whitened_jacobian: &DMatrix<f64>, threshold: f64) -> usize {
    linalg::singular_values(whitened_jacobian)
        .iter()
        .filter(|&&s| s >= threshold)
        .count()
}

/// Builds the LIS basis from an (averaged) whitened Jacobian.
///
/// The right singular factor is obtained from the symmetric
/// eigendecomposition of `J̃ᵀJ̃`, which always yields a complete orthonormal
/// basis of state space; eigenvalues are the squared singular values.
/// Signs follow the deterministic dominant-entry convention.
pub fn build_lis(
    j_hat: &DMatrix<f64>,
    prior: &GaussianPrior,
    selection: RankSelection,
) -> Result<LisBasis> {
    let n = prior.dim();
    if j_hat.ncols() != n {
        return Err(Error::DimensionMismatch {
            axis: "jacobian columns vs prior dim",
            expected: n,
            actual: j_hat.ncols(),
        });
    }
    let m = j_hat.nrows();
    let gram = linalg::symmetrize(&(j_hat.transpose() * j_hat));
    let (eigenvalues, vectors) = linalg::sorted_symmetric_eigen(&gram);
    let singular_values = DVector::from_fn(n, |i, _| eigenvalues[i].max(0.0).sqrt());

    let rank = match selection {
        RankSelection::Rank(r) => {
            if r == 0 || r > n.min(m) {
                return Err(Error::invalid(format!(
                    "LIS rank must be in 1..={}, got {r}",
                    n.min(m)
                )));
            }
            r
        }
        RankSelection::Threshold(tau) => {
            if !tau.is_finite() || tau <= 0.0 {
                return Err(Error::invalid(format!(
                    "LIS threshold must be positive and finite, got {tau}"
                )));
            }
            let r = singular_values.iter().filter(|&&s| s >= tau).count();
            if r == 0 {
                return Err(Error::invalid(format!(
                    "no singular value reaches the threshold {tau}; \
                     the measurement carries no informative direction at this \
                     level, supply an explicit rank instead"
                )));
            }
            r
        }
    };

    let v_r = vectors.columns(0, rank).into_owned();
    let v_perp = vectors.columns(rank, n - rank).into_owned();
    let l = prior.chol_lower();
    let phi_r = l * &v_r;
    let phi_perp = l * &v_perp;
    let theta_r = linalg::solve_lower_transpose(l, &v_r, "prior Cholesky")?;
    let theta_perp = linalg::solve_lower_transpose(l, &v_perp, "prior Cholesky")?;

    Ok(LisBasis {
        rank,
        singular_values,
        v_r,
        v_perp,
        phi_r,
        theta_r,
        phi_perp,
        theta_perp,
    })
}

/// Splits a state into LIS and complement coordinates, centered at the
/// prior mean: `x_r = Θ_rᵀ(x − x₀)`, `x_⊥ = Θ_⊥ᵀ(x − x₀)`.
///
/// Centering makes both coordinate blocks standard normal under the prior,
/// so the prior factorizes exactly across the split.
pub fn split(
    x: &DVector<f64>,
    basis: &LisBasis,
    prior: &GaussianPrior,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if x.len() != basis.state_dim() {
        return Err(Error::DimensionMismatch {
            axis: "split input",
            expected: basis.state_dim(),
            actual: x.len(),
        });
    }
    let centered = x - prior.mean();
    Ok((
        basis.theta_r.transpose() * &centered,
        basis.theta_perp.transpose() * &centered,
    ))
}

/// Inverse of [`split`]: `x = x₀ + Φ_r·x_r + Φ_⊥·x_⊥`.
pub fn recompose(
    x_r: &DVector<f64>,
    x_perp: &DVector<f64>,
    basis: &LisBasis,
    prior: &GaussianPrior,
) -> Result<DVector<f64>> {
    if x_r.len() != basis.rank {
        return Err(Error::DimensionMismatch {
            axis: "recompose reduced part",
            expected: basis.rank,
            actual: x_r.len(),
        });
    }
    if x_perp.len() != basis.state_dim() - basis.rank {
        return Err(Error::DimensionMismatch {
            axis: "recompose complement part",
            expected: basis.state_dim() - basis.rank,
            actual: x_perp.len(),
        });
    }
    Ok(prior.mean() + &basis.phi_r * x_r + &basis.phi_perp * x_perp)
}

/// Unnormalized reduced log-posterior over the LIS coordinates:
/// `−η(x₀ + Φ_r·x_r) − ½‖x_r‖²`. The complement carries no likelihood term.
pub fn reduced_log_posterior(
    x_r: &DVector<f64>,
    problem: &InverseProblem,
    basis: &LisBasis,
) -> Result<f64> {
    let zero_perp = DVector::zeros(basis.state_dim() - basis.rank);
    let x = recompose(x_r, &zero_perp, basis, &problem.prior)?;
    Ok(-problem.misfit(&x)? - 0.5 * x_r.norm_squared())
}

/// Analytic draws of the complement parameter: iid standard normal, one
/// column per draw, deterministic for a given seed.
pub fn sample_complement(count: usize, basis: &LisBasis, seed: u64) -> Result<DMatrix<f64>> {
    if count == 0 {
        return Err(Error::invalid(
            "complement sample count must be at least 1".to_string(),
        ));
    }
    let mut rng = rng::seeded(seed);
    Ok(rng::standard_normal_matrix(
        &mut rng,
        basis.state_dim() - basis.rank,
        count,
    ))
}
