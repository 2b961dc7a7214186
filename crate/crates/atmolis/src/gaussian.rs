//! Gaussian problem definition: prior, noise model, and the unnormalized
//! log-densities of the Bayesian inverse problem.
//!
//! All quadratic forms go through triangular solves against stored Cholesky
//! factors; covariance inverses are never formed. Log-densities are
//! unnormalized throughout, which is all a Metropolis ratio needs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::forward::Spectrum;
use crate::linalg;
use crate::model::ForwardModel;
use crate::rng;

fn cholesky_lower(cov: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    let sym_err = (cov - cov.transpose()).abs().max();
    let scale = cov.abs().max().max(1.0);
    if sym_err > 1e-8 * scale {
        return Err(Error::invalid(format!(
            "{context}: covariance is not symmetric (max asymmetry {sym_err:.3e})"
        )));
    }
    nalgebra::Cholesky::new(linalg::symmetrize(cov))
        .map(|c| c.l())
        .ok_or_else(|| Error::not_positive_definite(context.to_string()))
}

/// Gaussian prior N(x₀, Σ_pr) with its lower Cholesky factor Σ_pr = L·Lᵀ.
#[derive(Debug, Clone)]
pub struct GaussianPrior {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    chol_l: DMatrix<f64>,
}

impl GaussianPrior {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if covariance.nrows() != mean.len() || covariance.ncols() != mean.len() {
            return Err(Error::DimensionMismatch {
                axis: "prior covariance",
                expected: mean.len(),
                actual: covariance.nrows(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "prior mean" });
        }
        let chol_l = cholesky_lower(&covariance, "prior covariance")?;
        Ok(Self {
            mean,
            covariance,
            chol_l,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn chol_lower(&self) -> &DMatrix<f64> {
        &self.chol_l
    }

    /// Whitened coordinates `u = L⁻¹(x − x₀)`.
    pub fn whiten(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let centered = x - &self.mean;
        linalg::solve_lower_vec(&self.chol_l, &centered, "prior Cholesky")
    }

    /// Inverse of [`whiten`](Self::whiten): `x = x₀ + L·u`.
    pub fn unwhiten(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.mean + &self.chol_l * u
    }

    /// Unnormalized log-density `−½(x−x₀)ᵀΣ_pr⁻¹(x−x₀)`.
    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                axis: "prior log-density input",
                expected: self.dim(),
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "prior log-density input",
            });
        }
        let u = self.whiten(x)?;
        Ok(-0.5 * u.norm_squared())
    }

    /// One draw from the prior.
    pub fn sample(&self, rng: &mut rng::SeedableChaCha) -> DVector<f64> {
        let z = rng::standard_normal_vector(rng, self.dim());
        self.unwhiten(&z)
    }
}

/// Zero-mean Gaussian observation noise N(0, Σ_obs) with Cholesky factor.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    covariance: DMatrix<f64>,
    chol_l: DMatrix<f64>,
}

impl NoiseModel {
    pub fn new(covariance: DMatrix<f64>) -> Result<Self> {
        let chol_l = cholesky_lower(&covariance, "noise covariance")?;
        Ok(Self { covariance, chol_l })
    }

    /// Convenience constructor for iid noise with standard deviation `sigma`.
    pub fn iid(dim: usize, sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::invalid(format!(
                "noise sigma must be positive and finite, got {sigma}"
            )));
        }
        Self::new(DMatrix::identity(dim, dim) * sigma * sigma)
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn chol_lower(&self) -> &DMatrix<f64> {
        &self.chol_l
    }

    /// `L_obs⁻¹ v`.
    pub fn whiten(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        linalg::solve_lower_vec(&self.chol_l, v, "noise Cholesky")
    }

    /// One noise draw `L_obs·z`.
    pub fn sample(&self, rng: &mut rng::SeedableChaCha) -> DVector<f64> {
        let z = rng::standard_normal_vector(rng, self.dim());
        &self.chol_l * z
    }
}

/// Pre-whitened Jacobian `J̃ = L_obs⁻¹ · J · L_pr`.
pub fn whiten_jacobian(
    jacobian: &DMatrix<f64>,
    prior: &GaussianPrior,
    noise: &NoiseModel,
) -> Result<DMatrix<f64>> {
    if jacobian.nrows() != noise.dim() {
        return Err(Error::DimensionMismatch {
            axis: "jacobian rows vs noise dim",
            expected: noise.dim(),
            actual: jacobian.nrows(),
        });
    }
    if jacobian.ncols() != prior.dim() {
        return Err(Error::DimensionMismatch {
            axis: "jacobian columns vs prior dim",
            expected: prior.dim(),
            actual: jacobian.ncols(),
        });
    }
    let half = linalg::solve_lower(&noise.chol_l, jacobian, "noise Cholesky")?;
    Ok(half * prior.chol_lower())
}

/// Sample mean and covariance of an ensemble of profiles (one profile per
/// row), regularized by `jitter` times the mean diagonal of the sample
/// covariance. A degenerate ensemble (zero sample variance) falls back to
/// `jitter · I` so the result is always usable.
pub fn build_empirical_prior(ensemble: &DMatrix<f64>, jitter: f64) -> Result<GaussianPrior> {
    let rows = ensemble.nrows();
    let n = ensemble.ncols();
    if rows < 2 {
        return Err(Error::invalid(format!(
            "ensemble needs at least 2 profiles, got {rows}"
        )));
    }
    if !jitter.is_finite() || jitter <= 0.0 {
        return Err(Error::invalid(format!(
            "jitter must be positive and finite, got {jitter}"
        )));
    }
    if ensemble.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "ensemble profiles",
        });
    }
    let mean = DVector::from_fn(n, |j, _| ensemble.column(j).sum() / rows as f64);
    let mut centered = ensemble.clone();
    for i in 0..rows {
        for j in 0..n {
            centered[(i, j)] -= mean[j];
        }
    }
    let mut cov = centered.transpose() * &centered / (rows as f64 - 1.0);
    let mut diag_mean = cov.diagonal().sum() / n as f64;
    if diag_mean.is_nan() || diag_mean <= 0.0 {
        diag_mean = 1.0;
    }
    for i in 0..n {
        cov[(i, i)] += jitter * diag_mean;
    }
    GaussianPrior::new(mean, linalg::symmetrize(&cov)).map_err(|e| match e {
        Error::NotPositiveDefinite { context } => Error::not_positive_definite(format!(
            "{context} (empirical covariance; try a larger jitter than {jitter:e})"
        )),
        other => other,
    })
}

/// The full Bayesian inverse problem `y = F(x) + ε`.
pub struct InverseProblem {
    pub forward: Box<dyn ForwardModel>,
    pub prior: GaussianPrior,
    pub noise: NoiseModel,
    pub data: Spectrum,
}

impl InverseProblem {
    pub fn new(
        forward: Box<dyn ForwardModel>,
        prior: GaussianPrior,
        noise: NoiseModel,
        data: Spectrum,
    ) -> Result<Self> {
        if prior.dim() != forward.state_dim() {
            return Err(Error::DimensionMismatch {
                axis: "prior dim vs forward state dim",
                expected: forward.state_dim(),
                actual: prior.dim(),
            });
        }
        if noise.dim() != forward.data_dim() {
            return Err(Error::DimensionMismatch {
                axis: "noise dim vs forward data dim",
                expected: forward.data_dim(),
                actual: noise.dim(),
            });
        }
        if data.len() != forward.data_dim() {
            return Err(Error::DimensionMismatch {
                axis: "data length vs forward data dim",
                expected: forward.data_dim(),
                actual: data.len(),
            });
        }
        Ok(Self {
            forward,
            prior,
            noise,
            data,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.forward.state_dim()
    }

    pub fn data_dim(&self) -> usize {
        self.forward.data_dim()
    }

    pub fn log_prior(&self, x: &DVector<f64>) -> Result<f64> {
        self.prior.log_density(x)
    }

    /// Data misfit `η(x) = ½(y−F(x))ᵀ Σ_obs⁻¹ (y−F(x))`.
    pub fn misfit(&self, x: &DVector<f64>) -> Result<f64> {
        let predicted = self.forward.evaluate(x)?;
        if let Some(index) = predicted.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteAt {
                what: "forward model output",
                index,
            });
        }
        let residual = self.data.intensities() - predicted;
        let whitened = self.noise.whiten(&residual)?;
        Ok(0.5 * whitened.norm_squared())
    }

    /// Unnormalized log-likelihood `−η(x)`.
    pub fn log_likelihood(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(-self.misfit(x)?)
    }

    /// Unnormalized log-posterior `log_likelihood + log_prior`.
    pub fn log_posterior(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.log_likelihood(x)? + self.log_prior(x)?)
    }

    /// Whitened Jacobian at `x`.
    pub fn whitened_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let j = self.forward.jacobian(x)?;
        whiten_jacobian(&j, &self.prior, &self.noise)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinearModel;
    use approx::assert_relative_eq;

    fn dense_quadratic(cov: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
        // Oracle: explicit inverse, the path the library never takes.
        let inv = cov.clone().try_inverse().unwrap();
        -0.5 * (v.transpose() * inv * v)[(0, 0)]
    }

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rng::seeded(seed);
        let a = rng::standard_normal_matrix(&mut rng, n, n);
        &a * a.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn log_prior_zero_at_mean() {
        let prior = GaussianPrior::new(
            DVector::from_column_slice(&[1.0, -2.0]),
            DMatrix::identity(2, 2) * 3.0,
        )
        .unwrap();
        assert_eq!(prior.log_density(prior.mean()).unwrap(), 0.0);
    }

    #[test]
    fn log_prior_identity_covariance_hand_value() {
        let prior = GaussianPrior::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let x = DVector::from_column_slice(&[3.0, 4.0]);
        assert_relative_eq!(prior.log_density(&x).unwrap(), -12.5, epsilon = 1e-12);
    }

    #[test]
    fn log_prior_matches_dense_inverse_oracle() {
        let cov = random_spd(5, 7);
        let mean = DVector::from_column_slice(&[0.1, -0.4, 2.0, 0.0, 1.5]);
        let prior = GaussianPrior::new(mean.clone(), cov.clone()).unwrap();
        let x = DVector::from_column_slice(&[1.0, 0.5, -0.7, 0.3, 2.2]);
        let expected = dense_quadratic(&cov, &(&x - &mean));
        assert_relative_eq!(prior.log_density(&x).unwrap(), expected, epsilon = 1e-10);
    }

    #[test]
    fn log_prior_rejects_non_finite() {
        let prior = GaussianPrior::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let x = DVector::from_column_slice(&[f64::NAN, 0.0]);
        assert!(prior.log_density(&x).is_err());
    }

    #[test]
    fn prior_is_maximized_at_mean() {
        let cov = random_spd(4, 3);
        let mean = DVector::from_element(4, 0.7);
        let prior = GaussianPrior::new(mean.clone(), cov).unwrap();
        let mut rng = rng::seeded(11);
        for _ in 0..50 {
            let perturbed = &mean + rng::standard_normal_vector(&mut rng, 4);
            assert!(prior.log_density(&perturbed).unwrap() <= 0.0);
        }
    }

    #[test]
    fn cholesky_reconstructs_covariance() {
        let cov = random_spd(6, 5);
        let prior = GaussianPrior::new(DVector::zeros(6), cov.clone()).unwrap();
        let rebuilt = prior.chol_lower() * prior.chol_lower().transpose();
        let rel = (&rebuilt - &cov).abs().max() / cov.abs().max();
        assert!(rel < 1e-10, "relative reconstruction error {rel}");
    }

    fn scalar_problem(sigma2: f64, y: f64) -> InverseProblem {
        let model = LinearModel::new(DMatrix::identity(1, 1), DVector::zeros(1)).unwrap();
        InverseProblem::new(
            Box::new(model),
            GaussianPrior::new(DVector::zeros(1), DMatrix::identity(1, 1)).unwrap(),
            NoiseModel::new(DMatrix::from_element(1, 1, sigma2)).unwrap(),
            Spectrum::new(DVector::from_element(1, y)),
        )
        .unwrap()
    }

    #[test]
    fn log_likelihood_zero_residual() {
        let p = scalar_problem(4.0, 3.0);
        assert_eq!(p.log_likelihood(&DVector::from_element(1, 3.0)).unwrap(), 0.0);
    }

    #[test]
    fn log_likelihood_scalar_hand_value() {
        // residual 2, sigma^2 = 4 -> -1/2 * 4/4 = -0.5
        let p = scalar_problem(4.0, 2.0);
        assert_relative_eq!(
            p.log_likelihood(&DVector::zeros(1)).unwrap(),
            -0.5,
            epsilon = 1e-14
        );
    }

    #[test]
    fn non_finite_forward_output_reports_wavelength_index() {
        // An overflowing linear model: row 2 explodes first.
        let mut a = DMatrix::zeros(3, 1);
        a[(2, 0)] = 1e300;
        let p = InverseProblem::new(
            Box::new(LinearModel::new(a, DVector::from_element(3, 1e308)).unwrap()),
            GaussianPrior::new(DVector::zeros(1), DMatrix::identity(1, 1)).unwrap(),
            NoiseModel::iid(3, 1.0).unwrap(),
            Spectrum::new(DVector::zeros(3)),
        )
        .unwrap();
        let err = p.log_likelihood(&DVector::from_element(1, 1e10)).unwrap_err();
        assert!(matches!(
            err,
            Error::NonFiniteAt {
                what: "forward model output",
                index: 2
            }
        ));
    }

    #[test]
    fn log_likelihood_matches_dense_inverse_oracle() {
        let mut rng = rng::seeded(21);
        let a = rng::standard_normal_matrix(&mut rng, 4, 3);
        let model = LinearModel::new(a, DVector::zeros(4)).unwrap();
        let noise_cov = random_spd(4, 9);
        let y = rng::standard_normal_vector(&mut rng, 4);
        let p = InverseProblem::new(
            Box::new(model),
            GaussianPrior::new(DVector::zeros(3), DMatrix::identity(3, 3)).unwrap(),
            NoiseModel::new(noise_cov.clone()).unwrap(),
            Spectrum::new(y.clone()),
        )
        .unwrap();
        let x = rng::standard_normal_vector(&mut rng, 3);
        let residual = &y - p.forward.evaluate(&x).unwrap();
        let expected = dense_quadratic(&noise_cov, &residual);
        assert_relative_eq!(p.log_likelihood(&x).unwrap(), expected, epsilon = 1e-10);
    }

    #[test]
    fn log_posterior_is_sum_of_parts() {
        let mut rng = rng::seeded(31);
        let a = rng::standard_normal_matrix(&mut rng, 5, 3);
        let p = InverseProblem::new(
            Box::new(LinearModel::new(a, DVector::zeros(5)).unwrap()),
            GaussianPrior::new(DVector::from_element(3, 0.5), random_spd(3, 2)).unwrap(),
            NoiseModel::iid(5, 0.3).unwrap(),
            Spectrum::new(rng::standard_normal_vector(&mut rng, 5)),
        )
        .unwrap();
        for _ in 0..20 {
            let x = rng::standard_normal_vector(&mut rng, 3);
            assert_relative_eq!(
                p.log_posterior(&x).unwrap(),
                p.log_likelihood(&x).unwrap() + p.log_prior(&x).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn log_posterior_zero_at_mean_with_exact_data() {
        let model = LinearModel::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]),
            DVector::from_column_slice(&[0.5, -0.5]),
        )
        .unwrap();
        let mean = DVector::from_column_slice(&[1.0, 2.0]);
        let y = model.evaluate(&mean).unwrap();
        let p = InverseProblem::new(
            Box::new(model),
            GaussianPrior::new(mean.clone(), DMatrix::identity(2, 2)).unwrap(),
            NoiseModel::iid(2, 1.0).unwrap(),
            Spectrum::new(y),
        )
        .unwrap();
        assert_eq!(p.log_posterior(&mean).unwrap(), 0.0);
    }

    #[test]
    fn log_posterior_invariant_under_common_shift() {
        // Adding the same constant vector to y and to F leaves the residual,
        // hence the posterior, unchanged.
        let mut rng = rng::seeded(41);
        let a = rng::standard_normal_matrix(&mut rng, 4, 2);
        let shift = DVector::from_element(4, 7.5);
        let y = rng::standard_normal_vector(&mut rng, 4);
        let prior = GaussianPrior::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let noise = NoiseModel::iid(4, 0.5).unwrap();
        let p1 = InverseProblem::new(
            Box::new(LinearModel::new(a.clone(), DVector::zeros(4)).unwrap()),
            prior.clone(),
            noise.clone(),
            Spectrum::new(y.clone()),
        )
        .unwrap();
        let p2 = InverseProblem::new(
            Box::new(LinearModel::new(a, shift.clone()).unwrap()),
            prior,
            noise,
            Spectrum::new(y + shift),
        )
        .unwrap();
        let x = DVector::from_column_slice(&[0.3, -1.2]);
        assert_relative_eq!(
            p1.log_posterior(&x).unwrap(),
            p2.log_posterior(&x).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn whiten_jacobian_identity_covariances() {
        let mut rng = rng::seeded(51);
        let j = rng::standard_normal_matrix(&mut rng, 4, 3);
        let prior = GaussianPrior::new(DVector::zeros(3), DMatrix::identity(3, 3)).unwrap();
        let noise = NoiseModel::new(DMatrix::identity(4, 4)).unwrap();
        let tilde = whiten_jacobian(&j, &prior, &noise).unwrap();
        assert_relative_eq!(tilde, j, epsilon = 1e-13);
    }

    #[test]
    fn whiten_jacobian_scaling() {
        let prior = GaussianPrior::new(DVector::zeros(3), DMatrix::identity(3, 3) * 4.0).unwrap();
        let noise = NoiseModel::new(DMatrix::identity(3, 3)).unwrap();
        let tilde = whiten_jacobian(&DMatrix::identity(3, 3), &prior, &noise).unwrap();
        assert_relative_eq!(tilde, DMatrix::identity(3, 3) * 2.0, epsilon = 1e-13);
    }

    #[test]
    fn whiten_jacobian_matches_dense_oracle() {
        let mut rng = rng::seeded(61);
        let j = rng::standard_normal_matrix(&mut rng, 3, 3);
        let prior = GaussianPrior::new(DVector::zeros(3), random_spd(3, 13)).unwrap();
        let noise = NoiseModel::new(random_spd(3, 17)).unwrap();
        let tilde = whiten_jacobian(&j, &prior, &noise).unwrap();
        let oracle =
            noise.chol_lower().clone().try_inverse().unwrap() * &j * prior.chol_lower();
        assert_relative_eq!(tilde, oracle, epsilon = 1e-10);
    }

    #[test]
    fn whitening_identity_quadratic_form() {
        // J̃ᵀJ̃ = L_prᵀ Jᵀ Σ_obs⁻¹ J L_pr on random instances.
        for seed in 0..5 {
            let mut rng = rng::seeded(100 + seed);
            let j = rng::standard_normal_matrix(&mut rng, 5, 4);
            let prior = GaussianPrior::new(DVector::zeros(4), random_spd(4, 200 + seed)).unwrap();
            let noise = NoiseModel::new(random_spd(5, 300 + seed)).unwrap();
            let tilde = whiten_jacobian(&j, &prior, &noise).unwrap();
            let lhs = tilde.transpose() * &tilde;
            let obs_inv = noise.covariance().clone().try_inverse().unwrap();
            let rhs = prior.chol_lower().transpose() * j.transpose() * obs_inv * &j
                * prior.chol_lower();
            let scale = rhs.abs().max();
            assert!(((&lhs - &rhs).abs().max()) / scale < 1e-9);
        }
    }

    #[test]
    fn empirical_prior_identical_profiles_gives_jitter_identity() {
        let profile = DVector::from_column_slice(&[1.0, 2.0, 3.0]);
        let ensemble = DMatrix::from_fn(2, 3, |_, j| profile[j]);
        let prior = build_empirical_prior(&ensemble, 1e-6).unwrap();
        assert_relative_eq!(prior.mean(), &profile, epsilon = 1e-14);
        assert_relative_eq!(
            prior.covariance(),
            &(DMatrix::identity(3, 3) * 1e-6),
            epsilon = 1e-18
        );
    }

    #[test]
    fn empirical_prior_iid_rows_approximates_identity() {
        let mut rng = rng::seeded(71);
        let ensemble = rng::standard_normal_matrix(&mut rng, 4000, 4);
        let prior = build_empirical_prior(&ensemble, 1e-8).unwrap();
        let err = (prior.covariance() - DMatrix::identity(4, 4)).abs().max();
        assert!(err < 0.12, "sampling error {err}");
        assert!(prior.mean().abs().max() < 0.1);
    }

    #[test]
    fn empirical_prior_requires_two_profiles() {
        let ensemble = DMatrix::from_element(1, 3, 1.0);
        assert!(build_empirical_prior(&ensemble, 1e-6).is_err());
    }
}
