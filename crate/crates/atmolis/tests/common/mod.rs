//! Shared oracles for the integration and acceptance suites.
//!
//! Everything here computes reference values through routes the library
//! itself never takes: dense matrix inverses, closed-form Gaussian
//! distances, and direct construction of posteriors from conjugacy. That
//! keeps these checks independent of the triangular-solve implementation
//! paths they validate.

#![allow(dead_code)]

use atmolis::forward::Spectrum;
use atmolis::gaussian::{GaussianPrior, InverseProblem, NoiseModel};
use atmolis::model::{ForwardModel, LinearModel};
use atmolis::rng;
use nalgebra::{DMatrix, DVector};

pub fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng::seeded(seed);
    let a = rng::standard_normal_matrix(&mut rng, n, n);
    &a * a.transpose() + DMatrix::identity(n, n) * 0.4
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values[0]
}

/// Random orthogonal matrix via QR of a Gaussian matrix.
pub fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng::seeded(seed);
    let a = rng::standard_normal_matrix(&mut rng, n, n);
    let qr = a.qr();
    qr.q()
}

/// A linear-Gaussian inverse problem whose whitened Jacobian has exactly
/// the requested singular values.
pub struct LinearGaussian {
    pub problem: InverseProblem,
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl LinearGaussian {
    /// Builds the problem from a prescribed whitened spectrum. The forward
    /// matrix is reconstructed as `A = L_obs · W diag(σ) Vᵀ · L_pr⁻¹`, so
    /// `L_obs⁻¹ A L_pr` has exactly the given singular values.
    pub fn with_spectrum(
        spectrum: &[f64],
        m: usize,
        prior_cov: DMatrix<f64>,
        noise_cov: DMatrix<f64>,
        seed: u64,
    ) -> Self {
        let n = prior_cov.nrows();
        assert!(m >= n && spectrum.len() == n);
        let prior_mean = {
            let mut r = rng::seeded(seed);
            rng::standard_normal_vector(&mut r, n)
        };
        let prior = GaussianPrior::new(prior_mean, prior_cov).unwrap();
        let noise = NoiseModel::new(noise_cov).unwrap();

        let w = random_orthogonal(m, seed + 1);
        let v = random_orthogonal(n, seed + 2);
        let mut sigma = DMatrix::zeros(m, n);
        for (i, &s) in spectrum.iter().enumerate() {
            sigma[(i, i)] = s;
        }
        let j_tilde = &w * sigma * v.transpose();
        let l_pr_inv = prior.chol_lower().clone().try_inverse().unwrap();
        let matrix = noise.chol_lower() * j_tilde * l_pr_inv;

        let mut r = rng::seeded(seed + 3);
        let offset = rng::standard_normal_vector(&mut r, m);
        let truth = prior.sample(&mut r);
        let model = LinearModel::new(matrix.clone(), offset.clone()).unwrap();
        let y = model.evaluate(&truth).unwrap() + noise.sample(&mut r);
        let problem =
            InverseProblem::new(Box::new(model), prior, noise, Spectrum::new(y)).unwrap();
        Self {
            problem,
            matrix,
            offset,
        }
    }

    /// Conjugate posterior `(mean, covariance)` via dense inverses.
    pub fn analytic_posterior(&self) -> (DVector<f64>, DMatrix<f64>) {
        let p = &self.problem;
        let obs_inv = p.noise.covariance().clone().try_inverse().unwrap();
        let pr_inv = p.prior.covariance().clone().try_inverse().unwrap();
        let precision = self.matrix.transpose() * &obs_inv * &self.matrix + pr_inv;
        let cov = precision.try_inverse().unwrap();
        let f0 = &self.matrix * p.prior.mean() + &self.offset;
        let mean = p.prior.mean()
            + &cov * (self.matrix.transpose() * obs_inv * (p.data.intensities() - f0));
        (mean, cov)
    }

    /// Whitened data residual at the prior mean, `L_obs⁻¹(y − F(x₀))`.
    pub fn whitened_residual_at_mean(&self) -> DVector<f64> {
        let p = &self.problem;
        let f0 = &self.matrix * p.prior.mean() + &self.offset;
        p.noise
            .covariance()
            .clone()
            .cholesky()
            .unwrap()
            .l()
            .solve_lower_triangular(&(p.data.intensities() - f0))
            .unwrap()
    }

    /// Analytic posterior of the reduced coordinates for a state-space
    /// basis `columns` (the likelihood sees `x₀ + columns·c`, the prior on
    /// `c` is standard normal): returns `(mean, covariance)` of `c`.
    pub fn reduced_posterior(&self, columns: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let p = &self.problem;
        let obs_inv = p.noise.covariance().clone().try_inverse().unwrap();
        let a_red = &self.matrix * columns;
        let precision = a_red.transpose() * &obs_inv * &a_red
            + DMatrix::identity(columns.ncols(), columns.ncols());
        let cov = precision.try_inverse().unwrap();
        let f0 = &self.matrix * p.prior.mean() + &self.offset;
        let mean = &cov * (a_red.transpose() * obs_inv * (p.data.intensities() - f0));
        (mean, cov)
    }
}

/// Exact draws from N(mean, cov), one row per draw.
pub fn gaussian_samples(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    count: usize,
    seed: u64,
) -> DMatrix<f64> {
    let n = mean.len();
    let l = cov
        .clone()
        .cholesky()
        .expect("sampling covariance must be SPD")
        .l();
    let mut rng = rng::seeded(seed);
    let mut out = DMatrix::zeros(count, n);
    for i in 0..count {
        let x = mean + &l * rng::standard_normal_vector(&mut rng, n);
        out.row_mut(i).copy_from(&x.transpose());
    }
    out
}

/// Closed-form Hellinger distance between two multivariate Gaussians.
pub fn gaussian_hellinger_joint(
    mean_a: &DVector<f64>,
    cov_a: &DMatrix<f64>,
    mean_b: &DVector<f64>,
    cov_b: &DMatrix<f64>,
) -> f64 {
    let avg = (cov_a + cov_b) * 0.5;
    let det_a = cov_a.determinant();
    let det_b = cov_b.determinant();
    let det_avg = avg.determinant();
    let diff = mean_a - mean_b;
    let quad = (diff.transpose() * avg.clone().try_inverse().unwrap() * &diff)[(0, 0)];
    let bc = (det_a.powf(0.25) * det_b.powf(0.25) / det_avg.sqrt()) * (-0.125 * quad).exp();
    (1.0 - bc.min(1.0)).max(0.0).sqrt()
}

/// Hellinger distance between two univariate Gaussians.
pub fn gaussian_hellinger_1d(mu_a: f64, var_a: f64, mu_b: f64, var_b: f64) -> f64 {
    let var_sum = var_a + var_b;
    if var_sum <= 0.0 {
        return if (mu_a - mu_b).abs() < 1e-300 { 0.0 } else { 1.0 };
    }
    let bc = ((2.0 * var_a.sqrt() * var_b.sqrt() / var_sum).sqrt())
        * (-0.25 * (mu_a - mu_b) * (mu_a - mu_b) / var_sum).exp();
    (1.0 - bc.min(1.0)).max(0.0).sqrt()
}

/// Mean per-coordinate marginal Hellinger distance between two Gaussians,
/// the closed-form analogue of the histogram-based chain comparison.
pub fn gaussian_hellinger_marginal_mean(
    mean_a: &DVector<f64>,
    cov_a: &DMatrix<f64>,
    mean_b: &DVector<f64>,
    cov_b: &DMatrix<f64>,
) -> f64 {
    let n = mean_a.len();
    (0..n)
        .map(|i| gaussian_hellinger_1d(mean_a[i], cov_a[(i, i)], mean_b[i], cov_b[(i, i)]))
        .sum::<f64>()
        / n as f64
}
