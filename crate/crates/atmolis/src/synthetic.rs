//! Self-contained synthetic retrieval problems.
//!
//! Real spectroscopy databases and measurement ensembles are replaced by
//! generated stand-ins so every experiment is reproducible from a seed:
//!
//! * Cross-sections are sums of Lorentzian lines whose widths shrink with
//!   altitude (pressure broadening). The altitude-dependent line shape is
//!   what gives the measurement its vertical information; without it every
//!   layer would imprint the same spectral fingerprint and the problem
//!   would carry a single degree of freedom.
//! * The prior comes from a generated ensemble of smooth correlated
//!   profiles (squared-exponential correlation, relative spread growing
//!   with altitude), mimicking an ensemble of previous composition
//!   measurements.
//! * Noise is iid with σ equal to a configurable fraction of the peak
//!   continuum signal, 0.1% by default.
//!
//! Line strengths are calibrated at generation time so the whitened
//! Jacobian has between 2 and 6 singular values above 1: the regime where
//! the measurement carries about three degrees of freedom.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{
    simulate_spectrum, AtmosphericGrid, AtmosphericState, Baseline, SpectralSetup, Spectrum,
};
use crate::gaussian::{build_empirical_prior, GaussianPrior, InverseProblem, NoiseModel};
use crate::lis::dof_signal;
use crate::model::BeerLambertModel;
use crate::rng;

/// Sub-stream tags for [`rng::derive_seed`].
mod streams {
    pub const LINES: u64 = 1;
    pub const BACKGROUND_LINES: u64 = 2;
    pub const ENSEMBLE: u64 = 3;
    pub const TRUTH: u64 = 4;
    pub const NOISE: u64 = 5;
}

/// Degrees-of-freedom band the generated problem must land in.
pub const DOF_RANGE: (usize, usize) = (2, 6);

/// Default jitter for the empirical prior, relative to the mean diagonal.
pub const PRIOR_JITTER: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    /// Number of spectral channels m.
    pub wavelength_count: usize,
    /// Number of atmospheric layers n.
    pub layer_count: usize,
    /// Number of absorption lines of the retrieved gas.
    pub line_count: usize,
    pub seed: u64,
    /// Spectral window in nm.
    pub wavelength_min: f64,
    pub wavelength_max: f64,
    /// Ground-level Lorentzian half-widths are drawn uniformly from this
    /// range (nm).
    pub line_width_min: f64,
    pub line_width_max: f64,
    /// Base integrated line strength; rescaled by the degrees-of-freedom
    /// calibration.
    pub line_strength: f64,
    /// Pressure-broadening decay scale of the line widths (km).
    pub pressure_scale_km: f64,
    /// Density decay scale of the gas profiles (km).
    pub gas_scale_km: f64,
    pub top_altitude_km: f64,
    /// Noise standard deviation as a fraction of the peak continuum.
    pub noise_relative: f64,
    /// Number of profiles in the generated prior ensemble.
    pub ensemble_size: usize,
    /// Correlation length of the ensemble perturbations (km).
    pub prior_length_scale_km: f64,
    /// Relative perturbation amplitude of the ensemble.
    pub prior_amplitude: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            wavelength_count: 200,
            layer_count: 50,
            line_count: 10,
            seed: 1,
            wavelength_min: 1630.0,
            wavelength_max: 1700.0,
            line_width_min: 0.8,
            line_width_max: 2.5,
            line_strength: 1.0,
            pressure_scale_km: 8.0,
            gas_scale_km: 14.0,
            top_altitude_km: 50.0,
            noise_relative: 1e-3,
            ensemble_size: 80,
            prior_length_scale_km: 5.0,
            prior_amplitude: 0.35,
        }
    }
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        if self.line_count == 0 {
            return Err(Error::invalid(
                "synthetic setup needs at least one absorption line".to_string(),
            ));
        }
        if self.wavelength_count < 2 || self.layer_count == 0 {
            return Err(Error::invalid(format!(
                "degenerate problem size: m={}, n={}",
                self.wavelength_count, self.layer_count
            )));
        }
        if self.wavelength_max <= self.wavelength_min
            || self.wavelength_max.is_nan()
            || self.wavelength_min.is_nan()
        {
            return Err(Error::invalid(
                "wavelength window must have positive width".to_string(),
            ));
        }
        if self.line_width_min.is_nan()
            || self.line_width_min <= 0.0
            || self.line_width_max < self.line_width_min
        {
            return Err(Error::invalid(
                "line width range must be positive and ordered".to_string(),
            ));
        }
        if self.noise_relative.is_nan() || self.noise_relative <= 0.0 {
            return Err(Error::invalid(
                "relative noise level must be positive".to_string(),
            ));
        }
        if self.ensemble_size < 2 {
            return Err(Error::invalid(
                "prior ensemble needs at least 2 members".to_string(),
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<AtmosphericGrid> {
        AtmosphericGrid::uniform(self.layer_count, self.top_altitude_km)
    }

    fn base_profile(&self, grid: &AtmosphericGrid) -> DVector<f64> {
        DVector::from_fn(grid.layer_count(), |l, _| {
            (-grid.midpoint(l) / self.gas_scale_km).exp()
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Line {
    center: f64,
    ground_width: f64,
    strength: f64,
}

fn draw_lines(config: &SyntheticConfig, count: usize, seed: u64) -> Vec<Line> {
    let mut rng = rng::seeded(seed);
    let span = config.wavelength_max - config.wavelength_min;
    let margin = 0.05 * span;
    (0..count)
        .map(|_| {
            let u: f64 = rand::Rng::random(&mut rng);
            let w: f64 = rand::Rng::random(&mut rng);
            let s: f64 = rand::Rng::random(&mut rng);
            Line {
                center: config.wavelength_min + margin + u * (span - 2.0 * margin),
                ground_width: config.line_width_min
                    + w * (config.line_width_max - config.line_width_min),
                strength: 0.5 + s,
            }
        })
        .collect()
}

/// Lorentzian cross-section table with pressure-dependent lines: both the
/// half-width and the integrated strength follow the pressure factor
/// `0.3 + 0.7·exp(−z/H_p)`, so lines are strong and broad near the ground,
/// weak and sharp aloft. The altitude-dependent shape is what lets the
/// measurement tell layers apart.
fn lorentzian_table(
    wavelengths: &DVector<f64>,
    grid: &AtmosphericGrid,
    lines: &[Line],
    strength_scale: f64,
    pressure_scale_km: f64,
) -> DMatrix<f64> {
    let m = wavelengths.len();
    let n = grid.layer_count();
    let mut table = DMatrix::zeros(m, n);
    for layer in 0..n {
        let z = grid.midpoint(layer);
        let pressure = 0.3 + 0.7 * (-z / pressure_scale_km).exp();
        for line in lines {
            let gamma = line.ground_width * pressure;
            let area = strength_scale * line.strength * pressure;
            let amp = area * gamma / std::f64::consts::PI;
            for j in 0..m {
                let d = wavelengths[j] - line.center;
                table[(j, layer)] += amp / (d * d + gamma * gamma);
            }
        }
    }
    table
}

fn solar_intensity(wavelengths: &DVector<f64>, lo: f64, hi: f64) -> DVector<f64> {
    let span = hi - lo;
    wavelengths.map(|w| {
        let t = (w - lo) / span;
        1.0 + 0.05 * (2.0 * std::f64::consts::PI * t).sin() + 0.02 * t
    })
}

/// Quadratic through (λ_lo, 0.97), (λ_mid, 1.0), (λ_hi, 0.98): a gentle
/// instrument baseline that is nowhere close to zero.
fn instrument_baseline(lo: f64, hi: f64) -> Baseline {
    let mid = 0.5 * (lo + hi);
    let (y0, y1, y2) = (0.97, 1.0, 0.98);
    // Lagrange interpolation collapsed to monomial coefficients.
    let d0 = (lo - mid) * (lo - hi);
    let d1 = (mid - lo) * (mid - hi);
    let d2 = (hi - lo) * (hi - mid);
    let a = y0 / d0 + y1 / d1 + y2 / d2;
    let b = -(y0 * (mid + hi) / d0 + y1 * (lo + hi) / d1 + y2 * (lo + mid) / d2);
    let c = y0 * mid * hi / d0 + y1 * lo * hi / d1 + y2 * lo * mid / d2;
    Baseline { a, b, c }
}

const INSTRUMENT_OFFSET: f64 = 0.015;

/// Generated ensemble of smooth profiles, one per row: the exponential base
/// profile plus squared-exponential correlated perturbations whose relative
/// amplitude grows with altitude.
pub fn synth_ensemble(config: &SyntheticConfig) -> Result<DMatrix<f64>> {
    config.validate()?;
    let grid = config.grid()?;
    let n = grid.layer_count();
    let base = config.base_profile(&grid);
    let top = config.top_altitude_km;

    let sd = DVector::from_fn(n, |l, _| {
        let z = grid.midpoint(l);
        config.prior_amplitude * base[l] * (0.2 + 4.0 * z / top)
    });
    let ell2 = config.prior_length_scale_km * config.prior_length_scale_km;
    let mut cov = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let dz = grid.midpoint(i) - grid.midpoint(j);
            cov[(i, j)] = sd[i] * sd[j] * (-dz * dz / (2.0 * ell2)).exp();
        }
    }
    let max_var = cov.diagonal().max();
    for i in 0..n {
        cov[(i, i)] += 1e-10 * max_var;
    }
    let chol = nalgebra::Cholesky::new(cov)
        .ok_or_else(|| Error::not_positive_definite("ensemble perturbation covariance"))?;
    let l = chol.l();

    let mut rng = rng::seeded(rng::derive_seed(config.seed, streams::ENSEMBLE));
    let mut ensemble = DMatrix::zeros(config.ensemble_size, n);
    for row in 0..config.ensemble_size {
        let member = &base + &l * rng::standard_normal_vector(&mut rng, n);
        ensemble.row_mut(row).copy_from(&member.transpose());
    }
    Ok(ensemble)
}

/// The prior used by default for a synthetic problem: empirical mean and
/// covariance of the generated ensemble, jitter-regularized.
pub fn default_prior(config: &SyntheticConfig) -> Result<GaussianPrior> {
    build_empirical_prior(&synth_ensemble(config)?, PRIOR_JITTER)
}

fn build_setup_with_scale(
    config: &SyntheticConfig,
    grid: &AtmosphericGrid,
    strength_scale: f64,
) -> Result<SpectralSetup> {
    let m = config.wavelength_count;
    let span = config.wavelength_max - config.wavelength_min;
    let wavelengths = DVector::from_fn(m, |j, _| {
        config.wavelength_min + span * j as f64 / (m as f64 - 1.0)
    });
    let retrieved = draw_lines(
        config,
        config.line_count,
        rng::derive_seed(config.seed, streams::LINES),
    );
    let background = draw_lines(
        config,
        config.line_count,
        rng::derive_seed(config.seed, streams::BACKGROUND_LINES),
    );
    let retrieved_table = lorentzian_table(
        &wavelengths,
        grid,
        &retrieved,
        strength_scale,
        config.pressure_scale_km,
    );
    // The background gas keeps its nominal strength: it models fixed, known
    // absorption that the calibration must not touch.
    let background_table = lorentzian_table(
        &wavelengths,
        grid,
        &background,
        0.4 * config.line_strength,
        config.pressure_scale_km,
    );
    let background_profile = DVector::from_fn(grid.layer_count(), |l, _| {
        0.8 * (-grid.midpoint(l) / (0.8 * config.gas_scale_km)).exp()
    });
    SpectralSetup::new(
        wavelengths.clone(),
        solar_intensity(&wavelengths, config.wavelength_min, config.wavelength_max),
        vec![retrieved_table, background_table],
        vec![background_profile],
        instrument_baseline(config.wavelength_min, config.wavelength_max),
        INSTRUMENT_OFFSET,
    )
}

fn noise_for(setup: &SpectralSetup, config: &SyntheticConfig) -> Result<NoiseModel> {
    NoiseModel::iid(
        setup.wavelength_count(),
        config.noise_relative * setup.peak_continuum(),
    )
}

/// Generates the spectral setup and grid, calibrating line strengths until
/// the whitened Jacobian at the prior mean has between 2 and 6 singular
/// values at or above 1. Deterministic for a fixed config.
pub fn synth_setup(config: &SyntheticConfig) -> Result<(SpectralSetup, AtmosphericGrid)> {
    let prior = default_prior(config)?;
    synth_setup_with_prior(config, &prior)
}

/// [`synth_setup`] calibrated against a caller-supplied prior.
pub fn synth_setup_with_prior(
    config: &SyntheticConfig,
    prior: &GaussianPrior,
) -> Result<(SpectralSetup, AtmosphericGrid)> {
    config.validate()?;
    let grid = config.grid()?;
    let mut scale = config.line_strength;
    for _ in 0..10 {
        let setup = build_setup_with_scale(config, &grid, scale)?;
        let noise = noise_for(&setup, config)?;
        let model = BeerLambertModel::new(setup.clone(), grid.clone())?;
        let problem = InverseProblem::new(
            Box::new(model),
            prior.clone(),
            noise,
            Spectrum::new(DVector::zeros(setup.wavelength_count())),
        )?;
        let j_tilde = problem.whitened_jacobian(prior.mean())?;
        let svals = crate::linalg::singular_values(&j_tilde);
        let dof = dof_signal(&j_tilde, crate::lis::SIGNAL_THRESHOLD);
        if (DOF_RANGE.0..=DOF_RANGE.1).contains(&dof) {
            return Ok((setup, grid));
        }
        // Nudge the strengths so the signal threshold lands between the
        // third and fourth singular values (roughly: the whitened spectrum
        // scales with the strengths, modulo saturation of deep lines).
        let s3 = svals[2.min(svals.len() - 1)];
        let s4 = svals[3.min(svals.len() - 1)];
        let pivot = if s4 > 0.0 { (s3 * s4).sqrt() } else { s3 };
        scale = if pivot > 0.0 { scale / pivot } else { scale * 3.0 };
        if !scale.is_finite() || scale <= 0.0 {
            break;
        }
    }
    Err(Error::Infeasible(format!(
        "could not reach {}..={} informative directions within 10 strength \
         adjustments; the line configuration gives the measurement too little \
         or too degenerate vertical sensitivity",
        DOF_RANGE.0, DOF_RANGE.1
    )))
}

/// A fully assembled synthetic retrieval problem.
#[derive(Debug, Clone)]
pub struct SyntheticProblem {
    pub config: SyntheticConfig,
    pub grid: AtmosphericGrid,
    pub setup: SpectralSetup,
    pub prior: GaussianPrior,
    pub noise: NoiseModel,
    pub truth: AtmosphericState,
    pub clean_spectrum: Spectrum,
    pub noisy_spectrum: Spectrum,
}

impl SyntheticProblem {
    /// The inverse problem with the noisy spectrum as data.
    pub fn inverse_problem(&self) -> Result<InverseProblem> {
        self.inverse_problem_with_data(self.noisy_spectrum.clone())
    }

    pub fn inverse_problem_with_data(&self, data: Spectrum) -> Result<InverseProblem> {
        InverseProblem::new(
            Box::new(BeerLambertModel::new(self.setup.clone(), self.grid.clone())?),
            self.prior.clone(),
            self.noise.clone(),
            data,
        )
    }
}

/// Builds the complete synthetic problem: setup, prior, noise, a truth
/// profile drawn from the same ensemble distribution, and the simulated
/// clean and noisy spectra.
pub fn build_problem(config: &SyntheticConfig) -> Result<SyntheticProblem> {
    build_problem_with_prior(config, default_prior(config)?)
}

/// [`build_problem`] with a caller-supplied prior (for example one read
/// from an ensemble file). The line-strength calibration and the truth
/// draw both use this prior.
pub fn build_problem_with_prior(
    config: &SyntheticConfig,
    prior: GaussianPrior,
) -> Result<SyntheticProblem> {
    let (setup, grid) = synth_setup_with_prior(config, &prior)?;
    let noise = noise_for(&setup, config)?;

    let mut truth_rng = rng::seeded(rng::derive_seed(config.seed, streams::TRUTH));
    let truth_vec = prior.sample(&mut truth_rng);
    let truth = AtmosphericState::new(truth_vec, &grid)?;

    let clean_spectrum = simulate_spectrum(&truth, &setup, &grid)?;
    let mut noise_rng = rng::seeded(rng::derive_seed(config.seed, streams::NOISE));
    let noisy = clean_spectrum.intensities() + noise.sample(&mut noise_rng);

    Ok(SyntheticProblem {
        config: config.clone(),
        grid,
        setup,
        prior,
        noise,
        truth,
        clean_spectrum,
        noisy_spectrum: Spectrum::new(noisy),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SyntheticConfig {
        SyntheticConfig {
            wavelength_count: 60,
            layer_count: 16,
            line_count: 5,
            ensemble_size: 40,
            ..SyntheticConfig::default()
        }
    }

    #[test]
    fn zero_lines_is_an_error() {
        let config = SyntheticConfig {
            line_count: 0,
            ..small_config()
        };
        assert!(synth_setup(&config).is_err());
    }

    #[test]
    fn same_seed_gives_identical_setup() {
        let config = small_config();
        let (a, _) = synth_setup(&config).unwrap();
        let (b, _) = synth_setup(&config).unwrap();
        assert_eq!(a.wavelengths(), b.wavelengths());
        assert_eq!(a.cross_section(0), b.cross_section(0));
        assert_eq!(a.cross_section(1), b.cross_section(1));
        assert_eq!(a.solar_intensity(), b.solar_intensity());
    }

    #[test]
    fn different_seed_changes_cross_sections() {
        let config = small_config();
        let other = SyntheticConfig {
            seed: 2,
            ..small_config()
        };
        let (a, _) = synth_setup(&config).unwrap();
        let (b, _) = synth_setup(&other).unwrap();
        assert_ne!(a.cross_section(0), b.cross_section(0));
    }

    #[test]
    fn generated_problem_lands_in_dof_band() {
        let config = small_config();
        let problem = build_problem(&config).unwrap();
        let ip = problem.inverse_problem().unwrap();
        let j = ip.whitened_jacobian(problem.prior.mean()).unwrap();
        let dof = dof_signal(&j, 1.0);
        assert!(
            (DOF_RANGE.0..=DOF_RANGE.1).contains(&dof),
            "dof {dof} outside band"
        );
    }

    #[test]
    fn ensemble_prior_spectrum_decays_smoothly() {
        let prior = default_prior(&SyntheticConfig::default()).unwrap();
        let basis = crate::prior_reduction::build_prior_basis(&prior, 1).unwrap();
        let svals = basis.singular_values();
        for i in 0..20 {
            assert!(svals[i] > 0.0, "singular value {i} not positive");
            if i > 0 {
                assert!(svals[i] <= svals[i - 1] + 1e-15);
            }
        }
        // No hard cutoff: the 20th value is small but nowhere near zero.
        assert!(svals[19] > 1e-10 * svals[0]);
        // And no four-component cliff either.
        assert!(svals[4] > 1e-3 * svals[0]);
    }

    #[test]
    fn noisy_spectrum_differs_from_clean_by_noise_scale() {
        let problem = build_problem(&small_config()).unwrap();
        let sigma = problem.noise.covariance()[(0, 0)].sqrt();
        let residual = problem.noisy_spectrum.intensities() - problem.clean_spectrum.intensities();
        let rms = (residual.norm_squared() / residual.len() as f64).sqrt();
        assert!(rms > 0.3 * sigma && rms < 3.0 * sigma, "rms {rms} vs sigma {sigma}");
    }

    #[test]
    fn noise_draw_covariance_matches_model() {
        // Repeated residual draws reproduce the configured covariance.
        let noise = NoiseModel::iid(4, 0.7).unwrap();
        let mut rng = rng::seeded(77);
        let reps = 10_000;
        let mut acc = DMatrix::zeros(4, 4);
        for _ in 0..reps {
            let e = noise.sample(&mut rng);
            acc += &e * e.transpose();
        }
        let emp = acc / reps as f64;
        let err = (&emp - noise.covariance()).abs().max() / noise.covariance()[(0, 0)];
        assert!(err < 0.1, "covariance error {err}");
    }

    #[test]
    fn cross_sections_are_nonnegative_and_vertically_varied() {
        let (setup, _) = synth_setup(&small_config()).unwrap();
        let table = setup.cross_section(0);
        assert!(table.iter().all(|&v| v >= 0.0));
        // Column shapes must differ between bottom and top, otherwise the
        // measurement cannot resolve altitude at all.
        let bottom = table.column(0).normalize();
        let top = table.column(table.ncols() - 1).normalize();
        assert!((bottom - top).norm() > 1e-3);
    }
}
