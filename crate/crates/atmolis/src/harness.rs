//! Batch experiment driver behind the CLI subcommands: problem assembly,
//! the three retrieval variants, the rank sweep, and all file outputs.
//!
//! Every method gets the same treatment: the chain starts at the MAP point
//! and the initial proposal covariance is the best Gaussian approximation
//! available to that method (Laplace covariance for the full space, the
//! matching projected precisions for the reduced spaces), scaled by
//! 2.38²/d. Adaptation then takes over. Wall-clock readings never go into
//! manifest or data files; they live in the timing files so everything
//! else is byte-reproducible from (config, seed).

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::diagnostics::{ess_report, posterior_hellinger, EssReport};
use crate::error::{Error, Result};
use crate::experiment::{ExperimentConfig, MethodName};
use crate::forward::Spectrum;
use crate::gaussian::{build_empirical_prior, GaussianPrior, InverseProblem};
use crate::io;
use crate::lis::{self, LisBasis, RankSelection};
use crate::map_laplace::{gauss_newton_map, laplace_samples, GaussNewtonConfig, LaplaceApprox};
use crate::mcmc::{run_am, Chain};
use crate::prior_reduction::{build_prior_basis, lift, PriorBasis};
use crate::rng;
use crate::synthetic;

mod streams {
    pub const CHAIN_FULL: u64 = 100;
    pub const CHAIN_LIS: u64 = 200;
    pub const CHAIN_PRIRED: u64 = 300;
    pub const COMPLEMENT: u64 = 500;
    pub const REFERENCE: u64 = 600;
}

fn chain_seed(master: u64, method: MethodName, rank: usize) -> u64 {
    let stream = match method {
        MethodName::Full => streams::CHAIN_FULL,
        MethodName::Lis => streams::CHAIN_LIS + rank as u64,
        MethodName::Prired => streams::CHAIN_PRIRED + rank as u64,
    };
    rng::derive_seed(master, stream)
}

fn am_scale(dim: usize) -> f64 {
    2.38 * 2.38 / dim as f64
}

/// A problem assembled from configuration and, optionally, input files.
pub struct PreparedProblem {
    pub problem: InverseProblem,
    pub grid: crate::forward::AtmosphericGrid,
    pub setup: crate::forward::SpectralSetup,
    pub ensemble: DMatrix<f64>,
    pub truth: Option<DVector<f64>>,
    pub clean_spectrum: Option<DVector<f64>>,
}

fn load_ensemble(config: &ExperimentConfig) -> Result<DMatrix<f64>> {
    match &config.problem.ensemble_path {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::Io(std::io::Error::new(
                    e.kind(),
                    format!("cannot read ensemble file {path}: {e}"),
                ))
            })?;
            io::read_ensemble(&text)
        }
        None => synthetic::synth_ensemble(&config.effective_synthetic()),
    }
}

/// Builds the full synthetic problem (optics, prior, noise, truth, data)
/// from the configuration. Used by `simulate`; `retrieve` replaces the data
/// with the measured spectrum afterwards.
pub fn prepare_synthetic(config: &ExperimentConfig) -> Result<PreparedProblem> {
    let synth = config.effective_synthetic();
    let ensemble = load_ensemble(config)?;
    let prior = build_empirical_prior(&ensemble, config.problem.prior_jitter)?;
    if prior.dim() != synth.layer_count {
        return Err(Error::DimensionMismatch {
            axis: "ensemble profile length vs layer count",
            expected: synth.layer_count,
            actual: prior.dim(),
        });
    }
    let built = synthetic::build_problem_with_prior(&synth, prior)?;
    let data = if config.problem.noise_free {
        built.clean_spectrum.clone()
    } else {
        built.noisy_spectrum.clone()
    };
    let problem = built.inverse_problem_with_data(data)?;
    Ok(PreparedProblem {
        problem,
        grid: built.grid,
        setup: built.setup,
        ensemble,
        truth: Some(built.truth.densities().clone()),
        clean_spectrum: Some(built.clean_spectrum.intensities().clone()),
    })
}

fn default_spectrum_path(config: &ExperimentConfig) -> PathBuf {
    Path::new(&config.output.dir)
        .join("simulate")
        .join("spectrum_noisy.csv")
}

/// Like [`prepare_synthetic`] but with the measurement loaded from the
/// configured spectrum file (or the default simulate output).
pub fn prepare_retrieval(config: &ExperimentConfig) -> Result<PreparedProblem> {
    let mut prepared = prepare_synthetic(config)?;
    let path = config
        .problem
        .spectrum_path
        .as_ref()
        .map(PathBuf::from)
        .unwrap_or_else(|| default_spectrum_path(config));
    let text = fs::read_to_string(&path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!(
                "cannot read measurement {} (run `simulate` first or set \
                 problem.spectrum_path): {e}",
                path.display()
            ),
        ))
    })?;
    let (_wavelengths, intensities) = io::read_spectrum_csv(&text)?;
    if intensities.len() != prepared.problem.data_dim() {
        return Err(Error::DimensionMismatch {
            axis: "measured spectrum length",
            expected: prepared.problem.data_dim(),
            actual: intensities.len(),
        });
    }
    prepared.problem.data = Spectrum::new(intensities);
    prepared.truth = None;
    prepared.clean_spectrum = None;
    Ok(prepared)
}

/// MAP/Laplace step shared by all methods.
pub fn fit_laplace(problem: &InverseProblem) -> Result<LaplaceApprox> {
    gauss_newton_map(problem, problem.prior.mean(), &GaussNewtonConfig::default())
}

/// Averaged whitened Jacobian over Laplace reference draws.
pub fn reference_jacobian(
    problem: &InverseProblem,
    laplace: &LaplaceApprox,
    count: usize,
    master_seed: u64,
) -> Result<DMatrix<f64>> {
    let draws = laplace_samples(
        laplace,
        count,
        rng::derive_seed(master_seed, streams::REFERENCE),
    );
    let samples: Vec<DVector<f64>> = (0..draws.ncols())
        .map(|c| draws.column(c).into_owned())
        .collect();
    lis::expected_jacobian(&samples, problem)
}

/// One finished retrieval: the sampled chain plus its full-space lift and
/// whatever basis information the method produced.
pub struct MethodRun {
    pub method: MethodName,
    pub rank: Option<usize>,
    pub chain: Chain,
    /// Retained samples lifted to full state space, one row per draw.
    pub lifted: DMatrix<f64>,
    pub labels: Vec<String>,
    /// State-space basis columns (Φ_r or P_r).
    pub basis_state: Option<DMatrix<f64>>,
    /// Raw orthonormal singular vectors (V_r or U_r).
    pub basis_vectors: Option<DMatrix<f64>>,
    /// Singular-value spectrum behind the basis.
    pub spectrum: Option<DVector<f64>>,
    pub ess: EssReport,
}

fn layer_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("layer_{i}")).collect()
}

fn nan_target<'a>(
    f: impl Fn(&DVector<f64>) -> Result<f64> + 'a,
) -> impl Fn(&DVector<f64>) -> f64 + 'a {
    move |x| f(x).unwrap_or(f64::NAN)
}

pub fn run_full_method(
    problem: &InverseProblem,
    laplace: &LaplaceApprox,
    sampler: &crate::experiment::SamplerSection,
    master_seed: u64,
) -> Result<MethodRun> {
    let n = problem.state_dim();
    let mut cfg = sampler.to_sampler_config(chain_seed(master_seed, MethodName::Full, 0));
    cfg.initial_proposal_cov = Some(&laplace.post_cov * am_scale(n));
    let chain = run_am(
        nan_target(|x| problem.log_posterior(x)),
        &laplace.map_point,
        &cfg,
    )?;
    let ess = ess_report(&chain)?;
    let lifted = chain.retained();
    Ok(MethodRun {
        method: MethodName::Full,
        rank: None,
        chain,
        lifted,
        labels: layer_labels(n),
        basis_state: None,
        basis_vectors: None,
        spectrum: None,
        ess,
    })
}

/// Attaches one independent complement draw to every retained sample:
/// exact draws from the approximate posterior, since the complement is
/// Gaussian and independent of the sampled coordinates.
pub fn lift_lis_chain(
    chain: &Chain,
    basis: &LisBasis,
    prior: &GaussianPrior,
    complement_seed: u64,
) -> Result<DMatrix<f64>> {
    let retained = chain.retained();
    let count = retained.nrows();
    let complement = lis::sample_complement(count, basis, complement_seed)?;
    let n = basis.state_dim();
    let mut lifted = DMatrix::zeros(count, n);
    for i in 0..count {
        let x_r = retained.row(i).transpose();
        let x_perp = complement.column(i).into_owned();
        let x = lis::recompose(&x_r, &x_perp, basis, prior)?;
        lifted.row_mut(i).copy_from(&x.transpose());
    }
    Ok(lifted)
}

pub fn run_lis_method(
    problem: &InverseProblem,
    laplace: &LaplaceApprox,
    j_hat: &DMatrix<f64>,
    selection: RankSelection,
    sampler: &crate::experiment::SamplerSection,
    master_seed: u64,
) -> Result<MethodRun> {
    let basis = lis::build_lis(j_hat, &problem.prior, selection)?;
    let r = basis.rank();
    let (x_init, _) = lis::split(&laplace.map_point, &basis, &problem.prior)?;

    // Posterior-informed diagonal start: in the averaged-Jacobian basis the
    // reduced precision is diag(σ_i² + 1).
    let proposal = DMatrix::from_fn(r, r, |i, j| {
        if i == j {
            am_scale(r) / (basis.singular_values()[i].powi(2) + 1.0)
        } else {
            0.0
        }
    });
    let mut cfg = sampler.to_sampler_config(chain_seed(master_seed, MethodName::Lis, r));
    cfg.initial_proposal_cov = Some(proposal);

    let chain = run_am(
        nan_target(|x_r| lis::reduced_log_posterior(x_r, problem, &basis)),
        &x_init,
        &cfg,
    )?;
    let ess = ess_report(&chain)?;
    let lifted = lift_lis_chain(
        &chain,
        &basis,
        &problem.prior,
        rng::derive_seed(master_seed, streams::COMPLEMENT + r as u64),
    )?;
    Ok(MethodRun {
        method: MethodName::Lis,
        rank: Some(r),
        chain,
        lifted,
        labels: (1..=r).map(|i| format!("xr_{i}")).collect(),
        basis_state: Some(basis.phi_r().clone()),
        basis_vectors: Some(basis.v_r().clone()),
        spectrum: Some(basis.singular_values().clone()),
        ess,
    })
}

pub fn run_prired_method(
    problem: &InverseProblem,
    laplace: &LaplaceApprox,
    rank: usize,
    sampler: &crate::experiment::SamplerSection,
    master_seed: u64,
) -> Result<MethodRun> {
    let basis = build_prior_basis(&problem.prior, rank)?;
    let centered = &laplace.map_point - problem.prior.mean();
    let x_init = DVector::from_fn(rank, |i, _| {
        let lambda = basis.singular_values()[i];
        if lambda > 0.0 {
            basis.basis().column(i).dot(&centered) / lambda
        } else {
            0.0
        }
    });

    // Projected Laplace precision (P_rᵀ H P_r + I) as the proposal shape.
    let j_map = problem.forward.jacobian(&laplace.map_point)?;
    let w = crate::linalg::solve_lower(
        problem.noise.chol_lower(),
        &(j_map * basis.basis()),
        "noise Cholesky",
    )?;
    let precision = w.transpose() * &w + DMatrix::identity(rank, rank);
    let proposal_cov = nalgebra::Cholesky::new(precision)
        .ok_or_else(|| Error::not_positive_definite("prior-reduced proposal precision"))?
        .inverse()
        * am_scale(rank);

    let mut cfg = sampler.to_sampler_config(chain_seed(master_seed, MethodName::Prired, rank));
    cfg.initial_proposal_cov = Some(crate::linalg::symmetrize(&proposal_cov));

    let chain = run_am(
        nan_target(|alpha| crate::prior_reduction::reduced_log_posterior(alpha, problem, &basis)),
        &x_init,
        &cfg,
    )?;
    let ess = ess_report(&chain)?;

    let retained = chain.retained();
    let n = problem.state_dim();
    let mut lifted = DMatrix::zeros(retained.nrows(), n);
    for i in 0..retained.nrows() {
        let alpha = retained.row(i).transpose();
        let x = lift(&alpha, &basis, &problem.prior)?;
        lifted.row_mut(i).copy_from(&x.transpose());
    }

    let vectors = prior_basis_vectors(&basis);
    Ok(MethodRun {
        method: MethodName::Prired,
        rank: Some(rank),
        chain,
        lifted,
        labels: (1..=rank).map(|i| format!("alpha_{i}")).collect(),
        basis_state: Some(basis.basis().clone()),
        basis_vectors: Some(vectors),
        spectrum: Some(basis.singular_values().clone()),
        ess,
    })
}

fn prior_basis_vectors(basis: &PriorBasis) -> DMatrix<f64> {
    let mut vectors = basis.basis().clone();
    for (i, mut col) in vectors.column_iter_mut().enumerate() {
        let lambda = basis.singular_values()[i].max(0.0).sqrt();
        if lambda > 0.0 {
            col /= lambda;
        }
    }
    vectors
}

/// Per-layer posterior mean and central 95% band of a lifted sample set.
pub fn posterior_envelope(lifted: &DMatrix<f64>) -> Vec<(f64, f64, f64)> {
    let rows = lifted.nrows();
    (0..lifted.ncols())
        .map(|c| {
            let mut values: Vec<f64> = lifted.column(c).iter().cloned().collect();
            values.sort_by(f64::total_cmp);
            let mean = values.iter().sum::<f64>() / rows as f64;
            let q = |p: f64| values[((rows - 1) as f64 * p).round() as usize];
            (mean, q(0.025), q(0.975))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// File-level commands
// ---------------------------------------------------------------------------

fn write_file(dir: &Path, name: &str, content: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), content)?;
    Ok(())
}

fn method_tag(config: &ExperimentConfig) -> String {
    match config.method.name {
        MethodName::Full => "retrieve_full".to_string(),
        MethodName::Lis => match (config.method.rank, config.method.threshold) {
            (_, Some(t)) => format!("retrieve_lis_tau{t}"),
            (r, None) => format!("retrieve_lis_r{}", r.unwrap_or(crate::experiment::DEFAULT_RANK)),
        },
        MethodName::Prired => format!(
            "retrieve_prired_r{}",
            config.method.rank.unwrap_or(crate::experiment::DEFAULT_RANK)
        ),
    }
}

pub struct SimulateArtifacts {
    pub dir: PathBuf,
    pub truth: DVector<f64>,
    pub noisy: DVector<f64>,
}

pub fn cmd_simulate(config: &ExperimentConfig) -> Result<SimulateArtifacts> {
    config.validate()?;
    let prepared = prepare_synthetic(config)?;
    let dir = Path::new(&config.output.dir).join("simulate");
    let grid = &prepared.grid;
    let setup = &prepared.setup;
    let truth = prepared.truth.as_ref().expect("synthetic truth").clone();
    let clean = prepared.clean_spectrum.as_ref().expect("clean spectrum");
    let noisy = prepared.problem.data.intensities().clone();

    let mut profile = String::from("layer,altitude_km,density\n");
    for l in 0..grid.layer_count() {
        profile.push_str(&format!("{l},{},{}\n", grid.midpoint(l), truth[l]));
    }
    write_file(&dir, "true_profile.csv", &profile)?;
    write_file(
        &dir,
        "spectrum_clean.csv",
        &io::write_spectrum_csv(setup.wavelengths(), clean),
    )?;
    write_file(
        &dir,
        "spectrum_noisy.csv",
        &io::write_spectrum_csv(setup.wavelengths(), &noisy),
    )?;
    for gas in 0..setup.gas_count() {
        write_file(
            &dir,
            &format!("cross_section_gas{gas}.csv"),
            &io::write_cross_sections(setup.wavelengths(), setup.cross_section(gas)),
        )?;
    }
    write_file(
        &dir,
        "ensemble.txt",
        &io::write_ensemble(&prepared.ensemble, &grid.midpoints()),
    )?;
    write_file(
        &dir,
        "prior.txt",
        &io::write_prior(
            prepared.problem.prior.mean(),
            prepared.problem.prior.covariance(),
        ),
    )?;

    let j_tilde = prepared
        .problem
        .whitened_jacobian(prepared.problem.prior.mean())?;
    let dof = lis::dof_signal(&j_tilde, lis::SIGNAL_THRESHOLD);
    let sigma = prepared.problem.noise.covariance()[(0, 0)].sqrt();
    let manifest = vec![
        ("seed".to_string(), config.seed.to_string()),
        ("config_hash".to_string(), config.config_hash()),
        ("wavelengths".to_string(), setup.wavelength_count().to_string()),
        ("layers".to_string(), grid.layer_count().to_string()),
        ("noise_sigma".to_string(), sigma.to_string()),
        ("noise_free".to_string(), config.problem.noise_free.to_string()),
        ("dof_signal".to_string(), dof.to_string()),
    ];
    write_file(&dir, "manifest.txt", &io::write_key_values(&manifest))?;

    Ok(SimulateArtifacts { dir, truth, noisy })
}

pub struct RetrieveArtifacts {
    pub dir: PathBuf,
    pub run: MethodRun,
    pub laplace_converged: bool,
}

pub fn cmd_retrieve(config: &ExperimentConfig) -> Result<RetrieveArtifacts> {
    config.validate()?;
    let prepared = prepare_retrieval(config)?;
    let problem = &prepared.problem;
    let laplace = fit_laplace(problem)?;
    let selection = config.method.selection()?;

    let mut warnings = Vec::new();
    if !laplace.converged {
        warnings.push(
            "map_not_converged: Laplace reference distribution may be degraded".to_string(),
        );
    }

    let run = match config.method.name {
        MethodName::Full => run_full_method(problem, &laplace, &config.sampler, config.seed)?,
        MethodName::Lis => {
            let j_hat = reference_jacobian(
                problem,
                &laplace,
                config.method.reference_samples,
                config.seed,
            )?;
            run_lis_method(
                problem,
                &laplace,
                &j_hat,
                selection.expect("lis selection"),
                &config.sampler,
                config.seed,
            )?
        }
        MethodName::Prired => {
            let rank = match selection {
                Some(RankSelection::Rank(r)) => r,
                _ => crate::experiment::DEFAULT_RANK,
            };
            run_prired_method(problem, &laplace, rank, &config.sampler, config.seed)?
        }
    };

    let dir = Path::new(&config.output.dir).join(method_tag(config));
    write_run_outputs(&dir, config, &prepared, &laplace, &run, &warnings)?;
    Ok(RetrieveArtifacts {
        dir,
        run,
        laplace_converged: laplace.converged,
    })
}

fn write_run_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    prepared: &PreparedProblem,
    laplace: &LaplaceApprox,
    run: &MethodRun,
    warnings: &[String],
) -> Result<()> {
    let grid = &prepared.grid;
    let altitudes = grid.midpoints();
    let n = grid.layer_count();

    if run.method != MethodName::Full {
        write_file(
            dir,
            "chain_reduced.csv",
            &io::write_chain_csv(&run.labels, &run.chain.retained())?,
        )?;
    }
    write_file(
        dir,
        "chain_full.csv",
        &io::write_chain_csv(&layer_labels(n), &run.lifted)?,
    )?;

    let envelope = posterior_envelope(&run.lifted);
    let mut env_csv = String::from("layer,altitude_km,mean,q2.5,q97.5\n");
    for (l, (mean, lo, hi)) in envelope.iter().enumerate() {
        env_csv.push_str(&format!("{l},{},{mean},{lo},{hi}\n", altitudes[l]));
    }
    write_file(dir, "posterior_envelope.csv", &env_csv)?;

    if let Some(basis) = &run.basis_state {
        write_file(dir, "basis_state.csv", &io::write_basis(&altitudes, basis, "b"))?;
    }
    if let Some(vectors) = &run.basis_vectors {
        write_file(dir, "basis_vectors.csv", &io::write_basis(&altitudes, vectors, "v"))?;
    }
    if let Some(spectrum) = &run.spectrum {
        write_file(dir, "singular_values.csv", &io::write_singular_values(spectrum))?;
    }
    let prior_basis = build_prior_basis(&prepared.problem.prior, 1)?;
    write_file(
        dir,
        "prior_spectrum.csv",
        &io::write_singular_values(prior_basis.singular_values()),
    )?;

    // Deterministic diagnostics; wall-time-derived numbers go to timing.txt.
    let mut diag = String::new();
    diag.push_str(&io::write_key_values(&[
        ("method".to_string(), run.method.as_str().to_string()),
        (
            "rank".to_string(),
            run.rank.map_or("-".to_string(), |r| r.to_string()),
        ),
        ("chain_length".to_string(), run.chain.len().to_string()),
        ("burn_in".to_string(), run.chain.burn_in().to_string()),
        ("dimension".to_string(), run.chain.dimension().to_string()),
        (
            "acceptance_rate".to_string(),
            run.chain.acceptance_rate().to_string(),
        ),
        ("nan_rejects".to_string(), run.chain.nan_rejects().to_string()),
        ("min_ess".to_string(), run.ess.min_n_eff.to_string()),
    ]));
    diag.push_str("coordinate,ess\n");
    for (label, e) in run.labels.iter().zip(&run.ess.n_eff) {
        diag.push_str(&format!("{label},{e}\n"));
    }
    write_file(dir, "diagnostics.txt", &diag)?;

    let mut timing = vec![
        (
            "wall_time_seconds".to_string(),
            run.chain.wall_time_seconds().to_string(),
        ),
        (
            "min_sample_speed".to_string(),
            run.ess.min_speed.to_string(),
        ),
    ];
    for (label, s) in run.labels.iter().zip(&run.ess.speed) {
        timing.push((format!("speed_{label}"), s.to_string()));
    }
    write_file(dir, "timing.txt", &io::write_key_values(&timing))?;

    let mut manifest = vec![
        ("seed".to_string(), config.seed.to_string()),
        ("config_hash".to_string(), config.config_hash()),
        ("method".to_string(), run.method.as_str().to_string()),
        (
            "rank".to_string(),
            run.rank.map_or("-".to_string(), |r| r.to_string()),
        ),
        (
            "map_converged".to_string(),
            laplace.converged.to_string(),
        ),
        (
            "map_iterations".to_string(),
            laplace.iterations.to_string(),
        ),
    ];
    for (i, w) in warnings.iter().enumerate() {
        manifest.push((format!("warning_{i}"), w.clone()));
    }
    write_file(dir, "manifest.txt", &io::write_key_values(&manifest))?;
    Ok(())
}

pub struct ComparePoint {
    pub rank: usize,
    pub method: MethodName,
    pub hellinger: f64,
    pub per_coordinate: Vec<f64>,
    pub min_speed: f64,
    pub min_ess: f64,
    pub wall_time_seconds: f64,
}

pub struct CompareArtifacts {
    pub dir: PathBuf,
    pub points: Vec<ComparePoint>,
    pub reference_floor: f64,
}

/// Runs both reduced methods over the configured ranks against a reference
/// full-space sample set, in memory.
pub fn run_sweep(
    problem: &InverseProblem,
    laplace: &LaplaceApprox,
    j_hat: &DMatrix<f64>,
    reference: &DMatrix<f64>,
    ranks: &[usize],
    sampler: &crate::experiment::SamplerSection,
    master_seed: u64,
) -> Result<Vec<ComparePoint>> {
    let mut points = Vec::new();
    for &rank in ranks {
        for method in [MethodName::Lis, MethodName::Prired] {
            let run = match method {
                MethodName::Lis => run_lis_method(
                    problem,
                    laplace,
                    j_hat,
                    RankSelection::Rank(rank),
                    sampler,
                    master_seed,
                )?,
                MethodName::Prired => {
                    run_prired_method(problem, laplace, rank, sampler, master_seed)?
                }
                MethodName::Full => unreachable!(),
            };
            let report = posterior_hellinger(&run.lifted, reference)?;
            points.push(ComparePoint {
                rank,
                method,
                hellinger: report.mean,
                per_coordinate: report.per_coordinate,
                min_speed: run.ess.min_speed,
                min_ess: run.ess.min_n_eff,
                wall_time_seconds: run.chain.wall_time_seconds(),
            });
        }
    }
    Ok(points)
}

/// Split-half marginal Hellinger distance of a sample set against itself:
/// the resolution floor below which distances are indistinguishable.
pub fn split_half_floor(samples: &DMatrix<f64>) -> Result<f64> {
    let half = samples.nrows() / 2;
    if half == 0 {
        return Err(Error::invalid("too few samples for a split-half floor"));
    }
    let a = samples.rows(0, half).into_owned();
    let b = samples.rows(half, samples.nrows() - half).into_owned();
    Ok(posterior_hellinger(&a, &b)?.mean)
}

pub fn cmd_compare(config: &ExperimentConfig) -> Result<CompareArtifacts> {
    config.validate()?;
    let reference_dir = config
        .compare
        .reference_run
        .as_ref()
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(&config.output.dir).join("retrieve_full"));
    let reference_chain_path = reference_dir.join("chain_full.csv");
    let text = fs::read_to_string(&reference_chain_path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!(
                "missing reference run: cannot read {} (run `retrieve` with \
                 method = \"full\" first): {e}",
                reference_chain_path.display()
            ),
        ))
    })?;
    let (_labels, reference) = io::read_chain_csv(&text)?;

    let prepared = prepare_retrieval(config)?;
    let problem = &prepared.problem;
    if reference.ncols() != problem.state_dim() {
        return Err(Error::DimensionMismatch {
            axis: "reference chain dimension",
            expected: problem.state_dim(),
            actual: reference.ncols(),
        });
    }
    let laplace = fit_laplace(problem)?;
    let j_hat = reference_jacobian(
        problem,
        &laplace,
        config.method.reference_samples,
        config.seed,
    )?;

    let points = run_sweep(
        problem,
        &laplace,
        &j_hat,
        &reference,
        &config.compare.ranks,
        &config.sampler,
        config.seed,
    )?;
    let reference_floor = split_half_floor(&reference)?;

    let dir = Path::new(&config.output.dir).join("compare");

    let mut table = String::from("rank,method,hellinger,sample_speed\n");
    for p in &points {
        table.push_str(&format!(
            "{},{},{},{}\n",
            p.rank,
            p.method.as_str(),
            p.hellinger,
            p.min_speed
        ));
    }
    write_file(&dir, "compare.csv", &table)?;

    let mut hell = String::from("rank,method,hellinger\n");
    for p in &points {
        hell.push_str(&format!("{},{},{}\n", p.rank, p.method.as_str(), p.hellinger));
    }
    write_file(&dir, "compare_hellinger.csv", &hell)?;

    let mut per_coord = String::from("rank,method,coordinate,hellinger\n");
    for p in &points {
        for (c, h) in p.per_coordinate.iter().enumerate() {
            per_coord.push_str(&format!("{},{},{c},{h}\n", p.rank, p.method.as_str()));
        }
    }
    write_file(&dir, "hellinger_per_coordinate.csv", &per_coord)?;

    let altitudes = prepared.grid.midpoints();
    let show = 4.min(problem.state_dim());
    let lis_basis = lis::build_lis(&j_hat, &problem.prior, RankSelection::Rank(show))?;
    write_file(
        &dir,
        "lis_vectors.csv",
        &io::write_basis(&altitudes, lis_basis.v_r(), "v"),
    )?;
    let prior_basis = build_prior_basis(&problem.prior, show)?;
    write_file(
        &dir,
        "prired_vectors.csv",
        &io::write_basis(&altitudes, &prior_basis_vectors(&prior_basis), "u"),
    )?;
    write_file(
        &dir,
        "prior_spectrum.csv",
        &io::write_singular_values(prior_basis.singular_values()),
    )?;
    write_file(
        &dir,
        "jhat_spectrum.csv",
        &io::write_singular_values(lis_basis.singular_values()),
    )?;

    let mut timing = Vec::new();
    for p in &points {
        timing.push((
            format!("wall_time_{}_r{}", p.method.as_str(), p.rank),
            p.wall_time_seconds.to_string(),
        ));
        timing.push((
            format!("speed_{}_r{}", p.method.as_str(), p.rank),
            p.min_speed.to_string(),
        ));
    }
    write_file(&dir, "timing.txt", &io::write_key_values(&timing))?;

    let manifest = vec![
        ("seed".to_string(), config.seed.to_string()),
        ("config_hash".to_string(), config.config_hash()),
        (
            "reference_run".to_string(),
            reference_dir.display().to_string(),
        ),
        (
            "ranks".to_string(),
            config
                .compare
                .ranks
                .iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
                .join(" "),
        ),
        (
            "reference_split_half_floor".to_string(),
            reference_floor.to_string(),
        ),
        (
            "rows".to_string(),
            points.len().to_string(),
        ),
    ];
    write_file(&dir, "manifest.txt", &io::write_key_values(&manifest))?;

    Ok(CompareArtifacts {
        dir,
        points,
        reference_floor,
    })
}

/// Recomputes chain diagnostics for an existing run directory and writes
/// `report.txt` there. Returns the report text.
pub fn cmd_report(run_dir: &Path) -> Result<String> {
    let reduced = run_dir.join("chain_reduced.csv");
    let full = run_dir.join("chain_full.csv");
    let chain_path = if reduced.exists() { reduced } else { full };
    let text = fs::read_to_string(&chain_path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("cannot read chain {}: {e}", chain_path.display()),
        ))
    })?;
    let (labels, samples) = io::read_chain_csv(&text)?;

    let timing_text = fs::read_to_string(run_dir.join("timing.txt")).unwrap_or_default();
    let timing = io::read_key_values(&timing_text).unwrap_or_default();
    let wall: Option<f64> = timing
        .iter()
        .find(|(k, _)| k == "wall_time_seconds")
        .and_then(|(_, v)| v.parse().ok());

    let mut out = String::new();
    out.push_str(&format!("chain = {}\n", chain_path.display()));
    out.push_str(&format!("samples = {}\n", samples.nrows()));
    out.push_str(&format!("dimension = {}\n", samples.ncols()));
    if let Some(w) = wall {
        out.push_str(&format!("wall_time_seconds = {w}\n"));
    }
    out.push_str("coordinate,ess,sample_speed\n");
    let mut min_ess = f64::INFINITY;
    for (c, label) in labels.iter().enumerate() {
        let series: Vec<f64> = samples.column(c).iter().cloned().collect();
        let e = crate::diagnostics::ess(&series)?;
        min_ess = min_ess.min(e);
        match wall {
            Some(w) if w > 0.0 => out.push_str(&format!("{label},{e},{}\n", e / w)),
            _ => out.push_str(&format!("{label},{e},-\n")),
        }
    }
    out.push_str(&format!("min_ess = {min_ess}\n"));
    fs::write(run_dir.join("report.txt"), &out)?;
    Ok(out)
}
