//! Experiment configuration: a TOML file with sections for the problem,
//! the retrieval method, the sampler, and the output layout.
//!
//! [`load_config`] parses and validates; [`CONFIG_TEMPLATE`] is the
//! commented template emitted by the CLI `init` subcommand and doubles as
//! the documentation of every default.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lis::RankSelection;
use crate::synthetic::SyntheticConfig;

/// Default rank for both reduction methods.
pub const DEFAULT_RANK: usize = 4;

/// Default number of reference-distribution draws for the averaged
/// Jacobian.
pub const DEFAULT_REFERENCE_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Full,
    Lis,
    Prired,
}

impl MethodName {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodName::Full => "full",
            MethodName::Lis => "lis",
            MethodName::Prired => "prired",
        }
    }
}

impl std::str::FromStr for MethodName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(MethodName::Full),
            "lis" => Ok(MethodName::Lis),
            "prired" => Ok(MethodName::Prired),
            other => Err(Error::config(format!(
                "unknown method {other:?}; expected full, lis, or prired"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodSection {
    pub name: MethodName,
    pub rank: Option<usize>,
    pub threshold: Option<f64>,
    /// Laplace draws used to average the whitened Jacobian for LIS.
    pub reference_samples: usize,
}

impl Default for MethodSection {
    fn default() -> Self {
        Self {
            name: MethodName::Lis,
            rank: None,
            threshold: None,
            reference_samples: DEFAULT_REFERENCE_SAMPLES,
        }
    }
}

impl MethodSection {
    /// Resolves the subspace selection rule; `None` for the full method.
    pub fn selection(&self) -> Result<Option<RankSelection>> {
        match self.name {
            MethodName::Full => {
                if self.rank.is_some() || self.threshold.is_some() {
                    return Err(Error::config(
                        "method 'full' takes neither rank nor threshold".to_string(),
                    ));
                }
                Ok(None)
            }
            MethodName::Lis => match (self.rank, self.threshold) {
                (Some(_), Some(_)) => Err(Error::config(
                    "give either rank or threshold for lis, not both".to_string(),
                )),
                (Some(r), None) => Ok(Some(RankSelection::Rank(r))),
                (None, Some(t)) => Ok(Some(RankSelection::Threshold(t))),
                (None, None) => Ok(Some(RankSelection::Rank(DEFAULT_RANK))),
            },
            MethodName::Prired => {
                if self.threshold.is_some() {
                    return Err(Error::config(
                        "prior reduction selects by rank only".to_string(),
                    ));
                }
                Ok(Some(RankSelection::Rank(self.rank.unwrap_or(DEFAULT_RANK))))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub synthetic: SyntheticConfig,
    /// Optional ensemble file for the prior; generated when absent.
    pub ensemble_path: Option<String>,
    /// Measurement to retrieve from; defaults to the simulate output under
    /// the output directory.
    pub spectrum_path: Option<String>,
    /// Jitter added to the empirical prior covariance, relative to its
    /// mean diagonal.
    pub prior_jitter: f64,
    /// Skip the noise draw in `simulate` (the noise model itself keeps its
    /// configured level).
    pub noise_free: bool,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            synthetic: SyntheticConfig::default(),
            ensemble_path: None,
            spectrum_path: None,
            prior_jitter: crate::synthetic::PRIOR_JITTER,
            noise_free: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub chain_length: usize,
    /// Defaults to 20% of the chain length.
    pub burn_in: Option<usize>,
    pub adapt_start: usize,
    pub adapt_interval: usize,
    pub regularization_eps: f64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self {
            chain_length: 100_000,
            burn_in: None,
            adapt_start: 1000,
            adapt_interval: 100,
            regularization_eps: 1e-10,
        }
    }
}

impl SamplerSection {
    pub fn resolved_burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.chain_length / 5)
    }

    pub fn to_sampler_config(&self, seed: u64) -> crate::mcmc::SamplerConfig {
        crate::mcmc::SamplerConfig {
            chain_length: self.chain_length,
            burn_in: self.resolved_burn_in(),
            adapt_start: self.adapt_start,
            adapt_interval: self.adapt_interval,
            initial_proposal_cov: None,
            regularization_eps: self.regularization_eps,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "out".to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    /// Directory of an existing full-space retrieve run used as reference.
    pub reference_run: Option<String>,
    pub ranks: Vec<usize>,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            reference_run: None,
            ranks: (1..=8).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every stochastic stage derives its own stream from it.
    pub seed: u64,
    pub problem: ProblemSection,
    pub method: MethodSection,
    pub sampler: SamplerSection,
    pub output: OutputSection,
    pub compare: CompareSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            problem: ProblemSection::default(),
            method: MethodSection::default(),
            sampler: SamplerSection::default(),
            output: OutputSection::default(),
            compare: CompareSection::default(),
        }
    }
}

impl ExperimentConfig {
    /// The synthetic-problem config with the master seed applied.
    pub fn effective_synthetic(&self) -> SyntheticConfig {
        SyntheticConfig {
            seed: self.seed,
            ..self.problem.synthetic.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.method.selection()?;
        if self.sampler.chain_length == 0 {
            return Err(Error::config("sampler.chain_length must be positive"));
        }
        if self.sampler.resolved_burn_in() >= self.sampler.chain_length {
            return Err(Error::config(format!(
                "sampler.burn_in {} must be smaller than chain_length {}",
                self.sampler.resolved_burn_in(),
                self.sampler.chain_length
            )));
        }
        if self.sampler.adapt_start == 0 || self.sampler.adapt_interval == 0 {
            return Err(Error::config(
                "sampler.adapt_start and sampler.adapt_interval must be positive",
            ));
        }
        if self.sampler.regularization_eps.is_nan() || self.sampler.regularization_eps <= 0.0 {
            return Err(Error::config(
                "sampler.regularization_eps must be positive",
            ));
        }
        if self.problem.prior_jitter.is_nan() || self.problem.prior_jitter <= 0.0 {
            return Err(Error::config("problem.prior_jitter must be positive"));
        }
        if self.method.reference_samples == 0 {
            return Err(Error::config(
                "method.reference_samples must be positive",
            ));
        }
        if self.compare.ranks.is_empty() {
            return Err(Error::config("compare.ranks must not be empty"));
        }
        if self.compare.ranks.contains(&0) {
            return Err(Error::config("compare.ranks must all be positive"));
        }
        if self.output.dir.is_empty() {
            return Err(Error::config("output.dir must not be empty"));
        }
        Ok(())
    }

    /// Stable FNV-1a hash of the resolved configuration, recorded in run
    /// manifests so outputs can be traced back to their exact settings.
    pub fn config_hash(&self) -> String {
        let canonical = toml::to_string(self).unwrap_or_default();
        fnv1a_hex(canonical.as_bytes())
    }
}

/// Parses and validates a configuration file.
pub fn load_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig =
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

/// The commented configuration template written by `init`. Every value
/// shown is the default.
pub const CONFIG_TEMPLATE: &str = r#"# Retrieval experiment configuration.
# Every value below is the built-in default; the file is valid as is.

# Master seed. All randomness (lines, ensemble, truth, noise, chains,
# complement draws) derives deterministic sub-streams from it.
seed = 1

[problem]
# Prior ensemble file (one profile per row, optional '#' altitude header).
# When unset, a synthetic ensemble is generated from [problem.synthetic];
# the bundled data/ensemble_default.txt holds exactly that default output.
#ensemble_path = "data/ensemble_default.txt"

# Measurement to retrieve from. When unset, `retrieve` and `compare` look
# for <output.dir>/simulate/spectrum_noisy.csv, i.e. run `simulate` first.
#spectrum_path = "out/simulate/spectrum_noisy.csv"

# Jitter added to the empirical prior covariance (relative to its mean
# diagonal) so rank-deficient ensembles still give an invertible prior.
prior_jitter = 1e-6

# If true, `simulate` writes the noiseless spectrum as the measurement.
noise_free = false

[problem.synthetic]
wavelength_count = 200     # spectral channels m
layer_count = 50           # atmospheric layers n
line_count = 10            # absorption lines of the retrieved gas
wavelength_min = 1630.0    # nm
wavelength_max = 1700.0    # nm
line_width_min = 0.8       # ground-level Lorentzian half-width, nm
line_width_max = 2.5
line_strength = 1.0        # rescaled by the degrees-of-freedom calibration
pressure_scale_km = 8.0    # line-width narrowing scale with altitude
gas_scale_km = 14.0        # density decay scale
top_altitude_km = 50.0
noise_relative = 0.001     # noise sigma as a fraction of peak continuum
ensemble_size = 80         # members of the generated prior ensemble
prior_length_scale_km = 5.0
prior_amplitude = 0.35
seed = 1                   # ignored by the CLI: the top-level seed wins

[method]
name = "lis"               # full | lis | prired
rank = 4                   # subspace rank for lis / prired
#threshold = 1.0           # lis only: keep singular values >= threshold
reference_samples = 1000   # Laplace draws averaged into the LIS Jacobian

[sampler]
chain_length = 100000
#burn_in = 20000           # default: 20% of chain_length
adapt_start = 1000         # steps before proposal adaptation begins
adapt_interval = 100       # steps between proposal refreshes
regularization_eps = 1e-10 # diagonal ridge on the adapted proposal

[output]
dir = "out"

[compare]
# Existing full-space retrieve run used as the reference posterior.
#reference_run = "out/retrieve_full"
ranks = [1, 2, 3, 4, 5, 6, 7, 8]
"#;
