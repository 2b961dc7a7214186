//! Chain diagnostics: autocorrelation, effective sample size, sample speed,
//! marginal histograms, and the discrete Hellinger distance used to compare
//! posterior approximations.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mcmc::Chain;

/// Default number of histogram bins.
pub const DEFAULT_BINS: usize = 50;

/// Quantile span of the shared histogram range; one part in a thousand is
/// trimmed at each end so a single outlier cannot stretch all bins.
const EDGE_QUANTILE: f64 = 0.001;

/// Sample speeds reported for this three-way method comparison in earlier
/// published runs, in effective samples per second. Hardware-dependent,
/// recorded for orientation only and never asserted.
pub mod reference_speeds {
    pub const FULL_SPACE: f64 = 1.56;
    pub const LIS: f64 = 19.01;
    pub const PRIOR_REDUCTION: f64 = 19.66;
}

/// Biased (divide-by-N) autocorrelation estimates ρ_0..ρ_max_lag.
///
/// Errors on series shorter than 2 or with zero variance, where the
/// autocorrelation is undefined.
pub fn autocorr(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 2 {
        return Err(Error::invalid(format!(
            "autocorrelation needs at least 2 points, got {n}"
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var = series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return Err(Error::invalid(
            "autocorrelation of a constant series is undefined".to_string(),
        ));
    }
    let max_lag = max_lag.min(n - 1);
    let mut rho = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let cov = (0..n - lag)
            .map(|i| (series[i] - mean) * (series[i + lag] - mean))
            .sum::<f64>()
            / n as f64;
        rho.push(cov / var);
    }
    Ok(rho)
}

/// Effective sample size `N / (1 + 2·Σ ρ_k)` with the sum truncated at the
/// first lag where `ρ_k + ρ_{k+1}` turns negative, and the result clamped
/// into (1, N]. A nonpositive denominator (super-efficient chains) clamps
/// to N.
///
/// Autocorrelations are computed lag by lag so the cost is governed by the
/// truncation point, not the chain length.
pub fn ess(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < 2 {
        return Err(Error::invalid(format!(
            "effective sample size needs at least 2 points, got {n}"
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var = series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return Err(Error::invalid(
            "autocorrelation of a constant series is undefined".to_string(),
        ));
    }
    let rho = |lag: usize| -> f64 {
        (0..n - lag)
            .map(|i| (series[i] - mean) * (series[i + lag] - mean))
            .sum::<f64>()
            / n as f64
            / var
    };
    let max_lag = (n - 1).min(n / 2).max(1);
    let mut sum = 0.0;
    let mut current = rho(1);
    let mut k = 1;
    while k < max_lag {
        let next = rho(k + 1);
        if current + next < 0.0 {
            break;
        }
        sum += current;
        current = next;
        k += 1;
    }
    let denom = 1.0 + 2.0 * sum;
    let raw = if denom <= 0.0 {
        f64::INFINITY
    } else {
        n as f64 / denom
    };
    Ok(raw.clamp(1.0, n as f64))
}

/// Effective samples per second.
pub fn sample_speed(n_eff: f64, wall_time_seconds: f64) -> Result<f64> {
    if wall_time_seconds.is_nan() || wall_time_seconds <= 0.0 {
        return Err(Error::invalid(format!(
            "wall time must be positive, got {wall_time_seconds}"
        )));
    }
    Ok(n_eff / wall_time_seconds)
}

/// Per-coordinate effective sample sizes and sample speeds of a chain.
///
/// Effective sizes are computed on the post-burn-in samples; the time
/// denominator is the wall time of the whole run. The summary speed is the
/// minimum across coordinates, i.e. the worst-mixing coordinate governs.
#[derive(Debug, Clone)]
pub struct EssReport {
    pub n_eff: Vec<f64>,
    pub chain_length: usize,
    pub wall_time_seconds: f64,
    pub speed: Vec<f64>,
    pub min_n_eff: f64,
    pub min_speed: f64,
}

pub fn ess_report(chain: &Chain) -> Result<EssReport> {
    let retained = chain.len() - chain.burn_in();
    if retained == 0 {
        return Err(Error::invalid("chain is empty after burn-in".to_string()));
    }
    let mut n_eff = Vec::with_capacity(chain.dimension());
    let mut speed = Vec::with_capacity(chain.dimension());
    for coord in 0..chain.dimension() {
        let series = chain.retained_coordinate(coord);
        let e = ess(&series)?;
        n_eff.push(e);
        speed.push(sample_speed(e, chain.wall_time_seconds())?);
    }
    let min_n_eff = n_eff.iter().cloned().fold(f64::INFINITY, f64::min);
    let min_speed = speed.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(EssReport {
        n_eff,
        chain_length: retained,
        wall_time_seconds: chain.wall_time_seconds(),
        speed,
        min_n_eff,
        min_speed,
    })
}

/// Normalized histogram over fixed bin edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    edges: Vec<f64>,
    masses: Vec<f64>,
}

impl Histogram {
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn bin_count(&self) -> usize {
        self.masses.len()
    }
}

/// Shared bin edges spanning the pooled 0.1%..99.9% quantile range of both
/// sample sets. Deterministic given the inputs.
pub fn shared_edges(a: &[f64], b: &[f64], bins: usize) -> Result<Vec<f64>> {
    if bins == 0 {
        return Err(Error::invalid("need at least one bin".to_string()));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid(
            "cannot build edges from empty samples".to_string(),
        ));
    }
    let mut pooled: Vec<f64> = a.iter().chain(b.iter()).cloned().collect();
    if pooled.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "histogram samples",
        });
    }
    pooled.sort_by(f64::total_cmp);
    let lo_idx = ((pooled.len() as f64 - 1.0) * EDGE_QUANTILE).floor() as usize;
    let hi_idx = ((pooled.len() as f64 - 1.0) * (1.0 - EDGE_QUANTILE)).ceil() as usize;
    let mut lo = pooled[lo_idx];
    let mut hi = pooled[hi_idx];
    if hi - lo < 1e-12 {
        // Degenerate spread: widen symmetrically so everything lands in the
        // middle bins.
        let pad = 0.5 * lo.abs().max(1.0) * 1e-6 + 0.5;
        lo -= pad;
        hi += pad;
    }
    let width = (hi - lo) / bins as f64;
    Ok((0..=bins).map(|i| lo + width * i as f64).collect())
}

/// Bins samples on the given edges. Values outside the range are clamped
/// into the first or last bin, so the masses always sum to one.
pub fn histogram(values: &[f64], edges: &[f64]) -> Result<Histogram> {
    if edges.len() < 2 {
        return Err(Error::invalid("need at least two bin edges".to_string()));
    }
    if edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "bin edges must be strictly increasing".to_string(),
        ));
    }
    if values.is_empty() {
        return Err(Error::invalid("cannot bin an empty sample".to_string()));
    }
    let bins = edges.len() - 1;
    let lo = edges[0];
    let hi = edges[bins];
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in values {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "histogram samples",
            });
        }
        let idx = (((v - lo) / width).floor() as i64).clamp(0, bins as i64 - 1) as usize;
        counts[idx] += 1;
    }
    let total = values.len() as f64;
    Ok(Histogram {
        edges: edges.to_vec(),
        masses: counts.iter().map(|&c| c as f64 / total).collect(),
    })
}

/// Discrete Hellinger distance `(1/√2)·√(Σ(√p_i − √q_i)²)` between two
/// histograms on identical edges. Symmetric, bounded by [0, 1].
pub fn hellinger(p: &Histogram, q: &Histogram) -> Result<f64> {
    if p.edges != q.edges {
        return Err(Error::invalid(
            "hellinger distance needs identical bin edges".to_string(),
        ));
    }
    let sum: f64 = p
        .masses
        .iter()
        .zip(&q.masses)
        .map(|(&a, &b)| {
            let d = a.sqrt() - b.sqrt();
            d * d
        })
        .sum();
    Ok((sum.sqrt() / std::f64::consts::SQRT_2).min(1.0))
}

/// Per-coordinate marginal histograms of a sample matrix (rows = draws) on
/// edges shared with a reference sample matrix.
pub fn marginal_histograms(
    samples: &DMatrix<f64>,
    reference: &DMatrix<f64>,
    bins: usize,
) -> Result<Vec<(Histogram, Histogram)>> {
    if samples.ncols() != reference.ncols() {
        return Err(Error::DimensionMismatch {
            axis: "marginal histogram coordinates",
            expected: reference.ncols(),
            actual: samples.ncols(),
        });
    }
    let mut out = Vec::with_capacity(samples.ncols());
    for coord in 0..samples.ncols() {
        let a: Vec<f64> = samples.column(coord).iter().cloned().collect();
        let b: Vec<f64> = reference.column(coord).iter().cloned().collect();
        let edges = shared_edges(&a, &b, bins)?;
        out.push((histogram(&a, &edges)?, histogram(&b, &edges)?));
    }
    Ok(out)
}

/// Hellinger distances between the per-coordinate marginals of two sample
/// sets, plus their mean as the scalar summary.
#[derive(Debug, Clone)]
pub struct HellingerReport {
    pub per_coordinate: Vec<f64>,
    pub mean: f64,
}

/// Mean per-coordinate marginal Hellinger distance between two full-space
/// sample matrices (rows = draws). Reduced chains must be lifted first.
pub fn posterior_hellinger(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<HellingerReport> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            axis: "posterior hellinger coordinates",
            expected: b.ncols(),
            actual: a.ncols(),
        });
    }
    if a.ncols() == 0 {
        return Err(Error::invalid("empty sample matrices".to_string()));
    }
    let pairs = marginal_histograms(a, b, DEFAULT_BINS)?;
    let per_coordinate: Vec<f64> = pairs
        .iter()
        .map(|(p, q)| hellinger(p, q))
        .collect::<Result<_>>()?;
    let mean = per_coordinate.iter().sum::<f64>() / per_coordinate.len() as f64;
    Ok(HellingerReport {
        per_coordinate,
        mean,
    })
}
