//! Beer-Lambert absorption forward model.
//!
//! A direct-sun absorption spectrum is modeled per wavelength as
//!
//! ```text
//! I(λ) = I₀(λ) · exp(−Σ_gases Σ_layers C(λ, layer) · ρ(layer) · Δz(layer))
//!        · (a·λ² + b·λ + c) + d
//! ```
//!
//! with the integral through the atmosphere discretized as a sum over layers
//! of constant absorption (midpoint density times layer thickness). The
//! quadratic baseline and the constant offset describe instrument features;
//! they are treated as known constants, not retrieval targets. Scattering is
//! not modeled.
//!
//! Densities may be negative: the retrieval places a Gaussian prior on the
//! profile, whose support is all of ℝⁿ, and the exponential stays
//! well-defined. Clipping here would silently bias the sampler.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Vertical layering of the atmosphere: `n+1` strictly increasing altitude
/// boundaries in km enclosing `n` layers.
#[derive(Debug, Clone, PartialEq)]
pub struct AtmosphericGrid {
    boundaries: Vec<f64>,
}

impl AtmosphericGrid {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::invalid(format!(
                "grid needs at least 2 layer boundaries, got {}",
                boundaries.len()
            )));
        }
        if boundaries.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite {
                what: "grid boundaries",
            });
        }
        if boundaries[0] < 0.0 {
            return Err(Error::invalid(format!(
                "lowest boundary must be >= 0, got {}",
                boundaries[0]
            )));
        }
        if boundaries.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "grid boundaries must be strictly increasing".to_string(),
            ));
        }
        Ok(Self { boundaries })
    }

    /// Uniform grid of `layers` layers from 0 to `top_km`.
    pub fn uniform(layers: usize, top_km: f64) -> Result<Self> {
        if layers == 0 {
            return Err(Error::invalid("grid needs at least one layer".to_string()));
        }
        let step = top_km / layers as f64;
        Self::new((0..=layers).map(|i| i as f64 * step).collect())
    }

    pub fn layer_count(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn thickness(&self, layer: usize) -> f64 {
        self.boundaries[layer + 1] - self.boundaries[layer]
    }

    pub fn midpoint(&self, layer: usize) -> f64 {
        0.5 * (self.boundaries[layer] + self.boundaries[layer + 1])
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.layer_count()).map(|l| self.midpoint(l)).collect()
    }
}

/// Discretized gas-density profile: the unknown of the inverse problem.
#[derive(Debug, Clone, PartialEq)]
pub struct AtmosphericState {
    densities: DVector<f64>,
}

impl AtmosphericState {
    pub fn new(densities: DVector<f64>, grid: &AtmosphericGrid) -> Result<Self> {
        if densities.len() != grid.layer_count() {
            return Err(Error::DimensionMismatch {
                axis: "state densities",
                expected: grid.layer_count(),
                actual: densities.len(),
            });
        }
        if densities.iter().any(|d| !d.is_finite()) {
            return Err(Error::NonFinite {
                what: "state densities",
            });
        }
        Ok(Self { densities })
    }

    pub fn densities(&self) -> &DVector<f64> {
        &self.densities
    }

    pub fn len(&self) -> usize {
        self.densities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.densities.len() == 0
    }
}

/// Quadratic instrument baseline `a·λ² + b·λ + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Baseline {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Baseline {
    pub fn eval(&self, wavelength: f64) -> f64 {
        (self.a * wavelength + self.b) * wavelength + self.c
    }
}

/// Everything the forward model needs besides the retrieved profile:
/// wavelength grid, solar baseline, per-gas cross-section tables, the fixed
/// profiles of the non-retrieved gases, and the instrument baseline.
///
/// Gas 0 is the retrieved gas; `background_profiles[k]` is the fixed density
/// profile of gas `k + 1`.
#[derive(Debug, Clone)]
pub struct SpectralSetup {
    wavelengths: DVector<f64>,
    solar_intensity: DVector<f64>,
    cross_sections: Vec<DMatrix<f64>>,
    background_profiles: Vec<DVector<f64>>,
    baseline: Baseline,
    offset: f64,
}

impl SpectralSetup {
    pub fn new(
        wavelengths: DVector<f64>,
        solar_intensity: DVector<f64>,
        cross_sections: Vec<DMatrix<f64>>,
        background_profiles: Vec<DVector<f64>>,
        baseline: Baseline,
        offset: f64,
    ) -> Result<Self> {
        let m = wavelengths.len();
        if solar_intensity.len() != m {
            return Err(Error::DimensionMismatch {
                axis: "solar intensity",
                expected: m,
                actual: solar_intensity.len(),
            });
        }
        if solar_intensity.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(Error::invalid(
                "solar intensity must be strictly positive and finite".to_string(),
            ));
        }
        if cross_sections.is_empty() {
            return Err(Error::invalid("at least one gas is required".to_string()));
        }
        if cross_sections.len() != background_profiles.len() + 1 {
            return Err(Error::DimensionMismatch {
                axis: "background profiles",
                expected: cross_sections.len() - 1,
                actual: background_profiles.len(),
            });
        }
        let n = cross_sections[0].ncols();
        for (k, table) in cross_sections.iter().enumerate() {
            if table.nrows() != m {
                return Err(Error::DimensionMismatch {
                    axis: "cross-section rows",
                    expected: m,
                    actual: table.nrows(),
                });
            }
            if table.ncols() != n {
                return Err(Error::DimensionMismatch {
                    axis: "cross-section columns",
                    expected: n,
                    actual: table.ncols(),
                });
            }
            if table.iter().any(|&v| !v.is_finite() || v < 0.0) {
                return Err(Error::invalid(format!(
                    "cross-section table for gas {k} must be nonnegative and finite"
                )));
            }
        }
        for (k, profile) in background_profiles.iter().enumerate() {
            if profile.len() != n {
                return Err(Error::DimensionMismatch {
                    axis: "background profile length",
                    expected: n,
                    actual: profile.len(),
                });
            }
            if profile.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: "background profile",
                });
            }
            let _ = k;
        }
        if !baseline.a.is_finite() || !baseline.b.is_finite() || !baseline.c.is_finite() {
            return Err(Error::NonFinite {
                what: "baseline coefficients",
            });
        }
        if !offset.is_finite() {
            return Err(Error::NonFinite {
                what: "instrument offset",
            });
        }
        Ok(Self {
            wavelengths,
            solar_intensity,
            cross_sections,
            background_profiles,
            baseline,
            offset,
        })
    }

    pub fn wavelength_count(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn layer_count(&self) -> usize {
        self.cross_sections[0].ncols()
    }

    pub fn gas_count(&self) -> usize {
        self.cross_sections.len()
    }

    pub fn wavelengths(&self) -> &DVector<f64> {
        &self.wavelengths
    }

    pub fn solar_intensity(&self) -> &DVector<f64> {
        &self.solar_intensity
    }

    pub fn cross_section(&self, gas: usize) -> &DMatrix<f64> {
        &self.cross_sections[gas]
    }

    pub fn background_profile(&self, gas: usize) -> &DVector<f64> {
        &self.background_profiles[gas - 1]
    }

    pub fn baseline(&self) -> Baseline {
        self.baseline
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Peak of the unabsorbed continuum `max_j I₀(λ_j)·(a·λ_j²+b·λ_j+c)`.
    pub fn peak_continuum(&self) -> f64 {
        (0..self.wavelength_count())
            .map(|j| self.solar_intensity[j] * self.baseline.eval(self.wavelengths[j]))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Simulated absorption spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    intensities: DVector<f64>,
}

impl Spectrum {
    pub fn new(intensities: DVector<f64>) -> Self {
        Self { intensities }
    }

    pub fn intensities(&self) -> &DVector<f64> {
        &self.intensities
    }

    pub fn len(&self) -> usize {
        self.intensities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensities.len() == 0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.intensities
    }
}

fn check_dims(state: &AtmosphericState, setup: &SpectralSetup, grid: &AtmosphericGrid) -> Result<()> {
    if setup.layer_count() != grid.layer_count() {
        return Err(Error::DimensionMismatch {
            axis: "cross-section columns vs grid layers",
            expected: grid.layer_count(),
            actual: setup.layer_count(),
        });
    }
    if state.len() != grid.layer_count() {
        return Err(Error::DimensionMismatch {
            axis: "state densities vs grid layers",
            expected: grid.layer_count(),
            actual: state.len(),
        });
    }
    Ok(())
}

/// Optical depth per wavelength: `τ_j = Σ_k Σ_l C_k(j, l)·ρ_k(l)·Δz(l)`.
fn optical_depth(state: &AtmosphericState, setup: &SpectralSetup, grid: &AtmosphericGrid) -> DVector<f64> {
    let m = setup.wavelength_count();
    let n = grid.layer_count();
    let mut tau = DVector::zeros(m);
    for gas in 0..setup.gas_count() {
        let table = setup.cross_section(gas);
        for layer in 0..n {
            let density = if gas == 0 {
                state.densities()[layer]
            } else {
                setup.background_profile(gas)[layer]
            };
            let weight = density * grid.thickness(layer);
            if weight != 0.0 {
                tau.axpy(weight, &table.column(layer), 1.0);
            }
        }
    }
    tau
}

/// Evaluates the discretized Beer-Lambert model. Pure and deterministic.
pub fn simulate_spectrum(
    state: &AtmosphericState,
    setup: &SpectralSetup,
    grid: &AtmosphericGrid,
) -> Result<Spectrum> {
    check_dims(state, setup, grid)?;
    let tau = optical_depth(state, setup, grid);
    let intensities = DVector::from_fn(setup.wavelength_count(), |j, _| {
        setup.solar_intensity[j] * (-tau[j]).exp() * setup.baseline.eval(setup.wavelengths[j])
            + setup.offset
    });
    Ok(Spectrum::new(intensities))
}

/// Analytic Jacobian of [`simulate_spectrum`] with respect to the retrieved
/// gas densities:
///
/// `J[j, l] = −C₀(j, l)·Δz(l)·I₀(λ_j)·exp(−τ_j)·(a·λ_j²+b·λ_j+c)`.
pub fn jacobian(
    state: &AtmosphericState,
    setup: &SpectralSetup,
    grid: &AtmosphericGrid,
) -> Result<DMatrix<f64>> {
    check_dims(state, setup, grid)?;
    let spectrum = simulate_spectrum(state, setup, grid)?;
    let m = setup.wavelength_count();
    let n = grid.layer_count();
    let table = setup.cross_section(0);
    let mut j_mat = DMatrix::zeros(m, n);
    for layer in 0..n {
        let dz = grid.thickness(layer);
        let mut col = j_mat.column_mut(layer);
        for row in 0..m {
            // I − d is the absorbed continuum I₀·exp(−τ)·baseline.
            col[row] = -table[(row, layer)] * dz * (spectrum.intensities()[row] - setup.offset);
        }
    }
    Ok(j_mat)
}
