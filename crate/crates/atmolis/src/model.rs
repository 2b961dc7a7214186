//! The forward-model abstraction the inference layer works against.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::forward::{self, AtmosphericGrid, AtmosphericState, SpectralSetup};

/// A differentiable map from state space ℝⁿ to observation space ℝᵐ.
///
/// Implementations must be pure: repeated evaluation at the same point
/// returns the same value, and evaluation is safe from multiple threads.
pub trait ForwardModel: Send + Sync {
    fn state_dim(&self) -> usize;
    fn data_dim(&self) -> usize;
    fn evaluate(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;
}

/// Beer-Lambert absorption model over a fixed spectral setup and grid.
#[derive(Debug, Clone)]
pub struct BeerLambertModel {
    setup: SpectralSetup,
    grid: AtmosphericGrid,
}

impl BeerLambertModel {
    pub fn new(setup: SpectralSetup, grid: AtmosphericGrid) -> Result<Self> {
        if setup.layer_count() != grid.layer_count() {
            return Err(Error::DimensionMismatch {
                axis: "setup layers vs grid layers",
                expected: grid.layer_count(),
                actual: setup.layer_count(),
            });
        }
        Ok(Self { setup, grid })
    }

    pub fn setup(&self) -> &SpectralSetup {
        &self.setup
    }

    pub fn grid(&self) -> &AtmosphericGrid {
        &self.grid
    }
}

impl ForwardModel for BeerLambertModel {
    fn state_dim(&self) -> usize {
        self.grid.layer_count()
    }

    fn data_dim(&self) -> usize {
        self.setup.wavelength_count()
    }

    fn evaluate(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let state = AtmosphericState::new(x.clone(), &self.grid)?;
        Ok(forward::simulate_spectrum(&state, &self.setup, &self.grid)?.into_vector())
    }

    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let state = AtmosphericState::new(x.clone(), &self.grid)?;
        forward::jacobian(&state, &self.setup, &self.grid)
    }
}

/// Affine model `F(x) = A·x + b`, used for analytically tractable problems.
#[derive(Debug, Clone)]
pub struct LinearModel {
    matrix: DMatrix<f64>,
    offset: DVector<f64>,
}

impl LinearModel {
    pub fn new(matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        if offset.len() != matrix.nrows() {
            return Err(Error::DimensionMismatch {
                axis: "linear model offset",
                expected: matrix.nrows(),
                actual: offset.len(),
            });
        }
        Ok(Self { matrix, offset })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl ForwardModel for LinearModel {
    fn state_dim(&self) -> usize {
        self.matrix.ncols()
    }

    fn data_dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn evaluate(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                axis: "linear model input",
                expected: self.state_dim(),
                actual: x.len(),
            });
        }
        Ok(&self.matrix * x + &self.offset)
    }

    fn jacobian(&self, _x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.matrix.clone())
    }
}
