//! Observed data with per-point Gaussian uncertainties in `y`.

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::noise::NoiseSpec;
use crate::scalar::Scalar;

/// Points `(x_i, y_i)` with known standard deviations `σ_i` on `y_i` and none on `x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T: Scalar> {
    x: DVector<T>,
    y: DVector<T>,
    sigma_y: DVector<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(x: DVector<T>, y: DVector<T>, sigma_y: DVector<T>) -> Result<Self> {
        check_dim("y length vs x length", x.len(), y.len())?;
        check_dim("sigma_y length vs x length", x.len(), sigma_y.len())?;
        if x.is_empty() {
            return Err(Error::InvalidInput("dataset has no rows".into()));
        }
        for i in 0..x.len() {
            if !x[i].is_finite() || !y[i].is_finite() || !sigma_y[i].is_finite() {
                return Err(Error::InvalidInput(format!("row {} has a non-finite value", i + 1)));
            }
            if !(sigma_y[i] > T::zero()) {
                return Err(Error::InvalidInput(format!(
                    "row {} has non-positive sigma_y {}",
                    i + 1,
                    sigma_y[i]
                )));
            }
        }
        Ok(Self { x, y, sigma_y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &DVector<T> {
        &self.x
    }

    pub fn y(&self) -> &DVector<T> {
        &self.y
    }

    pub fn sigma_y(&self) -> &DVector<T> {
        &self.sigma_y
    }

    /// Diagonal noise `C = diag(σ²)`.
    pub fn noise(&self) -> NoiseSpec<T> {
        NoiseSpec::from_sigmas(&self.sigma_y)
    }
}
