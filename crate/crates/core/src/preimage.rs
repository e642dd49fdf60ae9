//! Learned linear pre-image map from feature coordinates back to input space.
//!
//! Both the inputs and their feature coordinates are available during
//! training, so the pre-image problem reduces to regressing every input
//! dimension on the P feature coordinates: `min_Γ ‖Yᵀ − Γ Hᵀ‖² + λ‖Γ‖²`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::varm::solve_ridge;

#[derive(Debug, Clone)]
pub struct PreimageMap<T: Real> {
    /// D×P; entry (j, p) is γ_jp.
    gamma: DMatrix<T>,
    ridge_lambda: T,
    training_fit_error: T,
}

impl<T: Real> PreimageMap<T> {
    /// Wraps a known coefficient matrix (D×P).
    pub fn from_gamma(gamma: DMatrix<T>) -> Self {
        Self {
            gamma,
            ridge_lambda: T::zero(),
            training_fit_error: T::zero(),
        }
    }

    pub fn gamma(&self) -> &DMatrix<T> {
        &self.gamma
    }

    pub fn ridge_lambda(&self) -> T {
        self.ridge_lambda
    }

    /// Mean squared reconstruction error over all training entries.
    pub fn training_fit_error(&self) -> T {
        self.training_fit_error
    }

    /// Maps feature rows η̂_t (M×P) to input rows ŷ_t = Γ η̂_t (M×D).
    pub fn reconstruct(&self, hhat: &DMatrix<T>) -> Result<DMatrix<T>> {
        if hhat.ncols() != self.gamma.ncols() {
            return Err(Error::Shape(format!(
                "pre-image map expects {} feature columns, got {}",
                self.gamma.ncols(),
                hhat.ncols()
            )));
        }
        Ok(hhat * self.gamma.transpose())
    }
}

/// Fits Γ from paired samples: `y` is T×D, `h` is T×P.
pub fn learn_preimage<T: Real>(y: &DMatrix<T>, h: &DMatrix<T>, ridge_lambda: T) -> Result<PreimageMap<T>> {
    if !(ridge_lambda >= T::zero()) {
        return Err(Error::InvalidParameter(format!("ridge penalty must be nonnegative, got {ridge_lambda}")));
    }
    if y.nrows() != h.nrows() {
        return Err(Error::Shape(format!(
            "{} input rows vs {} feature rows",
            y.nrows(),
            h.nrows()
        )));
    }
    if y.nrows() < h.ncols() {
        log::warn!(
            "pre-image regression with {} features on {} samples is underdetermined",
            h.ncols(),
            y.nrows()
        );
    }
    let gamma_t = solve_ridge(h, y, ridge_lambda, "pre-image fit")?;
    let gamma = gamma_t.transpose();
    let fitted = h * &gamma_t;
    let entries = T::count(y.len().max(1));
    let training_fit_error = (y - fitted).norm_squared() / entries;
    Ok(PreimageMap {
        gamma,
        ridge_lambda,
        training_fit_error,
    })
}
