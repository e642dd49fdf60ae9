//! Linear vector autoregression without intercept, fit by OLS or ridge.

use nalgebra::{DMatrix, DVector};

use crate::data::lag_embed;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct VarModelFit<T: Real> {
    /// `coefficients[ℓ-1]` is the D×D lag-ℓ matrix A^ℓ, so x̂_t = Σ_ℓ A^ℓ x_{t−ℓ}.
    coefficients: Vec<DMatrix<T>>,
    /// (D·L)×D regression matrix; the transpose of the stacked A^ℓ.
    stacked: DMatrix<T>,
    ridge_lambda: T,
    residuals: DMatrix<T>,
    residual_variance: DVector<T>,
    lag: usize,
}

impl<T: Real> VarModelFit<T> {
    /// Builds a fit from known lag matrices; residuals are those on `series`.
    pub fn from_coefficients(coefficients: Vec<DMatrix<T>>, series: &DMatrix<T>) -> Result<Self> {
        let lag = coefficients.len();
        if lag == 0 {
            return Err(Error::InvalidParameter("at least one lag matrix is required".into()));
        }
        let d = coefficients[0].nrows();
        if coefficients.iter().any(|a| a.shape() != (d, d)) {
            return Err(Error::Shape("lag matrices must all be square and equal-sized".into()));
        }
        let mut stacked = DMatrix::zeros(d * lag, d);
        for (l, a) in coefficients.iter().enumerate() {
            stacked.view_mut((l * d, 0), (d, d)).copy_from(&a.transpose());
        }
        let embedded = lag_embed(series, lag)?;
        if series.ncols() != d {
            return Err(Error::Shape(format!("series has {} columns, model has {d}", series.ncols())));
        }
        let residuals = &embedded.targets - &embedded.design * &stacked;
        let residual_variance = column_variances(&residuals);
        Ok(Self {
            coefficients,
            stacked,
            ridge_lambda: T::zero(),
            residuals,
            residual_variance,
            lag,
        })
    }

    pub fn coefficients(&self) -> &[DMatrix<T>] {
        &self.coefficients
    }

    pub fn ridge_lambda(&self) -> T {
        self.ridge_lambda
    }

    /// (T−L)×D in-sample residuals.
    pub fn residuals(&self) -> &DMatrix<T> {
        &self.residuals
    }

    /// Population variance of each residual column (diagonal of cov(E, E)).
    pub fn residual_variance(&self) -> &DVector<T> {
        &self.residual_variance
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn dim(&self) -> usize {
        self.stacked.ncols()
    }

    /// One-step predictions for times L..T of `series`.
    pub fn predict(&self, series: &DMatrix<T>) -> Result<DMatrix<T>> {
        if series.ncols() != self.dim() {
            return Err(Error::Shape(format!(
                "series has {} columns, model has {}",
                series.ncols(),
                self.dim()
            )));
        }
        let embedded = lag_embed(series, self.lag)?;
        Ok(embedded.design * &self.stacked)
    }
}

pub fn fit_var<T: Real>(series: &DMatrix<T>, lag: usize, ridge_lambda: T) -> Result<VarModelFit<T>> {
    if !(ridge_lambda >= T::zero()) {
        return Err(Error::InvalidParameter(format!("ridge penalty must be nonnegative, got {ridge_lambda}")));
    }
    let (t, d) = series.shape();
    let embedded = lag_embed(series, lag)?;
    if t < lag + d * lag + 1 {
        log::warn!("VAR with {d} series and lag {lag} is underdetermined at T = {t}");
    }
    let stacked = solve_ridge(&embedded.design, &embedded.targets, ridge_lambda, "VAR fit")?;
    let residuals = &embedded.targets - &embedded.design * &stacked;
    let residual_variance = column_variances(&residuals);
    let coefficients = (0..lag)
        .map(|l| stacked.view((l * d, 0), (d, d)).transpose())
        .collect();
    Ok(VarModelFit {
        coefficients,
        stacked,
        ridge_lambda,
        residuals,
        residual_variance,
        lag,
    })
}

/// Population variance of each column of `y − yhat` about its own mean.
pub fn residual_variance_about<T: Real>(y: &DMatrix<T>, yhat: &DMatrix<T>) -> Result<DVector<T>> {
    if y.shape() != yhat.shape() {
        return Err(Error::Shape(format!(
            "observations are {:?}, reconstructions are {:?}",
            y.shape(),
            yhat.shape()
        )));
    }
    if y.nrows() < 2 {
        return Err(Error::InsufficientSamples { have: y.nrows(), need: 2 });
    }
    Ok(column_variances(&(y - yhat)))
}

pub(crate) fn column_variances<T: Real>(m: &DMatrix<T>) -> DVector<T> {
    let n = T::count(m.nrows());
    DVector::from_iterator(
        m.ncols(),
        m.column_iter().map(|c| {
            let mean = c.sum() / n;
            c.iter().fold(T::zero(), |acc, &v| acc + (v - mean) * (v - mean)) / n
        }),
    )
}

/// Solves `min ‖Y − X B‖² + λ‖B‖²` through the normal equations.
///
/// With λ = 0 a (near-)singular Gram matrix is reported instead of returning
/// an unstable solution.
pub(crate) fn solve_ridge<T: Real>(
    x: &DMatrix<T>,
    y: &DMatrix<T>,
    lambda: T,
    what: &'static str,
) -> Result<DMatrix<T>> {
    if x.nrows() != y.nrows() {
        return Err(Error::Shape(format!(
            "{what}: {} regressor rows vs {} target rows",
            x.nrows(),
            y.nrows()
        )));
    }
    let mut g = x.tr_mul(x);
    let diag_max = g.diagonal().iter().fold(T::zero(), |a, &v| a.max(v));
    for i in 0..g.nrows() {
        g[(i, i)] += lambda;
    }
    let rhs = x.tr_mul(y);
    let chol = g.cholesky().ok_or(Error::Singular(what))?;
    if lambda <= T::zero() {
        let l = chol.l_dirty();
        let min_pivot = (0..l.nrows()).fold(T::max_value().unwrap_or(T::one()), |a, i| a.min(l[(i, i)] * l[(i, i)]));
        if !(min_pivot > T::lit(1e-12) * diag_max) {
            return Err(Error::Singular(what));
        }
    }
    Ok(chol.solve(&rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn simulate(a: &[DMatrix<f64>], t: usize, noise: f64, seed: u64) -> DMatrix<f64> {
        let d = a[0].nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = DMatrix::zeros(t, d);
        for r in 0..t {
            for c in 0..d {
                x[(r, c)] = if r < a.len() {
                    rng.gen_range(-1.0..1.0)
                } else {
                    noise * rng.sample::<f64, _>(StandardNormal)
                };
            }
            if r >= a.len() {
                for (l, al) in a.iter().enumerate() {
                    let prev = x.row(r - l - 1).transpose();
                    let add = al * prev;
                    for c in 0..d {
                        x[(r, c)] += add[c];
                    }
                }
            }
        }
        x
    }

    #[test]
    fn recovers_noiseless_var1() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.0, 0.4]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut x = DMatrix::zeros(200, 2);
        for r in 0..200 {
            if r == 0 {
                x[(0, 0)] = rng.gen_range(-1.0..1.0);
                x[(0, 1)] = rng.gen_range(-1.0..1.0);
            } else {
                let next = &a * x.row(r - 1).transpose();
                x.set_row(r, &next.transpose());
            }
        }
        let fit = fit_var(&x, 1, 0.0).unwrap();
        for (got, want) in fit.coefficients()[0].iter().zip(a.iter()) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-6);
        }
    }

    #[test]
    fn predict_plus_residuals_reproduces_targets() {
        let a = vec![DMatrix::from_row_slice(3, 3, &[0.4, 0.1, 0.0, 0.0, 0.3, 0.2, 0.1, 0.0, 0.5])];
        let x = simulate(&a, 120, 1.0, 3);
        let fit = fit_var(&x, 2, 1e-3).unwrap();
        let pred = fit.predict(&x).unwrap();
        let targets = lag_embed(&x, 2).unwrap().targets;
        assert_abs_diff_eq!(pred + fit.residuals(), targets, epsilon = 1e-12);
    }

    #[test]
    fn zero_coefficients_predict_zero() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let fit = VarModelFit::from_coefficients(vec![DMatrix::zeros(2, 2)], &x).unwrap();
        assert_eq!(fit.predict(&x).unwrap(), DMatrix::zeros(3, 2));
    }

    #[test]
    fn scalar_prediction_by_hand() {
        let x = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 4.0]);
        let fit = VarModelFit::from_coefficients(vec![DMatrix::from_element(1, 1, 0.5)], &x).unwrap();
        assert_eq!(fit.predict(&x).unwrap(), DMatrix::from_row_slice(2, 1, &[0.5, 1.0]));
        assert!(matches!(fit.predict(&DMatrix::zeros(3, 2)), Err(Error::Shape(_))));
    }

    #[test]
    fn white_noise_is_unpredictable() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(2000, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let fit = fit_var(&x, 1, 0.0).unwrap();
        let input = column_variances(&x.rows(1, 1999).into_owned());
        for j in 0..2 {
            assert!((fit.residual_variance()[j] / input[j] - 1.0).abs() < 0.01);
        }
        let reduced = fit_var(&x.columns(1, 1).into_owned(), 1, 0.0).unwrap();
        let ratio = (reduced.residual_variance()[0] / fit.residual_variance()[1]).ln();
        assert!(ratio.abs() < 0.01, "{ratio}");
    }

    #[test]
    fn huge_ridge_shrinks_to_zero() {
        let a = vec![DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.0, 0.4])];
        let x = simulate(&a, 100, 1.0, 9);
        let fit = fit_var(&x, 1, 1e12).unwrap();
        assert!(fit.coefficients()[0].amax() < 1e-8);
        let targets = lag_embed(&x, 1).unwrap().targets;
        assert_abs_diff_eq!(fit.residuals(), &targets, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.residual_variance(), &column_variances(&targets), epsilon = 1e-6);
    }

    #[test]
    fn errors() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        assert!(matches!(fit_var(&x, 2, 0.0), Err(Error::InsufficientSamples { .. })));
        let collinear = DMatrix::from_fn(20, 2, |r, _| (r as f64).sin());
        assert!(matches!(fit_var(&collinear, 1, 0.0), Err(Error::Singular(_))));
        assert!(fit_var(&collinear, 1, 1e-3).is_ok());
        assert!(fit_var(&collinear, 1, -1.0).is_err());
    }

    #[test]
    fn residual_variance_about_examples() {
        let y = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, -1.0, 5.0]);
        assert_eq!(residual_variance_about(&y, &y).unwrap(), DVector::zeros(2));
        let yhat = DMatrix::zeros(2, 2);
        assert_eq!(residual_variance_about(&y, &yhat).unwrap()[0], 1.0);
        let shifted = DMatrix::from_row_slice(2, 2, &[7.0, 0.0, 7.0, 0.0]);
        let a = residual_variance_about(&y, &yhat).unwrap();
        let b = residual_variance_about(&y, &shifted).unwrap();
        assert_eq!(a[0], b[0]);
        assert!(matches!(residual_variance_about(&y, &DMatrix::zeros(2, 1)), Err(Error::Shape(_))));
    }

    fn orthogonality_holds(d: usize, lag: usize, seed: u64) {
        let a: Vec<_> = (0..lag)
            .map(|l| DMatrix::from_fn(d, d, |i, j| if i == j { 0.3 / (l + 1) as f64 } else { 0.05 }))
            .collect();
        let x = simulate(&a, 150, 1.0, seed);
        let fit = fit_var(&x, lag, 0.0).unwrap();
        let design = lag_embed(&x, lag).unwrap().design;
        for c in 0..design.ncols() {
            for j in 0..d {
                let col = design.column(c);
                let res = fit.residuals().column(j);
                let bound = 1e-8 * col.norm() * res.norm();
                assert!(col.dot(&res).abs() <= bound, "d={d} lag={lag}");
            }
        }
    }

    #[test]
    fn ols_residuals_orthogonal_to_design() {
        for d in [1, 3] {
            for lag in [1, 2] {
                orthogonality_holds(d, lag, (d * 10 + lag) as u64);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn ridge_shrinkage_is_monotone(seed in 0u64..1000) {
            let a = vec![DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.1, 0.4])];
            let x = simulate(&a, 60, 1.0, seed);
            let mut last = f64::INFINITY;
            for lambda in [0.0, 0.01, 0.1, 1.0, 10.0, 100.0] {
                let norm = fit_var(&x, 1, lambda).unwrap().coefficients()[0].norm();
                prop_assert!(norm <= last + 1e-12);
                last = norm;
            }
        }

        #[test]
        fn permutation_equivariance(seed in 0u64..1000) {
            let a = vec![DMatrix::from_row_slice(3, 3, &[0.4, 0.1, 0.0, 0.0, 0.3, 0.2, 0.1, 0.0, 0.5])];
            let x = simulate(&a, 80, 1.0, seed);
            let perm = [2usize, 0, 1];
            let xp = DMatrix::from_fn(x.nrows(), 3, |r, c| x[(r, perm[c])]);
            let fit = fit_var(&x, 1, 1e-3).unwrap();
            let fitp = fit_var(&xp, 1, 1e-3).unwrap();
            let pred = fit.predict(&x).unwrap();
            let predp = fitp.predict(&xp).unwrap();
            for r in 0..pred.nrows() {
                for c in 0..3 {
                    prop_assert!((predp[(r, c)] - pred[(r, perm[c])]).abs() < 1e-10);
                }
            }
        }
    }
}
