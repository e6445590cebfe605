//! Regularization paths with warm starts, grid construction and prediction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::graph::LaplacianMatrix;
use crate::solver::{fit_grace, lambda1_max, zero_fit, FitOptions, FitResult, PenaltyConfig};

/// Which penalty parameter varies along a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathParameter {
    /// `lambda1` varies with `lambda2` held fixed.
    Lambda1 { lambda2: f64 },
    /// `lambda` varies with the mixing weight `alpha` held fixed.
    Lambda { alpha: f64 },
}

impl PathParameter {
    pub fn penalty(&self, value: f64, n: usize) -> Result<PenaltyConfig> {
        match *self {
            PathParameter::Lambda1 { lambda2 } => PenaltyConfig::new(value, lambda2),
            PathParameter::Lambda { alpha } => PenaltyConfig::from_lambda_alpha(value, alpha, n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub parameter: PathParameter,
    /// Strictly decreasing values of the varying parameter.
    pub lambdas: Vec<f64>,
    pub fits: Vec<FitResult>,
}

impl PathResult {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn betas(&self) -> impl Iterator<Item = &[f64]> {
        self.fits.iter().map(|f| f.beta.as_slice())
    }

    pub fn active_counts(&self) -> Vec<usize> {
        self.fits.iter().map(|f| f.active_set.len()).collect()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.fits.iter().map(|f| f.objective).collect()
    }

    /// Grid indices whose fit hit the sweep limit.
    pub fn unconverged(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| !self.fits[k].converged).collect()
    }
}

fn log_grid(top: f64, eps: f64, count: usize) -> Result<Vec<f64>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1), got {eps}")));
    }
    if count == 0 {
        return Err(Error::InvalidArgument("grid needs at least one point".into()));
    }
    if !(top > 0.0) || !top.is_finite() {
        return Err(Error::EmptyPath);
    }
    if count == 1 {
        return Ok(vec![top]);
    }
    let step = eps.ln() / (count - 1) as f64;
    Ok((0..count)
        .map(|k| if k == 0 { top } else { top * (step * k as f64).exp() })
        .collect())
}

/// `K` values of `lambda` from `lambda_max = max_l |<x_l, y>| / (n alpha)`
/// down to `eps * lambda_max`, equally spaced on the log scale.
pub fn lambda_grid(ds: &Dataset, alpha: f64, eps: f64, count: usize) -> Result<Vec<f64>> {
    if !ds.is_standardized() {
        return Err(Error::NotStandardized);
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1] for a lambda grid, got {alpha}"
        )));
    }
    let top = lambda1_max(ds) / 2.0 / (ds.n() as f64 * alpha);
    log_grid(top, eps, count)
}

/// `K` values of `lambda1` from `2 max_l |<x_l, y>|` down to `eps` times that.
pub fn lambda1_grid(ds: &Dataset, eps: f64, count: usize) -> Result<Vec<f64>> {
    if !ds.is_standardized() {
        return Err(Error::NotStandardized);
    }
    log_grid(lambda1_max(ds), eps, count)
}

/// Early termination of a path once the fit stops improving.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStop {
    /// Stop after a point explaining at least this fraction of `|y|^2`.
    pub max_explained: f64,
    /// Stop when the explained fraction grows by less than this between
    /// consecutive points.
    pub min_gain: f64,
}

impl Default for PathStop {
    fn default() -> Self {
        Self {
            max_explained: 0.999,
            min_gain: 1e-5,
        }
    }
}

/// Fits every grid point in order, warm-starting from the previous solution.
///
/// Grid points at or above the all-zero threshold return exact zeros.
pub fn fit_path(
    ds: &Dataset,
    l: &LaplacianMatrix,
    parameter: PathParameter,
    grid: &[f64],
    opts: &FitOptions,
) -> Result<PathResult> {
    fit_path_until(ds, l, parameter, grid, opts, None)
}

/// Like [`fit_path`], but the returned path may be a prefix of `grid` when
/// `stop` is given.
pub fn fit_path_until(
    ds: &Dataset,
    l: &LaplacianMatrix,
    parameter: PathParameter,
    grid: &[f64],
    opts: &FitOptions,
    stop: Option<&PathStop>,
) -> Result<PathResult> {
    if grid.is_empty() {
        return Err(Error::EmptyPath);
    }
    if grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("path grid must be strictly decreasing".into()));
    }
    if !ds.is_standardized() {
        return Err(Error::NotStandardized);
    }
    let zero_above = lambda1_max(ds) * (1.0 - 1e-12);
    let n = ds.n();
    let total = ds.y().norm_squared();
    let mut explained_prev = 0.0;
    let mut fits: Vec<FitResult> = Vec::with_capacity(grid.len());
    for &value in grid {
        let cfg = parameter.penalty(value, n)?;
        let fit = if cfg.lambda1 >= zero_above {
            zero_fit(ds, l, &cfg, opts.tol)?
        } else {
            let init = fits.last().map(|f| f.beta.as_slice());
            fit_grace(ds, l, &cfg, init, opts)?
        };
        let saturated = match stop {
            Some(stop) if total > 0.0 && !fit.active_set.is_empty() => {
                let fitted = ds.x() * DVector::from_column_slice(&fit.beta);
                let explained = 1.0 - (ds.y() - fitted).norm_squared() / total;
                let done = explained >= stop.max_explained || explained - explained_prev < stop.min_gain;
                explained_prev = explained;
                done
            }
            _ => false,
        };
        fits.push(fit);
        if saturated {
            break;
        }
    }
    Ok(PathResult {
        parameter,
        lambdas: grid[..fits.len()].to_vec(),
        fits,
    })
}

/// `intercept + X_new beta_original`.
pub fn predict(fit: &FitResult, x_new: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_dim("column count", fit.beta_original.len(), x_new.ncols())?;
    let mut yhat = DVector::from_element(x_new.nrows(), fit.intercept);
    for (j, &b) in fit.beta_original.iter().enumerate() {
        if b != 0.0 {
            yhat.axpy(b, &x_new.column(j), 1.0);
        }
    }
    Ok(yhat)
}

/// Mean squared prediction error `(1/m) sum (yhat_i - y_i)^2`.
pub fn prediction_mse(yhat: &[f64], y: &[f64]) -> Result<f64> {
    check_dim("prediction length", y.len(), yhat.len())?;
    if y.is_empty() {
        return Err(Error::NoSamples("prediction".into()));
    }
    Ok(yhat.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{laplacian, WeightedGraph};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_dataset(seed: u64, n: usize, p: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |i, _| {
            x[(i, 0)] - 0.5 * x[(i, 1)] + rng.sample::<f64, _>(StandardNormal)
        });
        Dataset::new(x, y).unwrap().standardize().unwrap()
    }

    #[test]
    fn lambda_max_formula() {
        // one centered column with <x, y> = 10, n = 10, (1/n) sum x^2 = 1
        let x = DMatrix::from_column_slice(10, 1, &[1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0]);
        let y = DVector::from_column_slice(&[1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0]);
        let ds = Dataset::from_standardized(x, y).unwrap();
        let grid = lambda_grid(&ds, 0.5, 0.001, 100).unwrap();
        assert_eq!(grid[0], 2.0);
    }

    #[test]
    fn grid_is_geometric() {
        let ds = random_dataset(1, 30, 4);
        let grid = lambda_grid(&ds, 0.7, 0.001, 100).unwrap();
        assert_eq!(grid.len(), 100);
        assert_abs_diff_eq!(grid[99], 0.001 * grid[0], epsilon = 1e-12 * grid[0]);
        let ratio = grid[1] / grid[0];
        for w in grid.windows(2) {
            assert_abs_diff_eq!(w[1] / w[0], ratio, epsilon = 1e-12);
        }
        assert!(lambda_grid(&ds, 0.0, 0.001, 10).is_err());
    }

    #[test]
    fn orthogonal_response_gives_empty_path() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, -1.0, 1.0, -1.0]);
        let y = DVector::from_column_slice(&[1.0, 1.0, -1.0, -1.0]);
        let ds = Dataset::from_standardized(x, y).unwrap();
        assert_eq!(lambda_grid(&ds, 1.0, 0.001, 10).unwrap_err(), Error::EmptyPath);
        assert_eq!(lambda1_grid(&ds, 0.001, 10).unwrap_err(), Error::EmptyPath);
    }

    #[test]
    fn path_starts_at_zero_in_both_parameterizations() {
        let ds = random_dataset(2, 40, 5);
        let l = laplacian(&WeightedGraph::new(5, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap());
        let grid = lambda_grid(&ds, 0.3, 0.01, 20).unwrap();
        let path = fit_path(&ds, &l, PathParameter::Lambda { alpha: 0.3 }, &grid, &FitOptions::default()).unwrap();
        assert!(path.fits[0].beta.iter().all(|&b| b == 0.0));
        assert!(path.active_counts().last().unwrap() > &0);

        let grid = lambda1_grid(&ds, 0.01, 20).unwrap();
        let path = fit_path(&ds, &l, PathParameter::Lambda1 { lambda2: 10.0 }, &grid, &FitOptions::default()).unwrap();
        assert!(path.fits[0].beta.iter().all(|&b| b == 0.0));
        assert!(path.unconverged().is_empty());
    }

    #[test]
    fn stop_rule_truncates_saturated_paths() {
        let ds = random_dataset(6, 30, 40);
        let l = LaplacianMatrix::identity(40);
        let grid = lambda1_grid(&ds, 1e-4, 60).unwrap();
        let p = PathParameter::Lambda1 { lambda2: 0.01 };
        let full = fit_path(&ds, &l, p, &grid, &FitOptions::default()).unwrap();
        let short = fit_path_until(&ds, &l, p, &grid, &FitOptions::default(), Some(&PathStop::default())).unwrap();
        assert_eq!(full.len(), 60);
        assert!(short.len() < 60);
        assert_eq!(short.lambdas[..], grid[..short.len()]);
        for (a, b) in short.fits.iter().zip(&full.fits) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn non_decreasing_grid_rejected() {
        let ds = random_dataset(3, 20, 2);
        let l = LaplacianMatrix::identity(2);
        let p = PathParameter::Lambda1 { lambda2: 1.0 };
        assert!(fit_path(&ds, &l, p, &[1.0, 1.0], &FitOptions::default()).is_err());
        assert!(fit_path(&ds, &l, p, &[], &FitOptions::default()).is_err());
    }

    #[test]
    fn prediction_examples() {
        let ds = random_dataset(4, 30, 3);
        let l = LaplacianMatrix::identity(3);
        let top = lambda1_max(&ds) * 2.0;
        let fit = fit_grace(&ds, &l, &PenaltyConfig::new(top, 1.0).unwrap(), None, &FitOptions::default()).unwrap();
        let x_new = DMatrix::from_fn(5, 3, |i, j| (i * 3 + j) as f64);
        let yhat = predict(&fit, &x_new).unwrap();
        assert!(yhat.iter().all(|&v| v == fit.intercept));
        assert!(predict(&fit, &DMatrix::zeros(2, 2)).is_err());

        let fit = fit_grace(&ds, &l, &PenaltyConfig::new(1.0, 1.0).unwrap(), None, &FitOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let raw_x = DMatrix::from_fn(30, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let stats = ds.standardization().unwrap();
        let fitted = predict(&fit, &raw_x).unwrap();
        for i in 0..30 {
            let mut direct = stats.y_mean;
            for j in 0..3 {
                direct += fit.beta[j] * (raw_x[(i, j)] - stats.x_means[j]) / stats.x_scales[j];
            }
            assert_abs_diff_eq!(fitted[i], direct, epsilon = 1e-10);
        }
    }

    #[test]
    fn mse_examples() {
        assert_eq!(prediction_mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(prediction_mse(&[2.0, 3.0, 0.0], &[1.0, 2.0, -1.0]).unwrap(), 1.0);
        assert!(prediction_mse(&[], &[]).is_err());
        assert!(prediction_mse(&[1.0], &[1.0, 2.0]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..50).map(|_| rng.random_range(-5.0..5.0)).collect();
        let b: Vec<f64> = (0..50).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut manual = 0.0;
        for i in 0..50 {
            manual += (a[i] - b[i]) * (a[i] - b[i]);
        }
        assert_abs_diff_eq!(prediction_mse(&a, &b).unwrap(), manual / 50.0, epsilon = 1e-12);
        // simultaneous permutation
        let mut pa = a.clone();
        let mut pb = b.clone();
        pa.reverse();
        pb.reverse();
        assert_abs_diff_eq!(prediction_mse(&pa, &pb).unwrap(), manual / 50.0, epsilon = 1e-12);
    }
}
