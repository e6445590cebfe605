//! K-fold cross-validation over a coarse grid crossed with a warm-started path.
//!
//! Two grid shapes are supported: a grid of `lambda2` values with a `lambda1`
//! path inside each cell, or a grid of `alpha` values with a `lambda` path.
//! The path grid is computed once from the full data so every fold is scored
//! at the same penalty values.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::LaplacianMatrix;
use crate::path::{fit_path, lambda1_grid, lambda_grid, predict, prediction_mse, PathParameter};
use crate::solver::FitOptions;

/// Default `lambda2` grid for the smoothness penalty.
pub const DEFAULT_LAMBDA2_GRID: [f64; 5] = [0.1, 1.0, 10.0, 100.0, 1000.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CvPolicy {
    Lambda2Grid { lambda2s: Vec<f64> },
    AlphaGrid { alphas: Vec<f64> },
}

impl Default for CvPolicy {
    fn default() -> Self {
        CvPolicy::Lambda2Grid {
            lambda2s: DEFAULT_LAMBDA2_GRID.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    pub eps: f64,
    pub nlambda: usize,
    /// Standardize once on the full data instead of inside each training fold.
    pub global_standardize: bool,
    pub fit: FitOptions,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            folds: 5,
            seed: 1,
            eps: 0.001,
            nlambda: 100,
            global_standardize: false,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub lambda1: f64,
    pub lambda2: f64,
    /// `(lambda, alpha)` at the full sample size; absent when both penalties are 0.
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub mean_error: f64,
    pub se: f64,
    pub fold_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub policy: CvPolicy,
    pub points: Vec<CvPoint>,
    /// Index into `points` of the selected pair.
    pub best: usize,
    pub folds: usize,
    pub seed: u64,
    /// Fold id of every sample.
    pub assignment: Vec<usize>,
    pub global_standardize: bool,
}

impl CvResult {
    pub fn best_point(&self) -> &CvPoint {
        &self.points[self.best]
    }
}

/// Seeded shuffle, then contiguous blocks; the first `n % k` folds get one
/// extra sample.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!(
            "need 2 <= folds <= n, got {k} folds for {n} samples"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; n];
    let (base, extra) = (n / k, n % k);
    let mut pos = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        for &i in &order[pos..pos + size] {
            assignment[i] = fold;
        }
        pos += size;
    }
    Ok(assignment)
}

struct Cell {
    parameter: PathParameter,
    grid: Vec<f64>,
}

/// Runs k-fold cross-validation on a raw dataset.
///
/// Unless `global_standardize` is set, centering and scaling statistics are
/// computed from each training fold alone and applied to its held-out fold.
pub fn kfold_cv(
    raw: &Dataset,
    l: &LaplacianMatrix,
    policy: &CvPolicy,
    opts: &CvOptions,
) -> Result<CvResult> {
    let n = raw.n();
    let assignment = fold_assignment(n, opts.folds, opts.seed)?;
    let full = raw.standardize()?;

    let cells: Vec<Cell> = match policy {
        CvPolicy::Lambda2Grid { lambda2s } => {
            let grid = lambda1_grid(&full, opts.eps, opts.nlambda)?;
            lambda2s
                .iter()
                .map(|&lambda2| Cell {
                    parameter: PathParameter::Lambda1 { lambda2 },
                    grid: grid.clone(),
                })
                .collect()
        }
        CvPolicy::AlphaGrid { alphas } => alphas
            .iter()
            .map(|&alpha| {
                Ok(Cell {
                    parameter: PathParameter::Lambda { alpha },
                    grid: lambda_grid(&full, alpha, opts.eps, opts.nlambda)?,
                })
            })
            .collect::<Result<_>>()?,
    };
    if cells.is_empty() {
        return Err(Error::InvalidArgument("empty cross-validation grid".into()));
    }

    let folds: Vec<(Vec<usize>, Vec<usize>)> = (0..opts.folds)
        .map(|f| {
            let train = (0..n).filter(|&i| assignment[i] != f).collect();
            let test = (0..n).filter(|&i| assignment[i] == f).collect();
            (train, test)
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..opts.folds).map(move |f| (c, f)))
        .collect();
    let errors: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(c, f)| {
            let (train_rows, test_rows) = &folds[f];
            let train = if opts.global_standardize {
                full.subset(train_rows)
            } else {
                raw.raw_subset(train_rows).standardize()?
            };
            let held_out = raw.raw_subset(test_rows);
            let cell = &cells[c];
            let path = fit_path(&train, l, cell.parameter, &cell.grid, &opts.fit)?;
            path.fits
                .iter()
                .map(|fit| {
                    let yhat = predict(fit, held_out.x())?;
                    prediction_mse(yhat.as_slice(), held_out.y().as_slice())
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let k = opts.folds as f64;
    let mut points = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        for (g, &value) in cell.grid.iter().enumerate() {
            let fold_errors: Vec<f64> = (0..opts.folds).map(|f| errors[c * opts.folds + f][g]).collect();
            let mean = fold_errors.iter().sum::<f64>() / k;
            let var = fold_errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0);
            let cfg = cell.parameter.penalty(value, n)?;
            let (lambda, alpha) = match cfg.to_lambda_alpha(n) {
                Ok((lam, a)) => (Some(lam), Some(a)),
                Err(_) => (None, None),
            };
            points.push(CvPoint {
                lambda1: cfg.lambda1,
                lambda2: cfg.lambda2,
                lambda,
                alpha,
                mean_error: mean,
                se: (var / k).sqrt(),
                fold_errors,
            });
        }
    }
    let best = select_best(&points, policy);
    Ok(CvResult {
        policy: policy.clone(),
        points,
        best,
        folds: opts.folds,
        seed: opts.seed,
        assignment,
        global_standardize: opts.global_standardize,
    })
}

/// Smallest mean error; ties go to the larger path parameter (sparser fit),
/// then to the larger `lambda2` (smoother fit).
fn select_best(points: &[CvPoint], policy: &CvPolicy) -> usize {
    let path_value = |p: &CvPoint| match policy {
        CvPolicy::Lambda2Grid { .. } => p.lambda1,
        CvPolicy::AlphaGrid { .. } => p.lambda.unwrap_or(0.0),
    };
    let mut best = 0;
    for (i, p) in points.iter().enumerate().skip(1) {
        let b = &points[best];
        let better = p.mean_error < b.mean_error
            || (p.mean_error == b.mean_error
                && (path_value(p) > path_value(b)
                    || (path_value(p) == path_value(b) && p.lambda2 > b.lambda2)));
        if better {
            best = i;
        }
    }
    best
}
