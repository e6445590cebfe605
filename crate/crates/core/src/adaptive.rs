//! Adaptive fits: preliminary signs, a sign-adjusted Laplacian, then a
//! standard fit against it.

use log::warn;
use nalgebra::{Cholesky, DVector};
use serde::{Deserialize, Serialize};

use crate::cv::{kfold_cv, CvOptions, CvPolicy};
use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::graph::{signed_laplacian, LaplacianMatrix, WeightedGraph};
use crate::solver::{fit_grace, FitOptions, FitResult, PenaltyConfig};

/// Ridge added to `C = X^T X / n` when least squares is rank-deficient.
pub const RIDGE_JITTER: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    Ols,
    Enet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignEstimate {
    pub beta_tilde: Vec<f64>,
    pub signs: Vec<i8>,
    pub method: EstimateMethod,
}

impl SignEstimate {
    pub fn from_beta(beta_tilde: Vec<f64>, method: EstimateMethod) -> Self {
        let signs = beta_tilde.iter().map(|&b| sign(b)).collect();
        Self {
            beta_tilde,
            signs,
            method,
        }
    }
}

fn sign(b: f64) -> i8 {
    if b > 0.0 {
        1
    } else if b < 0.0 {
        -1
    } else {
        0
    }
}

/// How the elastic-net estimate is tuned when `p >= n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnetTuning {
    Cv { options: CvOptions, policy: CvPolicy },
    Fixed { penalty: PenaltyConfig },
}

impl Default for EnetTuning {
    fn default() -> Self {
        EnetTuning::Cv {
            options: CvOptions::default(),
            policy: CvPolicy::default(),
        }
    }
}

/// Least squares when `p < n`, otherwise an elastic net.
pub fn initial_estimate(ds: &Dataset, tuning: &EnetTuning, opts: &FitOptions) -> Result<SignEstimate> {
    if !ds.is_standardized() {
        return Err(Error::NotStandardized);
    }
    let (n, p) = (ds.n(), ds.p());
    if p < n {
        return Ok(SignEstimate::from_beta(least_squares(ds)?, EstimateMethod::Ols));
    }
    let identity = LaplacianMatrix::identity(p);
    let penalty = match tuning {
        EnetTuning::Fixed { penalty } => *penalty,
        EnetTuning::Cv { options, policy } => {
            let cv = kfold_cv(ds, &identity, policy, options)?;
            let best = cv.best_point();
            PenaltyConfig::new(best.lambda1, best.lambda2)?
        }
    };
    let fit = fit_grace(ds, &identity, &penalty, None, opts)?;
    Ok(SignEstimate::from_beta(fit.beta, EstimateMethod::Enet))
}

fn least_squares(ds: &Dataset) -> Result<Vec<f64>> {
    let (x, y) = (ds.x(), ds.y());
    let svd = x.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if s_max > 0.0 && s_min > 1e-10 * s_max {
        let beta = svd
            .solve(y, 0.0)
            .map_err(|_| Error::Singular("least-squares design"))?;
        return Ok(beta.iter().copied().collect());
    }
    warn!(
        "design is rank-deficient (singular values {s_min:e} / {s_max:e}); \
         using a ridge solve with jitter {RIDGE_JITTER:e}"
    );
    let n = ds.n() as f64;
    let mut c = x.tr_mul(x) / n;
    for j in 0..ds.p() {
        c[(j, j)] += RIDGE_JITTER;
    }
    let rhs: DVector<f64> = x.tr_mul(y) / n;
    let chol = Cholesky::new(c).ok_or(Error::Singular("ridge-regularized Gram matrix"))?;
    Ok(chol.solve(&rhs).iter().copied().collect())
}

/// Fits against the Laplacian adjusted by the signs of a supplied estimate.
pub fn fit_agrace_with(
    ds: &Dataset,
    g: &WeightedGraph,
    cfg: &PenaltyConfig,
    estimate: &SignEstimate,
    init: Option<&[f64]>,
    opts: &FitOptions,
) -> Result<FitResult> {
    check_dim("sign vector", ds.p(), estimate.signs.len())?;
    let l_star = signed_laplacian(g, &estimate.signs)?;
    fit_grace(ds, &l_star, cfg, init, opts)
}

/// Computes the preliminary estimate on `ds` itself, then fits.
pub fn fit_agrace(
    ds: &Dataset,
    g: &WeightedGraph,
    cfg: &PenaltyConfig,
    tuning: &EnetTuning,
    opts: &FitOptions,
) -> Result<(FitResult, SignEstimate)> {
    check_dim("graph", ds.p(), g.p())?;
    let estimate = initial_estimate(ds, tuning, opts)?;
    let fit = fit_agrace_with(ds, g, cfg, &estimate, None, opts)?;
    Ok((fit, estimate))
}
