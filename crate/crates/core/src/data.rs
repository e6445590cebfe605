//! Design matrix, response and the centering/scaling contract.
//!
//! A standardized dataset has a centered response and centered columns with
//! `(1/n) sum x_ij^2 = 1`. The per-column means and scales used to get there
//! are kept so coefficients can be mapped back to the raw scale.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Column statistics of the raw data a standardized dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub x_means: Vec<f64>,
    pub x_scales: Vec<f64>,
    pub y_mean: f64,
}

impl Standardization {
    fn identity(p: usize) -> Self {
        Self {
            x_means: vec![0.0; p],
            x_scales: vec![1.0; p],
            y_mean: 0.0,
        }
    }

    /// Maps standardized-scale coefficients to raw-scale coefficients and an
    /// intercept.
    pub fn back_transform(&self, beta: &[f64]) -> (Vec<f64>, f64) {
        let original: Vec<f64> = beta
            .iter()
            .zip(&self.x_scales)
            .map(|(b, s)| b / s)
            .collect();
        let shift: f64 = original
            .iter()
            .zip(&self.x_means)
            .map(|(b, m)| b * m)
            .sum();
        (original, self.y_mean - shift)
    }

    /// Applies these statistics to raw data (e.g. a held-out fold).
    pub fn apply(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Dataset> {
        check_dim("column count", self.x_means.len(), x.ncols())?;
        check_dim("response length", x.nrows(), y.len())?;
        let mut xs = x.clone();
        for (j, mut col) in xs.column_iter_mut().enumerate() {
            col.add_scalar_mut(-self.x_means[j]);
            col /= self.x_scales[j];
        }
        let ys = y.add_scalar(-self.y_mean);
        Ok(Dataset {
            x: xs,
            y: ys,
            names: None,
            standardization: Some(self.clone()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    names: Option<Vec<String>>,
    standardization: Option<Standardization>,
}

impl Dataset {
    /// Raw (unstandardized) dataset.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        check_dim("response length", x.nrows(), y.len())?;
        Ok(Self {
            x,
            y,
            names: None,
            standardization: None,
        })
    }

    /// Wraps data the caller guarantees is already centered and scaled.
    ///
    /// The contract is checked to `1e-8`; the recorded statistics are the
    /// identity so back-transformation is a no-op.
    pub fn from_standardized(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        check_dim("response length", x.nrows(), y.len())?;
        let n = x.nrows() as f64;
        let scale = 1.0 + y.amax();
        if y.sum().abs() / n > 1e-8 * scale {
            return Err(Error::InvalidArgument("response is not centered".into()));
        }
        for (j, col) in x.column_iter().enumerate() {
            if col.sum().abs() / n > 1e-8 || (col.norm_squared() / n - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidArgument(format!(
                    "column {j} is not standardized"
                )));
            }
        }
        let p = x.ncols();
        Ok(Self {
            x,
            y,
            names: None,
            standardization: Some(Standardization::identity(p)),
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        check_dim("covariate names", self.p(), names.len())?;
        self.names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn is_standardized(&self) -> bool {
        self.standardization.is_some()
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    /// Column `j` as a contiguous slice (the matrix is column-major).
    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.x.as_slice()[j * n..(j + 1) * n]
    }

    /// Centers `y` and every column, then scales columns to unit mean square.
    ///
    /// A dataset that is already standardized is returned unchanged.
    pub fn standardize(&self) -> Result<Dataset> {
        if self.is_standardized() {
            return Ok(self.clone());
        }
        let n = self.n();
        if n < 2 {
            return Err(Error::TooFewSamples { needed: 2, found: n });
        }
        let nf = n as f64;
        let mut x_means = Vec::with_capacity(self.p());
        let mut x_scales = Vec::with_capacity(self.p());
        for (j, col) in self.x.column_iter().enumerate() {
            let mean = col.mean();
            let ms = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
            let scale = ms.sqrt();
            // relative test so that large constant columns are still caught
            if !(scale > 1e-12 * (1.0 + mean.abs())) {
                return Err(Error::ZeroVariance(j));
            }
            x_means.push(mean);
            x_scales.push(scale);
        }
        let stats = Standardization {
            x_means,
            x_scales,
            y_mean: self.y.mean(),
        };
        let mut out = stats.apply(&self.x, &self.y)?;
        out.names = self.names.clone();
        Ok(out)
    }

    /// Rows `rows` of this dataset. The standardization record is carried
    /// over unchanged; the subset is not re-centered.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let x = self.x.select_rows(rows);
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i]));
        Dataset {
            x,
            y,
            names: self.names.clone(),
            standardization: self.standardization.clone(),
        }
    }

    /// Raw rows of an unstandardized dataset.
    pub fn raw_subset(&self, rows: &[usize]) -> Dataset {
        let mut out = self.subset(rows);
        out.standardization = None;
        out
    }

    /// Permutes columns: new column `perm[j]` is old column `j`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Dataset> {
        check_dim("permutation length", self.p(), perm.len())?;
        let mut x = DMatrix::zeros(self.n(), self.p());
        for j in 0..self.p() {
            x.set_column(perm[j], &self.x.column(j));
        }
        let mut out = self.clone();
        out.x = x;
        if let Some(s) = &mut out.standardization {
            let mut means = vec![0.0; self.p()];
            let mut scales = vec![0.0; self.p()];
            for j in 0..self.p() {
                means[perm[j]] = s.x_means[j];
                scales[perm[j]] = s.x_scales[j];
            }
            s.x_means = means;
            s.x_scales = scales;
        }
        if let Some(names) = &self.names {
            let mut renamed = names.clone();
            for j in 0..self.p() {
                renamed[perm[j]] = names[j].clone();
            }
            out.names = Some(renamed);
        }
        Ok(out)
    }

    /// Gram matrix `C = X^T X / n`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.x.tr_mul(&self.x) / self.n() as f64
    }
}
