//! Finite-sample theory quantities: the risk bound, the graph-constrained
//! irrepresentable condition, sign-consistency constants, and Monte Carlo
//! checks on a fixed design.
//!
//! Columns are taken with mean 0 and `(1/n) sum x^2 = 1`, which is the same
//! as L2-norm `sqrt(n)` per column. `C = X^T X / n` throughout.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::graph::{extreme_eigenvalues, LaplacianMatrix};
use crate::solver::{fit_grace, FitOptions, PenaltyConfig};

/// Reciprocal condition number below which a matrix is treated as singular.
pub const SINGULAR_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryInputs {
    pub c: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub support: Vec<usize>,
    pub beta1: Vec<f64>,
    pub sigma: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub n: usize,
    pub w_max: f64,
}

impl TheoryInputs {
    /// Support and `beta_(1)` are read off the nonzeros of `beta`.
    pub fn new(
        c: DMatrix<f64>,
        l: &LaplacianMatrix,
        beta: &[f64],
        sigma: f64,
        penalty: PenaltyConfig,
        n: usize,
    ) -> Result<Self> {
        let p = c.nrows();
        check_dim("covariance columns", p, c.ncols())?;
        check_dim("penalty matrix", p, l.p())?;
        check_dim("coefficients", p, beta.len())?;
        if n == 0 {
            return Err(Error::NoSamples("theory inputs".into()));
        }
        if !(sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
        }
        let support: Vec<usize> = (0..p).filter(|&u| beta[u] != 0.0).collect();
        Ok(Self {
            beta1: support.iter().map(|&u| beta[u]).collect(),
            support,
            c,
            l: l.to_dense(),
            sigma,
            lambda1: penalty.lambda1,
            lambda2: penalty.lambda2,
            n,
            w_max: l.max_edge_weight(),
        })
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn q(&self) -> usize {
        self.support.len()
    }

    fn complement(&self) -> Vec<usize> {
        (0..self.p()).filter(|u| !self.support.contains(u)).collect()
    }

    fn smooth(&self) -> f64 {
        self.lambda2 / self.n as f64
    }
}

fn block(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn spd_factor(m: DMatrix<f64>, what: &'static str) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    let (lo, hi) = extreme_eigenvalues(&m);
    if !(hi > 0.0) || lo / hi < SINGULAR_RCOND {
        return Err(Error::Singular(what));
    }
    Cholesky::new(m).ok_or(Error::Singular(what))
}

/// `[4 lambda2^2 Lmax(L)^2 |beta_(1)|^2 + 4 p n B sigma^2 + 2 lambda1^2 p]
///  / [n^2 Lmin(C + (lambda2/n) L)^2]` with `B = Lmax(C)`.
pub fn risk_bound(inp: &TheoryInputs) -> Result<f64> {
    let (n, p) = (inp.n as f64, inp.p() as f64);
    let m = &inp.c + &inp.l * inp.smooth();
    let (lo, hi) = extreme_eigenvalues(&m);
    if !(hi > 0.0) || lo / hi < SINGULAR_RCOND {
        return Err(Error::Singular("C + (lambda2/n) L"));
    }
    let (_, big_b) = extreme_eigenvalues(&inp.c);
    let (_, l_max) = extreme_eigenvalues(&inp.l);
    let beta1_sq: f64 = inp.beta1.iter().map(|b| b * b).sum();
    let numerator = 4.0 * inp.lambda2.powi(2) * l_max.powi(2) * beta1_sq
        + 4.0 * p * n * big_b * inp.sigma.powi(2)
        + 2.0 * inp.lambda1.powi(2) * p;
    Ok(numerator / (n * n * lo * lo))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcIc {
    /// Left-hand side, one entry per coefficient outside the support.
    pub vector: Vec<f64>,
    /// `1 - max(vector)`; the condition holds when positive.
    pub margin: f64,
}

pub fn gc_ic_margin(inp: &TheoryInputs) -> Result<GcIc> {
    if !(inp.lambda1 > 0.0) {
        return Err(Error::InvalidPenalty("the irrepresentable condition needs lambda1 > 0".into()));
    }
    let s1 = &inp.support;
    let s2 = inp.complement();
    if s1.is_empty() || s2.is_empty() {
        return Err(Error::InvalidArgument(
            "the irrepresentable condition needs 0 < q < p".into(),
        ));
    }
    let t = inp.smooth();
    let ratio = 2.0 * inp.lambda2 / inp.lambda1;
    let beta1 = DVector::from_column_slice(&inp.beta1);
    let sign1 = beta1.map(f64::signum);
    let l11 = block(&inp.l, s1, s1);
    let l21 = block(&inp.l, &s2, s1);
    let inner = spd_factor(block(&inp.c, s1, s1) + &l11 * t, "C_11 + (lambda2/n) L_11")?;
    let outer = block(&inp.c, &s2, s1) + &l21 * t;
    let v = outer * inner.solve(&(sign1 + &l11 * &beta1 * ratio)) - &l21 * &beta1 * ratio;
    let vector: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let margin = 1.0 - vector.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(GcIc { vector, margin })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularity {
    /// Smallest eigenvalue of `C`.
    pub b: f64,
    /// Largest eigenvalue of `C`.
    pub big_b: f64,
    /// `(1/n) max_i sum_j x_ij^2`.
    pub a2: f64,
}

pub fn regularity_check(ds: &Dataset) -> Result<Regularity> {
    if !ds.is_standardized() {
        return Err(Error::NotStandardized);
    }
    let (b, big_b) = extreme_eigenvalues(&ds.gram());
    let x = ds.x();
    let a2 = x.row_iter().map(|r| r.norm_squared()).fold(0.0, f64::max) / ds.n() as f64;
    Ok(Regularity { b, big_b, a2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignConsistencyQuantities {
    pub rho: f64,
    pub c_min: f64,
    pub w_max: f64,
    /// Scaling expression of the `lambda1` growth condition.
    pub condition_a: f64,
    /// Scaling expression that must vanish for the bias condition.
    pub condition_b: f64,
}

pub fn sign_consistency_quantities(inp: &TheoryInputs) -> Result<SignConsistencyQuantities> {
    let s1 = &inp.support;
    let s2 = inp.complement();
    if s1.is_empty() {
        return Err(Error::InvalidArgument("support is empty".into()));
    }
    let (n, p, q) = (inp.n as f64, inp.p() as f64, inp.q() as f64);
    let t = inp.smooth();
    let c11 = block(&inp.c, s1, s1);
    let (c_min, _) = extreme_eigenvalues(&c11);
    let beta1 = DVector::from_column_slice(&inp.beta1);
    let inner = spd_factor(&c11 + block(&inp.l, s1, s1) * t, "C_11 + (lambda2/n) L_11")?;
    let rho = inner.solve(&(&c11 * &beta1)).amin();
    let sign_term = inner.solve(&beta1.map(f64::signum)).amax();

    let log_pq = (p - q).ln();
    let l12_zero = s2.iter().all(|&v| s1.iter().all(|&u| inp.l[(u, v)] == 0.0));
    let condition_a = if l12_zero {
        inp.lambda1.powi(2) / (n * log_pq)
    } else {
        inp.lambda1.powi(2) / (log_pq * (n + inp.lambda2.powi(2) * inp.w_max.powi(2) / (n * c_min)))
    };
    let condition_b = ((q.ln() / (n * c_min)).sqrt() + inp.lambda1 / n * sign_term) / rho;
    Ok(SignConsistencyQuantities {
        rho,
        c_min,
        w_max: inp.w_max,
        condition_a,
        condition_b,
    })
}

/// A fixed standardized design with known coefficients, used to draw
/// responses `y = X beta + sigma * eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedDesign {
    x: DMatrix<f64>,
    beta: Vec<f64>,
    sigma: f64,
    l: LaplacianMatrix,
}

impl FixedDesign {
    pub fn new(x: DMatrix<f64>, beta: Vec<f64>, sigma: f64, l: LaplacianMatrix) -> Result<Self> {
        let p = x.ncols();
        check_dim("coefficients", p, beta.len())?;
        check_dim("penalty matrix", p, l.p())?;
        if !(sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
        }
        let n = x.nrows();
        Dataset::from_standardized(x.clone(), DVector::zeros(n))?;
        Ok(Self { x, beta, sigma, l })
    }

    /// Standardizes the columns of `x` first.
    pub fn standardizing(x: DMatrix<f64>, beta: Vec<f64>, sigma: f64, l: LaplacianMatrix) -> Result<Self> {
        let n = x.nrows();
        let ds = Dataset::new(x, DVector::zeros(n))?.standardize()?;
        Self::new(ds.x().clone(), beta, sigma, l)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn laplacian(&self) -> &LaplacianMatrix {
        &self.l
    }

    pub fn theory_inputs(&self, penalty: PenaltyConfig) -> Result<TheoryInputs> {
        let c = self.x.tr_mul(&self.x) / self.n() as f64;
        TheoryInputs::new(c, &self.l, &self.beta, self.sigma, penalty, self.n())
    }

    /// Draws replicate `index`. The response is centered; since the
    /// columns are centered this leaves every fit unchanged.
    pub fn replicate(&self, seed: u64, index: u64) -> Result<Dataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index));
        let mut y = &self.x * DVector::from_column_slice(&self.beta);
        for v in y.iter_mut() {
            *v += self.sigma * rng.sample::<f64, _>(StandardNormal);
        }
        let mean = y.mean();
        y.add_scalar_mut(-mean);
        Dataset::from_standardized(self.x.clone(), y)
    }

    fn fits<T: Send>(
        &self,
        penalty: PenaltyConfig,
        reps: usize,
        seed: u64,
        f: impl Fn(&[f64]) -> T + Sync,
    ) -> Result<Vec<T>> {
        if reps == 0 {
            return Err(Error::InvalidArgument("need at least one replicate".into()));
        }
        (0..reps as u64)
            .into_par_iter()
            .map(|i| {
                let ds = self.replicate(seed, i)?;
                let fit = fit_grace(&ds, &self.l, &penalty, None, &FitOptions::default())?;
                Ok(f(&fit.beta))
            })
            .collect()
    }
}

/// Fraction of replicates with `sign(beta_hat) == sign(beta)` in every
/// coordinate, zeros included.
pub fn sign_consistency_mc(design: &FixedDesign, penalty: PenaltyConfig, reps: usize, seed: u64) -> Result<f64> {
    let truth: Vec<f64> = design.beta.iter().map(|&b| sign_of(b)).collect();
    let hits = design.fits(penalty, reps, seed, |beta| {
        beta.iter().zip(&truth).all(|(&b, &s)| sign_of(b) == s)
    })?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / reps as f64)
}

fn sign_of(b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        b.signum()
    }
}

/// Monte Carlo estimate of `E |beta_hat - beta|^2`.
pub fn mc_risk(design: &FixedDesign, penalty: PenaltyConfig, reps: usize, seed: u64) -> Result<f64> {
    let errors = design.fits(penalty, reps, seed, |beta| {
        beta.iter().zip(&design.beta).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
    })?;
    Ok(errors.iter().sum::<f64>() / reps as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub lambda1: f64,
    pub lambda2: f64,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub bound: Option<f64>,
    pub mc_risk: Option<f64>,
    pub mc_sign_frequency: Option<f64>,
    pub gcic_vector: Option<Vec<f64>>,
    pub gcic_margin: Option<f64>,
    pub a1: (f64, f64),
    pub a2: f64,
    pub rho: Option<f64>,
    pub c_min: Option<f64>,
    pub w_max: f64,
    pub condition_a: Option<f64>,
    pub condition_b: Option<f64>,
}

/// Evaluates every quantity that is defined for the design; Monte Carlo
/// estimates are skipped when `reps == 0`.
pub fn theory_report(design: &FixedDesign, penalty: PenaltyConfig, reps: usize, seed: u64) -> Result<TheoryReport> {
    let inp = design.theory_inputs(penalty)?;
    let regular = regularity_check(&Dataset::from_standardized(design.x.clone(), DVector::zeros(design.n()))?)?;
    let gcic = gc_ic_margin(&inp).ok();
    let scq = sign_consistency_quantities(&inp).ok();
    let (mc, freq) = if reps > 0 {
        (
            Some(mc_risk(design, penalty, reps, seed)?),
            Some(sign_consistency_mc(design, penalty, reps, seed)?),
        )
    } else {
        (None, None)
    };
    Ok(TheoryReport {
        lambda1: penalty.lambda1,
        lambda2: penalty.lambda2,
        n: inp.n,
        p: inp.p(),
        q: inp.q(),
        bound: risk_bound(&inp).ok(),
        mc_risk: mc,
        mc_sign_frequency: freq,
        gcic_margin: gcic.as_ref().map(|g| g.margin),
        gcic_vector: gcic.map(|g| g.vector),
        a1: (regular.b, regular.big_b),
        a2: regular.a2,
        rho: scq.map(|t| t.rho),
        c_min: scq.map(|t| t.c_min),
        w_max: inp.w_max,
        condition_a: scq.map(|t| t.condition_a),
        condition_b: scq.map(|t| t.condition_b),
    })
}

/// Gaussian design with covariance `sigma` (rows drawn independently), then
/// standardized.
pub fn gaussian_design(sigma: &DMatrix<f64>, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let p = sigma.nrows();
    let chol = Cholesky::new(sigma.clone()).ok_or(Error::Singular("design covariance"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = z * chol.l().transpose();
    Ok(Dataset::new(x, DVector::zeros(n))?.standardize()?.x().clone())
}

/// Design whose sample covariance `X^T X / n` equals `sigma` up to rounding.
/// `sigma` must have unit diagonal and `n > p`.
pub fn exact_covariance_design(sigma: &DMatrix<f64>, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let p = sigma.nrows();
    if n <= p {
        return Err(Error::TooFewSamples { needed: p + 1, found: n });
    }
    if sigma.diagonal().iter().any(|&d| (d - 1.0).abs() > 1e-12) {
        return Err(Error::InvalidArgument("covariance must have unit diagonal".into()));
    }
    let chol = Cholesky::new(sigma.clone()).ok_or(Error::Singular("design covariance"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    for mut col in z.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let q = z.qr().q() * (n as f64).sqrt();
    Ok(q * chol.l().transpose())
}
