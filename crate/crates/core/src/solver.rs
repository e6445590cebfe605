//! Cyclical coordinate descent for the graph-constrained objective
//!
//! ```text
//! Q(beta) = ||y - X beta||^2 + lambda1 ||beta||_1 + lambda2 beta^T L beta
//! ```
//!
//! Internally the solver minimizes the equivalent `Q / (2n)` form
//!
//! ```text
//! R(beta) = ||y - X beta||^2 / (2n) + lambda * [ (1 - alpha)/2 beta^T L beta + alpha ||beta||_1 ]
//! ```
//!
//! with `lambda = (lambda1 + 2 lambda2) / (2n)` and
//! `alpha = lambda1 / (lambda1 + 2 lambda2)`, so that `lambda * alpha = lambda1 / (2n)`
//! and `lambda * (1 - alpha) = lambda2 / n`. Setting `lambda2 = 0` gives the
//! Lasso and replacing `L` by the identity gives the (naive) elastic net.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::graph::LaplacianMatrix;

/// Sparsity and smoothness weights on the unscaled `Q` objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl PenaltyConfig {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        for (name, v) in [("lambda1", lambda1), ("lambda2", lambda2)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidPenalty(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(Self { lambda1, lambda2 })
    }

    /// `(lambda, alpha)` for a dataset with `n` samples.
    pub fn to_lambda_alpha(&self, n: usize) -> Result<(f64, f64)> {
        reparameterize(self.lambda1, self.lambda2, n)
    }

    pub fn from_lambda_alpha(lambda: f64, alpha: f64, n: usize) -> Result<Self> {
        let (l1, l2) = inverse_reparameterize(lambda, alpha, n)?;
        Self::new(l1, l2)
    }

    /// `lambda * alpha`, the soft-threshold level.
    pub fn l1_level(&self, n: usize) -> f64 {
        self.lambda1 / (2.0 * n as f64)
    }

    /// `lambda * (1 - alpha)`, the smoothness weight on the scaled objective.
    pub fn smooth_level(&self, n: usize) -> f64 {
        self.lambda2 / n as f64
    }
}

/// Maps `(lambda1, lambda2)` to `(lambda, alpha)`.
pub fn reparameterize(lambda1: f64, lambda2: f64, n: usize) -> Result<(f64, f64)> {
    if !(lambda1 >= 0.0 && lambda2 >= 0.0) || !lambda1.is_finite() || !lambda2.is_finite() {
        return Err(Error::InvalidPenalty(format!(
            "penalties must be finite and >= 0, got ({lambda1}, {lambda2})"
        )));
    }
    if lambda1 + lambda2 == 0.0 {
        return Err(Error::InvalidPenalty(
            "alpha is undefined when lambda1 = lambda2 = 0".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let total = lambda1 + 2.0 * lambda2;
    Ok((total / (2.0 * n as f64), lambda1 / total))
}

/// Maps `(lambda, alpha)` back to `(lambda1, lambda2)`.
pub fn inverse_reparameterize(lambda: f64, alpha: f64, n: usize) -> Result<(f64, f64)> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidPenalty(format!("lambda must be > 0, got {lambda}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidPenalty(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let scaled = 2.0 * n as f64 * lambda;
    Ok((scaled * alpha, scaled * (1.0 - alpha) / 2.0))
}

/// `sign(z) * max(|z| - gamma, 0)`.
#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Stop once the largest coordinate change in a full sweep is below
    /// this and the KKT residual is too.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Keep the objective value after every sweep.
    pub record_objective: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_sweeps: 10_000,
            record_objective: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Coefficients on the standardized scale.
    pub beta: Vec<f64>,
    /// Coefficients on the raw scale.
    pub beta_original: Vec<f64>,
    pub intercept: f64,
    pub active_set: Vec<usize>,
    pub lambda1: f64,
    pub lambda2: f64,
    /// `None` when `lambda1 = lambda2 = 0`.
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    /// Value of `Q` at `beta`.
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signs: Option<Vec<i8>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective_trace: Vec<f64>,
}

impl FitResult {
    pub fn penalty(&self) -> PenaltyConfig {
        PenaltyConfig {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
        }
    }
}

/// `||y - X beta||^2 + lambda1 ||beta||_1 + lambda2 beta^T L beta`.
pub fn objective(
    ds: &Dataset,
    l: &LaplacianMatrix,
    beta: &[f64],
    lambda1: f64,
    lambda2: f64,
) -> Result<f64> {
    check_dim("coefficient vector", ds.p(), beta.len())?;
    check_dim("penalty matrix", ds.p(), l.p())?;
    let rss = residual(ds, beta).iter().map(|r| r * r).sum::<f64>();
    let l1 = beta.iter().map(|b| b.abs()).sum::<f64>();
    Ok(rss + lambda1 * l1 + lambda2 * l.quadratic_form_unchecked(beta))
}

fn residual(ds: &Dataset, beta: &[f64]) -> Vec<f64> {
    let mut r: Vec<f64> = ds.y().iter().copied().collect();
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            for (ri, xi) in r.iter_mut().zip(ds.column(j)) {
                *ri -= xi * b;
            }
        }
    }
    r
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exact minimizer of the scaled objective in coordinate `u`.
///
/// `partial_fit` is `(1/n) x_u^T (y - sum_{v != u} x_v beta_v)`,
/// `neighbor_pull` is `-sum_{v != u} L(u, v) beta_v`.
#[inline]
fn coordinate_minimizer(
    partial_fit: f64,
    neighbor_pull: f64,
    col_ms: f64,
    l_uu: f64,
    l1_level: f64,
    smooth_level: f64,
) -> f64 {
    let denom = col_ms + smooth_level * l_uu;
    if denom <= 0.0 {
        return 0.0;
    }
    soft_threshold(partial_fit + smooth_level * neighbor_pull, l1_level) / denom
}

/// One coordinate update of `beta[u]` with all other coordinates held fixed.
///
/// For an isolated vertex this is the plain Lasso update
/// `S((1/n) x_u^T (y - y_hat^(u)), lambda * alpha)`; for a connected one the
/// neighbor term `lambda (1 - alpha) sum_v -L(u, v) beta_v` is added before
/// thresholding and the result is shrunk by `1 + lambda (1 - alpha)`.
pub fn coordinate_update(
    u: usize,
    beta: &[f64],
    ds: &Dataset,
    l: &LaplacianMatrix,
    cfg: &PenaltyConfig,
) -> Result<f64> {
    check_dim("coefficient vector", ds.p(), beta.len())?;
    check_dim("penalty matrix", ds.p(), l.p())?;
    if u >= ds.p() {
        return Err(Error::InvalidArgument(format!("coordinate {u} out of range")));
    }
    let n = ds.n() as f64;
    let xu = ds.column(u);
    let r = residual(ds, beta);
    let col_ms = dot(xu, xu) / n;
    let partial_fit = dot(xu, &r) / n + col_ms * beta[u];
    let pull = -l.row(u).iter().map(|&(v, x)| x * beta[v]).sum::<f64>();
    Ok(coordinate_minimizer(
        partial_fit,
        pull,
        col_ms,
        l.diag(u),
        cfg.l1_level(ds.n()),
        cfg.smooth_level(ds.n()),
    ))
}

/// Minimizes `a t^2 / 2 + b t + l1 sum_k |beta_k + t d_k|` over `t`.
/// Returns the minimizer and the positions (into `members`) of coordinates
/// that land exactly on zero.
fn line_minimizer(a: f64, b: f64, l1: f64, members: &[usize], dir: &[f64], beta: &[f64]) -> (f64, Vec<usize>) {
    let mut kinks: Vec<(f64, f64, usize)> = members
        .iter()
        .zip(dir)
        .enumerate()
        .filter(|(_, (_, &d))| d != 0.0)
        .map(|(k, (&u, &d))| (-beta[u] / d, d.abs(), k))
        .collect();
    if l1 == 0.0 || kinks.is_empty() {
        return (-b / a, Vec::new());
    }
    kinks.sort_by(|x, y| x.0.total_cmp(&y.0));
    // slope of the penalty part left of every kink
    let mut s = -kinks.iter().map(|k| k.1).sum::<f64>();
    let mut lo = f64::NEG_INFINITY;
    let mut i = 0;
    while i < kinks.len() {
        let tau = kinks[i].0;
        let t = -(b + l1 * s) / a;
        if t >= lo && t < tau {
            return (t, Vec::new());
        }
        let mut j = i;
        let mut jump = 0.0;
        while j < kinks.len() && kinks[j].0 == tau {
            jump += 2.0 * kinks[j].1;
            j += 1;
        }
        if a * tau + b + l1 * (s + jump) >= 0.0 {
            return (tau, kinks[i..j].iter().map(|k| k.2).collect());
        }
        s += jump;
        lo = tau;
        i = j;
    }
    (-(b + l1 * s) / a, Vec::new())
}

struct Workspace<'a> {
    ds: &'a Dataset,
    l: &'a LaplacianMatrix,
    beta: Vec<f64>,
    resid: Vec<f64>,
    col_ms: Vec<f64>,
    l1_level: f64,
    smooth_level: f64,
    inv_n: f64,
    groups: Vec<Group>,
}

/// A connected block of the penalty graph and its fixed search direction.
struct Group {
    members: Vec<usize>,
    dir: Vec<f64>,
    /// `X d`.
    xd: Vec<f64>,
    /// `|X d|^2 / n`.
    curvature: f64,
    /// `d^T L d`.
    dld: f64,
}

impl Group {
    fn new(ds: &Dataset, l: &LaplacianMatrix, members: Vec<usize>, dir: Vec<f64>) -> Self {
        let mut xd = vec![0.0; ds.n()];
        let mut full = vec![0.0; l.p()];
        for (&u, &d) in members.iter().zip(&dir) {
            full[u] = d;
            for (s, x) in xd.iter_mut().zip(ds.column(u)) {
                *s += d * x;
            }
        }
        let dld = members.iter().zip(&dir).map(|(&u, &d)| d * l.row_dot(u, &full)).sum();
        Self {
            curvature: dot(&xd, &xd) / ds.n() as f64,
            members,
            dir,
            xd,
            dld,
        }
    }
}

impl<'a> Workspace<'a> {
    fn new(ds: &'a Dataset, l: &'a LaplacianMatrix, cfg: &PenaltyConfig, beta: Vec<f64>) -> Result<Self> {
        if ds.n() == 0 {
            return Err(Error::NoSamples("training data".into()));
        }
        let inv_n = 1.0 / ds.n() as f64;
        let col_ms = (0..ds.p())
            .map(|j| {
                let c = ds.column(j);
                dot(c, c) * inv_n
            })
            .collect();
        Ok(Self {
            ds,
            l,
            resid: residual(ds, &beta),
            beta,
            col_ms,
            l1_level: cfg.l1_level(ds.n()),
            smooth_level: cfg.smooth_level(ds.n()),
            inv_n,
            groups: if cfg.lambda2 > 0.0 {
                l.coupled_groups()
                    .into_iter()
                    .map(|(members, dir)| Group::new(ds, l, members, dir))
                    .collect()
            } else {
                Vec::new()
            },
        })
    }

    /// Updates the listed coordinates in order; returns the largest change.
    fn sweep(&mut self, coords: impl Iterator<Item = usize>, sweep_no: usize) -> Result<f64> {
        let mut max_change = 0.0f64;
        for u in coords {
            let xu = self.ds.column(u);
            let old = self.beta[u];
            let partial_fit = dot(xu, &self.resid) * self.inv_n + self.col_ms[u] * old;
            let pull = -self
                .l
                .row(u)
                .iter()
                .map(|&(v, x)| x * self.beta[v])
                .sum::<f64>();
            let new = coordinate_minimizer(
                partial_fit,
                pull,
                self.col_ms[u],
                self.l.diag(u),
                self.l1_level,
                self.smooth_level,
            );
            if !(new.is_finite() && partial_fit.is_finite() && pull.is_finite()) {
                return Err(Error::NonFinite {
                    coordinate: u,
                    sweep: sweep_no,
                });
            }
            let delta = new - old;
            if delta != 0.0 {
                for (ri, xi) in self.resid.iter_mut().zip(xu) {
                    *ri -= xi * delta;
                }
                self.beta[u] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        Ok(max_change)
    }

    /// Exact line search along the null direction of every coupled group.
    /// The smoothness penalty barely resists these moves, so coordinate
    /// sweeps alone make slow progress along them.
    fn group_moves(&mut self, sweep_no: usize) -> Result<f64> {
        let mut max_change = 0.0f64;
        for g in &self.groups {
            if g.members.iter().all(|&u| self.beta[u] == 0.0) {
                continue;
            }
            let dlb: f64 = g
                .members
                .iter()
                .zip(&g.dir)
                .map(|(&u, &d)| d * self.l.row_dot(u, &self.beta))
                .sum();
            let b = -dot(&self.resid, &g.xd) * self.inv_n + self.smooth_level * dlb;
            let a = g.curvature + self.smooth_level * g.dld;
            if !(a > 0.0) {
                continue;
            }
            let (t, zeroed) = line_minimizer(a, b, self.l1_level, &g.members, &g.dir, &self.beta);
            if !t.is_finite() {
                return Err(Error::NonFinite {
                    coordinate: g.members[0],
                    sweep: sweep_no,
                });
            }
            if t == 0.0 {
                continue;
            }
            for (k, (&u, &d)) in g.members.iter().zip(&g.dir).enumerate() {
                let new = if zeroed.contains(&k) { 0.0 } else { self.beta[u] + t * d };
                max_change = max_change.max((new - self.beta[u]).abs());
                self.beta[u] = new;
            }
            for (r, x) in self.resid.iter_mut().zip(&g.xd) {
                *r -= t * x;
            }
        }
        Ok(max_change)
    }

    fn refresh_residual(&mut self) {
        self.resid = residual(self.ds, &self.beta);
    }

    /// Largest violation of the subgradient conditions of the scaled objective.
    fn kkt_residual(&self) -> f64 {
        (0..self.beta.len())
            .map(|u| {
                let grad = -dot(self.ds.column(u), &self.resid) * self.inv_n
                    + self.smooth_level * self.l.row_dot(u, &self.beta);
                let b = self.beta[u];
                if b != 0.0 {
                    (grad + self.l1_level * b.signum()).abs()
                } else {
                    (grad.abs() - self.l1_level).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    fn objective(&self, cfg: &PenaltyConfig) -> f64 {
        let rss = self.resid.iter().map(|r| r * r).sum::<f64>();
        let l1 = self.beta.iter().map(|b| b.abs()).sum::<f64>();
        rss + cfg.lambda1 * l1 + cfg.lambda2 * self.l.quadratic_form_unchecked(&self.beta)
    }
}

/// Minimizes `Q(beta; lambda1, lambda2)` on a standardized dataset.
///
/// Coordinates are visited in ascending order. After two full sweeps the
/// solver cycles over the current active set until it settles, then runs a
/// full sweep to pick up violators. It stops when a full sweep moves no
/// coordinate by more than `tol` and the KKT residual is below `tol`; hitting
/// `max_sweeps` returns the current iterate with `converged = false`.
pub fn fit_grace(
    ds: &Dataset,
    l: &LaplacianMatrix,
    cfg: &PenaltyConfig,
    init: Option<&[f64]>,
    opts: &FitOptions,
) -> Result<FitResult> {
    if !ds.is_standardized() {
        return Err(Error::NotStandardized);
    }
    let (n, p) = (ds.n(), ds.p());
    check_dim("penalty matrix", p, l.p())?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be > 0, got {}", opts.tol)));
    }
    let cfg = PenaltyConfig::new(cfg.lambda1, cfg.lambda2)?;
    if cfg.lambda1 == 0.0 && cfg.lambda2 == 0.0 && p > n {
        return Err(Error::InvalidPenalty(
            "lambda1 = lambda2 = 0 with p > n has no unique minimizer".into(),
        ));
    }

    let beta = match init {
        Some(b) => {
            check_dim("initial coefficients", p, b.len())?;
            b.to_vec()
        }
        None => vec![0.0; p],
    };
    let mut ws = Workspace::new(ds, l, &cfg, beta)?;

    let mut trace = Vec::new();
    let record = |ws: &Workspace, trace: &mut Vec<f64>| {
        if opts.record_objective {
            trace.push(ws.objective(&cfg));
        }
    };
    record(&ws, &mut trace);

    let mut sweeps = 0usize;
    let mut full_sweeps = 0usize;
    let mut converged = false;
    while sweeps < opts.max_sweeps {
        let change = ws.sweep(0..p, sweeps)?.max(ws.group_moves(sweeps)?);
        sweeps += 1;
        full_sweeps += 1;
        record(&ws, &mut trace);
        if change < opts.tol {
            ws.refresh_residual();
            if ws.kkt_residual() < opts.tol {
                converged = true;
                break;
            }
        }
        if full_sweeps >= 2 {
            let active: Vec<usize> = (0..p).filter(|&u| ws.beta[u] != 0.0).collect();
            while sweeps < opts.max_sweeps {
                let change = ws.sweep(active.iter().copied(), sweeps)?.max(ws.group_moves(sweeps)?);
                sweeps += 1;
                record(&ws, &mut trace);
                if change < opts.tol {
                    break;
                }
            }
        }
    }

    ws.refresh_residual();
    finish(ws, &cfg, sweeps, converged, trace)
}

fn finish(
    ws: Workspace,
    cfg: &PenaltyConfig,
    sweeps: usize,
    converged: bool,
    trace: Vec<f64>,
) -> Result<FitResult> {
    let (ds, l) = (ws.ds, ws.l);
    let stats = ds.standardization().ok_or(Error::NotStandardized)?;
    let kkt_residual = ws.kkt_residual();
    let objective = ws.objective(cfg);
    if !objective.is_finite() {
        return Err(Error::NonFinite {
            coordinate: ds.p(),
            sweep: sweeps,
        });
    }
    let beta = ws.beta;
    let (beta_original, intercept) = stats.back_transform(&beta);
    let (lambda, alpha) = match cfg.to_lambda_alpha(ds.n()) {
        Ok((lam, a)) => (Some(lam), Some(a)),
        Err(_) => (None, None),
    };
    Ok(FitResult {
        active_set: (0..beta.len()).filter(|&u| beta[u] != 0.0).collect(),
        beta,
        beta_original,
        intercept,
        lambda1: cfg.lambda1,
        lambda2: cfg.lambda2,
        lambda,
        alpha,
        objective,
        kkt_residual,
        iterations: sweeps,
        converged,
        signs: l.signs().map(<[i8]>::to_vec),
        objective_trace: trace,
    })
}

/// The all-zero solution, returned without iterating. Valid whenever
/// `lambda1 >= lambda1_max(ds)`; the KKT residual certifies it either way.
pub fn zero_fit(ds: &Dataset, l: &LaplacianMatrix, cfg: &PenaltyConfig, tol: f64) -> Result<FitResult> {
    check_dim("penalty matrix", ds.p(), l.p())?;
    let ws = Workspace::new(ds, l, cfg, vec![0.0; ds.p()])?;
    let converged = ws.kkt_residual() < tol;
    finish(ws, cfg, 0, converged, Vec::new())
}

/// Smallest `lambda1` at which the all-zero vector solves the problem:
/// `2 max_u |<x_u, y>|`, independent of `lambda2`.
pub fn lambda1_max(ds: &Dataset) -> f64 {
    (0..ds.p())
        .map(|j| dot(ds.column(j), ds.y().as_slice()).abs())
        .fold(0.0, f64::max)
        * 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{laplacian, WeightedGraph};
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn line_minimizer_beats_dense_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let k = rng.random_range(1..6);
            let members: Vec<usize> = (0..k).collect();
            let dir: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut beta: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            if rng.random_bool(0.3) {
                beta[0] = 0.0;
            }
            let (a, b, l1) = (rng.random_range(0.1..3.0), rng.random_range(-3.0..3.0), rng.random_range(0.0..2.0));
            let f = |t: f64| {
                a * t * t / 2.0 + b * t + l1 * beta.iter().zip(&dir).map(|(x, d)| (x + t * d).abs()).sum::<f64>()
            };
            let (t, zeroed) = line_minimizer(a, b, l1, &members, &dir, &beta);
            let grid_min = (-200_000..=200_000).map(|i| f(i as f64 * 1e-4)).fold(f64::INFINITY, f64::min);
            assert!(f(t) <= grid_min + 1e-9, "f({t}) = {} vs grid {grid_min}", f(t));
            for z in zeroed {
                assert!((beta[z] + t * dir[z]).abs() < 1e-12);
            }
        }
    }

    fn random_dataset(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Dataset {
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y = DVector::from_fn(n, |i, _| {
            (0..p).map(|j| x[(i, j)] * beta[j]).sum::<f64>() + rng.sample::<f64, _>(StandardNormal)
        });
        Dataset::new(x, y).unwrap().standardize().unwrap()
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-2.0, 0.5), -1.5);
        assert_eq!(soft_threshold(1.0, 1.0), 0.0);
    }

    #[test]
    fn reparameterize_examples() {
        assert_eq!(reparameterize(2.0, 1.0, 1).unwrap(), (2.0, 0.5));
        let (lam, a) = reparameterize(0.0, 1.0, 10).unwrap();
        assert_abs_diff_eq!(lam, 0.1, epsilon = 1e-15);
        assert_eq!(a, 0.0);
        assert!(matches!(reparameterize(0.0, 0.0, 5), Err(Error::InvalidPenalty(_))));
        assert!(reparameterize(-1.0, 1.0, 5).is_err());
    }

    #[test]
    fn reparameterize_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let l1 = rng.random_range(0.0..100.0);
            let l2 = rng.random_range(0.0..100.0);
            let n = rng.random_range(1..500);
            let (lam, a) = reparameterize(l1, l2, n).unwrap();
            let (b1, b2) = inverse_reparameterize(lam, a, n).unwrap();
            assert!((b1 - l1).abs() <= 1e-14 * (1.0 + l1));
            assert!((b2 - l2).abs() <= 1e-14 * (1.0 + l2));
            let cfg = PenaltyConfig::new(l1, l2).unwrap();
            assert_abs_diff_eq!(cfg.l1_level(n), lam * a, epsilon = 1e-12);
            assert_abs_diff_eq!(cfg.smooth_level(n), lam * (1.0 - a), epsilon = 1e-12);
        }
    }

    #[test]
    fn objective_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ds = random_dataset(&mut rng, 20, 3);
        let l = laplacian(&WeightedGraph::new(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap());
        let zero = objective(&ds, &l, &[0.0; 3], 3.0, 4.0).unwrap();
        assert_abs_diff_eq!(zero, ds.y().norm_squared(), epsilon = 1e-12);

        // term-by-term recomputation
        let beta = [0.3, -1.1, 2.0];
        let rss = (ds.y() - ds.x() * DVector::from_column_slice(&beta)).norm_squared();
        let l1 = 0.3 + 1.1 + 2.0;
        let smooth = l.quadratic_form(&beta).unwrap();
        let got = objective(&ds, &l, &beta, 1.5, 2.5).unwrap();
        assert_abs_diff_eq!(got, rss + 1.5 * l1 + 2.5 * smooth, epsilon = 1e-12 * got);
    }

    #[test]
    fn isolated_update_with_no_threshold_is_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ds = random_dataset(&mut rng, 30, 2);
        let l = laplacian(&WeightedGraph::empty(2));
        let beta = [0.0, 0.4];
        let cfg = PenaltyConfig::new(0.0, 5.0).unwrap();
        let got = coordinate_update(0, &beta, &ds, &l, &cfg).unwrap();
        let partial: Vec<f64> = (0..30).map(|i| ds.y()[i] - ds.x()[(i, 1)] * 0.4).collect();
        let want = dot(ds.column(0), &partial) / 30.0;
        assert_abs_diff_eq!(got, want, epsilon = 1e-12);
    }

    #[test]
    fn connected_update_with_zero_neighbors_is_shrunk_lasso() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ds = random_dataset(&mut rng, 30, 3);
        let l = laplacian(&WeightedGraph::new(3, &[(0, 1, 1.0), (0, 2, 1.0)]).unwrap());
        let cfg = PenaltyConfig::new(6.0, 15.0).unwrap();
        let beta = [0.2, 0.0, 0.0];
        let got = coordinate_update(0, &beta, &ds, &l, &cfg).unwrap();
        let iso = coordinate_update(0, &beta, &ds, &laplacian(&WeightedGraph::empty(3)), &cfg).unwrap();
        let (lam, a) = cfg.to_lambda_alpha(30).unwrap();
        assert_abs_diff_eq!(got, iso / (1.0 + lam * (1.0 - a)), epsilon = 1e-12);
    }

    #[test]
    fn coordinate_update_matches_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ds = random_dataset(&mut rng, 25, 2);
        let l = laplacian(&WeightedGraph::new(2, &[(0, 1, 1.0)]).unwrap());
        let cfg = PenaltyConfig::new(4.0, 10.0).unwrap();
        for &other in &[-0.8, 0.0, 0.9] {
            let beta = [0.0, other];
            let got = coordinate_update(0, &beta, &ds, &l, &cfg).unwrap();
            // coarse-to-fine 1-D grid search on Q
            let q = |b: f64| objective(&ds, &l, &[b, other], cfg.lambda1, cfg.lambda2).unwrap();
            let (mut lo, mut hi) = (-5.0, 5.0);
            for _ in 0..8 {
                let step = (hi - lo) / 200.0;
                let best = (0..=200)
                    .map(|k| lo + k as f64 * step)
                    .min_by(|a, b| q(*a).total_cmp(&q(*b)))
                    .unwrap();
                lo = best - step;
                hi = best + step;
            }
            assert_abs_diff_eq!(got, 0.5 * (lo + hi), epsilon = 1e-6);
        }
    }

    #[test]
    fn above_lambda_max_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ds = random_dataset(&mut rng, 40, 5);
        let g = WeightedGraph::new(5, &[(0, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0)]).unwrap();
        let l = laplacian(&g);
        let cfg = PenaltyConfig::new(lambda1_max(&ds) * 1.0001, 7.0).unwrap();
        let fit = fit_grace(&ds, &l, &cfg, None, &FitOptions::default()).unwrap();
        assert!(fit.beta.iter().all(|&b| b == 0.0));
        assert!(fit.active_set.is_empty());
        assert!(fit.converged);
        let below = PenaltyConfig::new(lambda1_max(&ds) * 0.99, 7.0).unwrap();
        let fit = fit_grace(&ds, &l, &below, None, &FitOptions::default()).unwrap();
        assert!(!fit.active_set.is_empty());
    }

    #[test]
    fn orthonormal_design_lasso_closed_form() {
        // columns with X^T X = n I, centered
        let n = 8;
        let h = [
            [1.0, 1.0, 1.0],
            [1.0, -1.0, 1.0],
            [1.0, 1.0, -1.0],
            [1.0, -1.0, -1.0],
            [-1.0, 1.0, 1.0],
            [-1.0, -1.0, 1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, -1.0],
        ];
        let x = DMatrix::from_fn(n, 3, |i, j| h[i][j]);
        let mut y = DVector::from_column_slice(&[3.0, -1.0, 2.5, 0.5, -2.0, 1.0, -0.5, 4.0]);
        let mean = y.mean();
        y.add_scalar_mut(-mean);
        let ds = Dataset::from_standardized(x, y).unwrap();
        let lambda1 = 6.0;
        let cfg = PenaltyConfig::new(lambda1, 0.0).unwrap();
        let l = laplacian(&WeightedGraph::empty(3));
        let fit = fit_grace(&ds, &l, &cfg, None, &FitOptions::default()).unwrap();
        for j in 0..3 {
            let ols = dot(ds.column(j), ds.y().as_slice()) / n as f64;
            // Q-form: minimize n (b - ols)^2 + lambda1 |b| => S(ols, lambda1 / 2n)
            let want = soft_threshold(ols, lambda1 / (2.0 * n as f64));
            assert_abs_diff_eq!(fit.beta[j], want, epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_penalty_with_wide_design_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let ds = random_dataset(&mut rng, 4, 6);
        let l = LaplacianMatrix::identity(6);
        let err = fit_grace(&ds, &l, &PenaltyConfig::new(0.0, 0.0).unwrap(), None, &FitOptions::default());
        assert!(matches!(err, Err(Error::InvalidPenalty(_))));
    }

    #[test]
    fn unstandardized_data_rejected() {
        let ds = Dataset::new(DMatrix::from_element(3, 1, 1.0), DVector::from_element(3, 1.0)).unwrap();
        let l = LaplacianMatrix::identity(1);
        let err = fit_grace(&ds, &l, &PenaltyConfig::new(1.0, 0.0).unwrap(), None, &FitOptions::default());
        assert_eq!(err.unwrap_err(), Error::NotStandardized);
    }

    #[test]
    fn non_finite_input_aborts() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let ds = random_dataset(&mut rng, 10, 2);
        let l = LaplacianMatrix::identity(2);
        let cfg = PenaltyConfig::new(1.0, 0.0).unwrap();
        let err = fit_grace(&ds, &l, &cfg, Some(&[f64::NAN, 0.0]), &FitOptions::default());
        assert!(matches!(err, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn sweep_limit_reports_non_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let ds = random_dataset(&mut rng, 30, 6);
        let l = laplacian(&WeightedGraph::new(6, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap());
        let cfg = PenaltyConfig::new(1.0, 20.0).unwrap();
        let opts = FitOptions {
            max_sweeps: 1,
            ..FitOptions::default()
        };
        let fit = fit_grace(&ds, &l, &cfg, None, &opts).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 1);
    }

    #[test]
    fn objective_is_monotone_and_reported_consistently() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..20 {
            let ds = random_dataset(&mut rng, 40, 8);
            let mut triples = Vec::new();
            for u in 0..8 {
                for v in (u + 1)..8 {
                    if rng.random_bool(0.3) {
                        triples.push((u, v, 1.0));
                    }
                }
            }
            let l = laplacian(&WeightedGraph::new(8, &triples).unwrap());
            let cfg = PenaltyConfig::new(rng.random_range(0.0..40.0), rng.random_range(0.0..80.0)).unwrap();
            let opts = FitOptions {
                record_objective: true,
                ..FitOptions::default()
            };
            let fit = fit_grace(&ds, &l, &cfg, None, &opts).unwrap();
            assert!(fit.converged);
            assert!(fit.kkt_residual < opts.tol);
            for w in fit.objective_trace.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} > {}", w[1], w[0]);
            }
            let recomputed = objective(&ds, &l, &fit.beta, cfg.lambda1, cfg.lambda2).unwrap();
            assert!((fit.objective - recomputed).abs() <= 1e-9 * recomputed.abs());
        }
    }
}
