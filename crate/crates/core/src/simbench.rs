//! Simulated transcription-factor modules and the method comparison run on
//! them: prediction error on held-out data and ROC curves along the path.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::{EstimateMethod, SignEstimate};
use crate::cv::DEFAULT_LAMBDA2_GRID;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{laplacian, signed_laplacian, LaplacianMatrix, WeightedGraph};
use crate::path::{fit_path_until, lambda1_grid, predict, prediction_mse, PathParameter, PathResult, PathStop};
use crate::solver::{FitOptions, FitResult};

/// Magnitudes of the transcription-factor coefficients, cycled over the
/// active modules.
pub const TF_PATTERN: [f64; 4] = [2.0, -2.0, 4.0, -4.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Genes share their transcription factor's sign.
    Model1,
    /// Some genes in each active module have the opposite sign.
    Model2,
}

impl Model {
    pub fn number(self) -> u8 {
        match self {
            Model::Model1 => 1,
            Model::Model2 => 2,
        }
    }

    pub fn from_number(k: u8) -> Result<Self> {
        match k {
            1 => Ok(Model::Model1),
            2 => Ok(Model::Model2),
            _ => Err(Error::InvalidArgument(format!("model must be 1 or 2, got {k}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub n_modules: usize,
    pub genes_per_tf: usize,
    pub n_active_modules: usize,
    pub correlation: f64,
    pub model: Model,
    pub sign_flips_per_module: usize,
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    /// Drop the noise term so that `y = X beta` exactly.
    #[serde(default)]
    pub noiseless: bool,
}

impl SimulationSpec {
    /// 200 modules of 10 genes, 4 active, 200 samples per split.
    pub fn standard(model: Model, correlation: f64) -> Self {
        Self {
            n_modules: 200,
            genes_per_tf: 10,
            n_active_modules: 4,
            correlation,
            model,
            sign_flips_per_module: 3,
            n_train: 200,
            n_valid: 200,
            n_test: 200,
            noiseless: false,
        }
    }

    pub fn with_modules(mut self, n_modules: usize) -> Self {
        self.n_modules = n_modules;
        self
    }

    pub fn p(&self) -> usize {
        self.n_modules * (1 + self.genes_per_tf)
    }

    pub fn q(&self) -> usize {
        self.n_active_modules * (1 + self.genes_per_tf)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_modules == 0 || self.genes_per_tf == 0 {
            return bad("need at least one module and one gene per module".into());
        }
        if self.n_active_modules > self.n_modules {
            return bad(format!(
                "{} active modules but only {} modules",
                self.n_active_modules, self.n_modules
            ));
        }
        if !(self.correlation > -1.0 && self.correlation < 1.0) {
            return bad(format!("correlation must lie in (-1, 1), got {}", self.correlation));
        }
        if self.sign_flips_per_module > self.genes_per_tf {
            return bad("more sign flips than genes per module".into());
        }
        if self.n_train < 2 || self.n_valid == 0 || self.n_test == 0 {
            return bad("need n_train >= 2 and nonempty validation and test sets".into());
        }
        Ok(())
    }

    fn tf_index(&self, module: usize) -> usize {
        module * (1 + self.genes_per_tf)
    }
}

/// Star per module: the transcription factor joined to each of its genes by
/// a unit-weight edge. Module `m` occupies indices `m(1+g) .. (m+1)(1+g)`,
/// transcription factor first.
pub fn build_module_graph(spec: &SimulationSpec) -> Result<WeightedGraph> {
    spec.validate()?;
    let mut edges = Vec::with_capacity(spec.n_modules * spec.genes_per_tf);
    for m in 0..spec.n_modules {
        let tf = spec.tf_index(m);
        for k in 1..=spec.genes_per_tf {
            edges.push((tf, tf + k, 1.0));
        }
    }
    WeightedGraph::new(spec.p(), &edges)
}

/// Active modules come first. Each gene gets its transcription factor's
/// coefficient divided by `sqrt(genes_per_tf)`; under the second model the
/// first `sign_flips_per_module` genes of every active module change sign.
pub fn model_coefficients(spec: &SimulationSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut beta = vec![0.0; spec.p()];
    let scale = (spec.genes_per_tf as f64).sqrt();
    for m in 0..spec.n_active_modules {
        let tf = spec.tf_index(m);
        let b = TF_PATTERN[m % TF_PATTERN.len()];
        beta[tf] = b;
        for k in 1..=spec.genes_per_tf {
            let flip = spec.model == Model::Model2 && k <= spec.sign_flips_per_module;
            beta[tf + k] = if flip { -b / scale } else { b / scale };
        }
    }
    Ok(beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTruth {
    pub beta: Vec<f64>,
    pub support: Vec<usize>,
    /// Noise standard deviation, `sqrt(sum beta^2 / 4)` unless noiseless.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub train: Dataset,
    pub valid: Dataset,
    pub test: Dataset,
    pub truth: SimulationTruth,
}

/// Draws the three splits in order from one generator seeded with `seed`.
/// Each transcription factor is standard normal and each of its genes is
/// `r * tf + sqrt(1 - r^2) * z`.
pub fn simulate_dataset(spec: &SimulationSpec, seed: u64) -> Result<SimulatedData> {
    let beta = model_coefficients(spec)?;
    let support: Vec<usize> = (0..beta.len()).filter(|&u| beta[u] != 0.0).collect();
    let sigma = if spec.noiseless {
        0.0
    } else {
        (beta.iter().map(|b| b * b).sum::<f64>() / 4.0).sqrt()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| -> Result<Dataset> {
        let x = draw_design(spec, n, &mut rng);
        let mut y = &x * DVector::from_column_slice(&beta);
        for v in y.iter_mut() {
            *v += sigma * rng.sample::<f64, _>(StandardNormal);
        }
        Dataset::new(x, y)
    };
    let train = draw(spec.n_train)?;
    let valid = draw(spec.n_valid)?;
    let test = draw(spec.n_test)?;
    Ok(SimulatedData {
        train,
        valid,
        test,
        truth: SimulationTruth { beta, support, sigma },
    })
}

fn draw_design(spec: &SimulationSpec, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let r = spec.correlation;
    let s = (1.0 - r * r).sqrt();
    let p = spec.p();
    let mut rows = vec![0.0; n * p];
    for row in rows.chunks_mut(p) {
        for module in row.chunks_mut(1 + spec.genes_per_tf) {
            let tf: f64 = rng.sample(StandardNormal);
            module[0] = tf;
            for gene in &mut module[1..] {
                *gene = r * tf + s * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    DMatrix::from_row_slice(n, p, &rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Grace,
    AGrace,
    Enet,
    Lasso,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Grace, Method::AGrace, Method::Enet, Method::Lasso];

    pub fn name(self) -> &'static str {
        match self {
            Method::Grace => "Grace",
            Method::AGrace => "aGrace",
            Method::Enet => "Enet",
            Method::Lasso => "Lasso",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Distinct `(fpr, tpr)` pairs sorted by FPR, each with the largest
    /// path value that produced it.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// TPR and FPR of the active set at every path point. The AUC integrates
/// the monotone upper envelope: the running maximum of the best TPR at each
/// FPR, joined linearly from `(0, 0)` and extended flat out to FPR 1.
pub fn roc_curve(path: &PathResult, truth: &[usize]) -> Result<RocCurve> {
    if path.is_empty() {
        return Err(Error::EmptyPath);
    }
    let p = path.fits[0].beta.len();
    let q = truth.len();
    if q == 0 {
        return Err(Error::InvalidArgument("ROC needs a nonempty true support".into()));
    }
    if let Some(&bad) = truth.iter().find(|&&u| u >= p) {
        return Err(Error::VertexOutOfRange { index: bad, p });
    }
    let mut is_true = vec![false; p];
    for &u in truth {
        is_true[u] = true;
    }
    let negatives = (p - q) as f64;
    let mut points: Vec<RocPoint> = path
        .fits
        .iter()
        .zip(&path.lambdas)
        .map(|(fit, &lambda)| {
            let tp = fit.active_set.iter().filter(|&&u| is_true[u]).count();
            let fp = fit.active_set.len() - tp;
            RocPoint {
                tpr: tp as f64 / q as f64,
                fpr: if negatives > 0.0 { fp as f64 / negatives } else { 0.0 },
                lambda,
            }
        })
        .collect();
    points.sort_by(|a, b| {
        a.fpr
            .total_cmp(&b.fpr)
            .then(a.tpr.total_cmp(&b.tpr))
            .then(b.lambda.total_cmp(&a.lambda))
    });
    points.dedup_by(|later, earlier| later.fpr == earlier.fpr && later.tpr == earlier.tpr);

    // points are sorted by TPR within each FPR, so the last one is the best
    let mut auc = 0.0;
    let (mut x0, mut y0) = (0.0f64, 0.0f64);
    for (k, pt) in points.iter().enumerate() {
        if points.get(k + 1).is_some_and(|next| next.fpr == pt.fpr) {
            continue;
        }
        let y1 = y0.max(pt.tpr);
        auc += (pt.fpr - x0) * (y0 + y1) / 2.0;
        x0 = pt.fpr;
        y0 = y1;
    }
    auc += (1.0 - x0) * y0;
    Ok(RocCurve { points, auc })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub seed: u64,
    pub lambda2s: Vec<f64>,
    pub eps: f64,
    pub nlambda: usize,
    /// Paths end early once the training fit saturates.
    pub stop: Option<PathStop>,
    pub fit: FitOptions,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            replicates: 100,
            seed: 1,
            lambda2s: DEFAULT_LAMBDA2_GRID.to_vec(),
            eps: 0.001,
            nlambda: 100,
            stop: Some(PathStop::default()),
            fit: FitOptions::default(),
        }
    }
}

/// One method on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub replicate: usize,
    pub test_mse: f64,
    pub auc: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub active: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub method: Method,
    pub replicate: usize,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub method: Method,
    pub model: Model,
    pub correlation: f64,
    pub mean_mse: f64,
    /// Sample standard deviation over `sqrt(replicates)`.
    pub se_mse: f64,
    pub mean_auc: f64,
    pub se_auc: f64,
    pub replicates: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkTable {
    pub fn row(&self, method: Method) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn merge(tables: impl IntoIterator<Item = BenchmarkTable>) -> Self {
        Self {
            rows: tables.into_iter().flat_map(|t| t.rows).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRun {
    pub spec: SimulationSpec,
    pub config: BenchmarkConfig,
    pub table: BenchmarkTable,
    pub outcomes: Vec<MethodOutcome>,
    pub failures: Vec<ReplicateFailure>,
}

/// A path tuned on validation data.
#[derive(Debug, Clone, PartialEq)]
pub struct Tuned {
    pub lambda2: f64,
    pub index: usize,
    pub valid_mse: f64,
    pub path: PathResult,
}

impl Tuned {
    pub fn fit(&self) -> &FitResult {
        &self.path.fits[self.index]
    }
}

/// Fits a `lambda1` path for every `lambda2` and keeps the point with the
/// smallest validation error; ties go to the larger `lambda1`, then the
/// larger `lambda2`.
pub fn tune_on_validation(
    valid: &Dataset,
    lambda2s: &[f64],
    fitter: impl Fn(f64) -> Result<PathResult> + Sync,
) -> Result<Tuned> {
    if lambda2s.is_empty() {
        return Err(Error::InvalidArgument("empty lambda2 grid".into()));
    }
    let scored: Vec<(PathResult, Vec<f64>)> = lambda2s
        .par_iter()
        .map(|&lambda2| {
            let path = fitter(lambda2)?;
            let errs = path
                .fits
                .iter()
                .map(|f| prediction_mse(predict(f, valid.x())?.as_slice(), valid.y().as_slice()))
                .collect::<Result<Vec<f64>>>()?;
            Ok((path, errs))
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(usize, usize, f64)> = None;
    for (c, (path, errs)) in scored.iter().enumerate() {
        for (k, &e) in errs.iter().enumerate() {
            let better = match best {
                None => true,
                Some((bc, bk, be)) => {
                    let (l1, bl1) = (path.lambdas[k], scored[bc].0.lambdas[bk]);
                    e < be || (e == be && (l1 > bl1 || (l1 == bl1 && lambda2s[c] > lambda2s[bc])))
                }
            };
            if better {
                best = Some((c, k, e));
            }
        }
    }
    let (c, k, e) = best.ok_or(Error::EmptyPath)?;
    let path = scored.into_iter().nth(c).map(|(p, _)| p).ok_or(Error::EmptyPath)?;
    Ok(Tuned {
        lambda2: lambda2s[c],
        index: k,
        valid_mse: e,
        path,
    })
}

fn evaluate(
    method: Method,
    replicate: usize,
    tuned: &Tuned,
    data: &SimulatedData,
) -> Result<MethodOutcome> {
    let fit = tuned.fit();
    let yhat = predict(fit, data.test.x())?;
    let test_mse = prediction_mse(yhat.as_slice(), data.test.y().as_slice())?;
    let auc = roc_curve(&tuned.path, &data.truth.support)?.auc;
    Ok(MethodOutcome {
        method,
        replicate,
        test_mse,
        auc,
        lambda1: fit.lambda1,
        lambda2: fit.lambda2,
        active: fit.active_set.len(),
    })
}

/// Tunes every requested method on one simulated replicate. aGrace takes
/// its preliminary signs from the validation-tuned elastic net.
pub fn tune_replicate(
    spec: &SimulationSpec,
    config: &BenchmarkConfig,
    replicate: usize,
) -> Result<(SimulatedData, Vec<(Method, Result<Tuned>)>)> {
    let data = simulate_dataset(spec, config.seed.wrapping_add(replicate as u64))?;
    let train = data.train.standardize()?;
    let grid = lambda1_grid(&train, config.eps, config.nlambda)?;
    let p = spec.p();
    let g = build_module_graph(spec)?;
    let l = laplacian(&g);
    let identity = LaplacianMatrix::identity(p);
    let opts = &config.fit;

    let path_with = |l: &LaplacianMatrix, lambda2: f64| {
        fit_path_until(&train, l, PathParameter::Lambda1 { lambda2 }, &grid, opts, config.stop.as_ref())
    };
    let tune = |l: &LaplacianMatrix, lambda2s: &[f64]| {
        tune_on_validation(&data.valid, lambda2s, |lambda2| path_with(l, lambda2))
    };

    let wants = |m: Method| config.methods.contains(&m);
    let enet = if wants(Method::Enet) || wants(Method::AGrace) {
        Some(tune(&identity, &config.lambda2s))
    } else {
        None
    };

    let mut out = Vec::new();
    for &method in &config.methods {
        let tuned = match method {
            Method::Grace => tune(&l, &config.lambda2s),
            Method::Lasso => tune(&identity, &[0.0]),
            Method::Enet => match enet.as_ref() {
                Some(t) => t.clone(),
                None => unreachable!("elastic net is tuned whenever requested"),
            },
            Method::AGrace => match enet.as_ref() {
                Some(Ok(t)) => {
                    let estimate = SignEstimate::from_beta(t.fit().beta.clone(), EstimateMethod::Enet);
                    tune_on_validation(&data.valid, &config.lambda2s, |lambda2| {
                        agrace_path(&train, &g, &estimate, lambda2, &grid, opts, config.stop.as_ref())
                    })
                }
                Some(Err(e)) => Err(e.clone()),
                None => unreachable!("elastic net is tuned whenever aGrace is requested"),
            },
        };
        out.push((method, tuned));
    }
    Ok((data, out))
}

/// Test error and AUC for every requested method on one replicate.
pub fn run_replicate(
    spec: &SimulationSpec,
    config: &BenchmarkConfig,
    replicate: usize,
) -> Result<Vec<(Method, Result<MethodOutcome>)>> {
    let (data, tuned) = tune_replicate(spec, config, replicate)?;
    Ok(tuned
        .into_iter()
        .map(|(method, t)| (method, t.and_then(|t| evaluate(method, replicate, &t, &data))))
        .collect())
}

fn agrace_path(
    train: &Dataset,
    g: &WeightedGraph,
    estimate: &SignEstimate,
    lambda2: f64,
    grid: &[f64],
    opts: &FitOptions,
    stop: Option<&PathStop>,
) -> Result<PathResult> {
    let l_star = signed_laplacian(g, &estimate.signs)?;
    fit_path_until(train, &l_star, PathParameter::Lambda1 { lambda2 }, grid, opts, stop)
}

/// Replicates run in parallel with seeds `seed + replicate`; failed
/// method fits are recorded and left out of the averages.
pub fn run_benchmark(spec: &SimulationSpec, config: &BenchmarkConfig) -> Result<BenchmarkRun> {
    spec.validate()?;
    if config.replicates == 0 {
        return Err(Error::InvalidArgument("need at least one replicate".into()));
    }
    if config.methods.is_empty() {
        return Err(Error::InvalidArgument("no methods requested".into()));
    }
    let per_rep: Vec<Vec<(Method, Result<MethodOutcome>)>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| match run_replicate(spec, config, r) {
            Ok(v) => v,
            Err(e) => config.methods.iter().map(|&m| (m, Err(e.clone()))).collect(),
        })
        .collect();

    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for (r, rep) in per_rep.into_iter().enumerate() {
        for (method, res) in rep {
            match res {
                Ok(o) => outcomes.push(o),
                Err(e) => failures.push(ReplicateFailure {
                    method,
                    replicate: r,
                    code: e.code().to_string(),
                    message: e.to_string(),
                }),
            }
        }
    }
    let rows = config
        .methods
        .iter()
        .map(|&method| {
            let mine: Vec<&MethodOutcome> = outcomes.iter().filter(|o| o.method == method).collect();
            let (mean_mse, se_mse) = mean_se(mine.iter().map(|o| o.test_mse));
            let (mean_auc, se_auc) = mean_se(mine.iter().map(|o| o.auc));
            BenchmarkRow {
                method,
                model: spec.model,
                correlation: spec.correlation,
                mean_mse,
                se_mse,
                mean_auc,
                se_auc,
                replicates: mine.len(),
                failures: failures.iter().filter(|f| f.method == method).count(),
            }
        })
        .collect();
    Ok(BenchmarkRun {
        spec: spec.clone(),
        config: config.clone(),
        table: BenchmarkTable { rows },
        outcomes,
        failures,
    })
}

/// Mean and standard error; NaN where undefined.
pub fn mean_se(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let k = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / k;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}
