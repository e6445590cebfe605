//! Command-line driver: argument parsing, file ingestion and artifact output.
//!
//! Every flag can also be set through an environment variable named
//! `GRACE_` followed by the flag in upper snake case, e.g. `GRACE_LAMBDA2_GRID`.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use nalgebra::DMatrix;
use serde::Serialize;

use grace_core::adaptive::{fit_agrace, initial_estimate, EnetTuning, SignEstimate};
use grace_core::cv::{kfold_cv, CvOptions, CvPolicy, CvResult, DEFAULT_LAMBDA2_GRID};
use grace_core::diagnostics::{exact_covariance_design, theory_report, FixedDesign, TheoryReport};
use grace_core::io::{
    parse_design, read_dataset, read_edge_list, svg_line_plot, write_benchmark, write_coefficients, write_cv,
    write_design, write_edge_list, write_file, write_json, write_path, write_response, write_roc, Series,
};
use grace_core::simbench::{
    build_module_graph, run_benchmark, simulate_dataset, tune_replicate, BenchmarkConfig, BenchmarkRun, Method,
    Model, SimulationSpec,
};
use grace_core::{
    fit_grace, fit_path, lambda1_grid, lambda_grid, laplacian, signed_laplacian, Dataset, Error, FitOptions,
    FitResult, LaplacianMatrix, PathParameter, PathResult, PathStop, PenaltyConfig, Result, WeightedGraph,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Fit at a single penalty pair.
    Fit,
    /// Fit a warm-started regularization path.
    Path,
    /// K-fold cross-validation over the penalty grid.
    Cv,
    /// Write a simulated train/valid/test split with its graph and truth.
    Simulate,
    /// Compare methods over simulated replicates.
    Bench,
    /// ROC curves of every method on one simulated replicate.
    Roc,
    /// Theory quantities and Monte Carlo checks on a fixed design.
    Diagnose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Grace,
    Agrace,
    Enet,
    Lasso,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Grace => Method::Grace,
            MethodArg::Agrace => Method::AGrace,
            MethodArg::Enet => Method::Enet,
            MethodArg::Lasso => Method::Lasso,
        }
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "grace", version, about = "Graph-constrained regularized linear regression")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Design CSV: header row of covariate names, one numeric row per sample.
    #[arg(long, global = true, env = "GRACE_DESIGN")]
    pub design: Option<PathBuf>,
    /// Response CSV: a single column, header optional.
    #[arg(long, global = true, env = "GRACE_RESPONSE")]
    pub response: Option<PathBuf>,
    /// Edge list, one `u<TAB>v[<TAB>weight]` per line with 0-based vertices.
    #[arg(long, global = true, env = "GRACE_GRAPH")]
    pub graph: Option<PathBuf>,

    #[arg(long, global = true, env = "GRACE_LAMBDA1")]
    pub lambda1: Option<f64>,
    #[arg(long, global = true, env = "GRACE_LAMBDA2")]
    pub lambda2: Option<f64>,
    #[arg(long, global = true, env = "GRACE_LAMBDA")]
    pub lambda: Option<f64>,
    #[arg(long, global = true, env = "GRACE_ALPHA")]
    pub alpha: Option<f64>,
    /// Smoothness weights to search; defaults to 0.1,1,10,100,1000.
    #[arg(long, global = true, value_delimiter = ',', env = "GRACE_LAMBDA2_GRID")]
    pub lambda2_grid: Vec<f64>,
    /// Mixing weights to search in `cv` instead of a `lambda2` grid.
    #[arg(long, global = true, value_delimiter = ',', env = "GRACE_ALPHA_GRID")]
    pub alpha_grid: Vec<f64>,
    #[arg(long, global = true, default_value_t = 5, env = "GRACE_FOLDS")]
    pub folds: usize,
    #[arg(long, global = true, default_value_t = 0.001, env = "GRACE_EPS")]
    pub eps: f64,
    #[arg(long, global = true, default_value_t = 100, env = "GRACE_NLAMBDA")]
    pub nlambda: usize,
    /// Use the sign-adjusted Laplacian built from a preliminary estimate.
    #[arg(long, global = true, env = "GRACE_ADAPTIVE")]
    pub adaptive: bool,

    #[arg(long, global = true, default_value_t = 1, env = "GRACE_MODEL")]
    pub model: u8,
    #[arg(long, global = true, default_value_t = 0.5, allow_negative_numbers = true, env = "GRACE_COR")]
    pub cor: f64,
    #[arg(long, global = true, default_value_t = 200, env = "GRACE_MODULES")]
    pub modules: usize,
    #[arg(long, global = true, default_value_t = 20, env = "GRACE_REPS")]
    pub reps: usize,
    #[arg(long, global = true, value_enum, value_delimiter = ',', env = "GRACE_METHODS")]
    pub methods: Vec<MethodArg>,
    /// Simulate without noise.
    #[arg(long, global = true, env = "GRACE_NOISELESS")]
    pub noiseless: bool,
    /// Fit every benchmark path to the end of its grid.
    #[arg(long, global = true, env = "GRACE_FULL_PATH")]
    pub full_path: bool,

    /// True coefficients for `diagnose`.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true, env = "GRACE_BETA")]
    pub beta: Vec<f64>,
    /// Noise standard deviation for `diagnose`.
    #[arg(long, global = true, env = "GRACE_SIGMA")]
    pub sigma: Option<f64>,
    /// Sample size of the built-in `diagnose` design.
    #[arg(long, global = true, default_value_t = 400, env = "GRACE_SAMPLES")]
    pub samples: usize,

    #[arg(long, global = true, default_value_t = 1, env = "GRACE_SEED")]
    pub seed: u64,
    #[arg(long, global = true, default_value = "grace-out", env = "GRACE_OUT")]
    pub out: PathBuf,
    /// Worker threads for fold and replicate parallelism; default all cores.
    #[arg(long, global = true, env = "GRACE_THREADS")]
    pub threads: Option<usize>,
    /// Standardize once on the full data before splitting folds.
    #[arg(long, global = true, env = "GRACE_PAPER_STANDARDIZE")]
    pub paper_standardize: bool,
    /// Also emit an SVG plot where the command supports one.
    #[arg(long, global = true, env = "GRACE_SVG")]
    pub svg: bool,
}

impl RunConfig {
    /// `(lambda1, lambda2)` or `(lambda, alpha)`, never a mix.
    pub fn penalty(&self, n: usize) -> Result<PenaltyConfig> {
        match (self.lambda1, self.lambda2, self.lambda, self.alpha) {
            (l1, l2, None, None) if l1.is_some() || l2.is_some() => {
                PenaltyConfig::new(l1.unwrap_or(0.0), l2.unwrap_or(0.0))
            }
            (None, None, Some(lambda), Some(alpha)) => PenaltyConfig::from_lambda_alpha(lambda, alpha, n),
            _ => Err(Error::InvalidArgument(
                "give --lambda1/--lambda2 or both --lambda and --alpha".into(),
            )),
        }
    }

    fn lambda2s(&self) -> Vec<f64> {
        if self.lambda2_grid.is_empty() {
            DEFAULT_LAMBDA2_GRID.to_vec()
        } else {
            self.lambda2_grid.clone()
        }
    }

    fn cv_policy(&self) -> CvPolicy {
        if self.alpha_grid.is_empty() {
            CvPolicy::Lambda2Grid {
                lambda2s: self.lambda2s(),
            }
        } else {
            CvPolicy::AlphaGrid {
                alphas: self.alpha_grid.clone(),
            }
        }
    }

    fn cv_options(&self) -> CvOptions {
        CvOptions {
            folds: self.folds,
            seed: self.seed,
            eps: self.eps,
            nlambda: self.nlambda,
            global_standardize: self.paper_standardize,
            fit: FitOptions::default(),
        }
    }

    fn enet_tuning(&self) -> EnetTuning {
        EnetTuning::Cv {
            options: self.cv_options(),
            policy: CvPolicy::Lambda2Grid {
                lambda2s: self.lambda2s(),
            },
        }
    }

    fn spec(&self) -> Result<SimulationSpec> {
        let mut spec = SimulationSpec::standard(Model::from_number(self.model)?, self.cor).with_modules(self.modules);
        spec.noiseless = self.noiseless;
        spec.validate()?;
        Ok(spec)
    }

    fn bench_config(&self) -> BenchmarkConfig {
        let methods = if self.methods.is_empty() {
            Method::ALL.to_vec()
        } else {
            self.methods.iter().map(|&m| m.into()).collect()
        };
        BenchmarkConfig {
            methods,
            replicates: self.reps,
            seed: self.seed,
            lambda2s: self.lambda2s(),
            eps: self.eps,
            nlambda: self.nlambda,
            stop: (!self.full_path).then(PathStop::default),
            fit: FitOptions::default(),
        }
    }

    fn required<'a>(&self, path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        path.as_deref()
            .ok_or_else(|| Error::InvalidArgument(format!("--{flag} is required for this command")))
    }

    fn raw_dataset(&self) -> Result<Dataset> {
        read_dataset(self.required(&self.design, "design")?, self.required(&self.response, "response")?)
    }

    /// The supplied graph, or `p` isolated vertices.
    fn graph(&self, p: usize) -> Result<WeightedGraph> {
        match &self.graph {
            Some(path) => read_edge_list(path, p),
            None => Ok(WeightedGraph::empty(p)),
        }
    }

    /// Standard Laplacian, or the sign-adjusted one under `--adaptive`.
    fn penalty_matrix(&self, ds: &Dataset, g: &WeightedGraph) -> Result<(LaplacianMatrix, Option<SignEstimate>)> {
        if self.adaptive {
            let estimate = initial_estimate(ds, &self.enet_tuning(), &FitOptions::default())?;
            Ok((signed_laplacian(g, &estimate.signs)?, Some(estimate)))
        } else {
            Ok((laplacian(g), None))
        }
    }
}

/// Runs one command and returns the files it wrote.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(|| dispatch(cfg)),
        None => dispatch(cfg),
    }
}

fn dispatch(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut out = Output::new(&cfg.out);
    match cfg.command {
        Command::Fit => fit(cfg, &mut out)?,
        Command::Path => path(cfg, &mut out)?,
        Command::Cv => cv(cfg, &mut out)?,
        Command::Simulate => simulate(cfg, &mut out)?,
        Command::Bench => bench(cfg, &mut out)?,
        Command::Roc => roc(cfg, &mut out)?,
        Command::Diagnose => diagnose(cfg, &mut out)?,
    }
    Ok(out.written)
}

struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        }
    }

    fn file(&mut self, name: &str, f: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        write_file(&path, f)?;
        info!("wrote {}", path.display());
        self.written.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        self.file(name, |w| write_json(w, value))
    }

    fn svg(&mut self, name: &str, doc: String) -> Result<()> {
        self.file(name, |w| {
            use std::io::Write;
            w.write_all(doc.as_bytes())?;
            Ok(())
        })
    }
}

#[derive(Serialize)]
struct FitReport<'a> {
    names: Option<&'a [String]>,
    fit: &'a FitResult,
    sign_estimate: Option<&'a SignEstimate>,
}

fn fit(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let ds = cfg.raw_dataset()?.standardize()?;
    let g = cfg.graph(ds.p())?;
    let penalty = cfg.penalty(ds.n())?;
    let opts = FitOptions::default();
    let (fit, estimate) = if cfg.adaptive {
        let (fit, estimate) = fit_agrace(&ds, &g, &penalty, &cfg.enet_tuning(), &opts)?;
        (fit, Some(estimate))
    } else {
        (fit_grace(&ds, &laplacian(&g), &penalty, None, &opts)?, None)
    };
    out.json(
        "fit.json",
        &FitReport {
            names: ds.names(),
            fit: &fit,
            sign_estimate: estimate.as_ref(),
        },
    )?;
    out.file("coefficients.csv", |w| write_coefficients(w, &fit, ds.names()))
}

fn path(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let ds = cfg.raw_dataset()?.standardize()?;
    let g = cfg.graph(ds.p())?;
    let (l, estimate) = cfg.penalty_matrix(&ds, &g)?;
    let (parameter, grid) = match (cfg.alpha, cfg.lambda1, cfg.lambda) {
        (_, Some(_), _) | (_, _, Some(_)) => {
            return Err(Error::InvalidArgument("path takes --lambda2 or --alpha, not a single lambda".into()))
        }
        (Some(_), _, _) if cfg.lambda2.is_some() => {
            return Err(Error::InvalidArgument("give --lambda2 or --alpha, not both".into()))
        }
        (Some(alpha), _, _) => (PathParameter::Lambda { alpha }, lambda_grid(&ds, alpha, cfg.eps, cfg.nlambda)?),
        (None, _, _) => (
            PathParameter::Lambda1 {
                lambda2: cfg.lambda2.unwrap_or(0.0),
            },
            lambda1_grid(&ds, cfg.eps, cfg.nlambda)?,
        ),
    };
    let result = fit_path(&ds, &l, parameter, &grid, &FitOptions::default())?;
    out.file("path.csv", |w| write_path(w, &result, ds.names()))?;
    if let Some(estimate) = &estimate {
        out.json("signs.json", estimate)?;
    }
    if cfg.svg {
        out.svg("path.svg", path_plot(&result, ds.names()))?;
    }
    Ok(())
}

const MAX_TRACES: usize = 30;

fn path_plot(result: &PathResult, names: Option<&[String]>) -> String {
    let p = result.fits.first().map_or(0, |f| f.beta.len());
    let series: Vec<Series> = (0..p)
        .filter(|&j| result.fits.iter().any(|f| f.beta[j] != 0.0))
        .take(MAX_TRACES)
        .map(|j| Series {
            label: names.map_or_else(|| format!("x{j}"), |n| n[j].clone()),
            points: result
                .lambdas
                .iter()
                .zip(&result.fits)
                .map(|(&l, f)| (l.log10(), f.beta[j]))
                .collect(),
        })
        .collect();
    svg_line_plot("Coefficient paths", "log10 lambda", "standardized coefficient", &series)
}

fn cv(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let raw = cfg.raw_dataset()?;
    let g = cfg.graph(raw.p())?;
    let (l, estimate) = if cfg.adaptive {
        cfg.penalty_matrix(&raw.standardize()?, &g)?
    } else {
        (laplacian(&g), None)
    };
    let result = kfold_cv(&raw, &l, &cfg.cv_policy(), &cfg.cv_options())?;
    out.file("cv.csv", |w| write_cv(w, &result))?;
    out.json("cv.json", &result)?;
    if let Some(estimate) = &estimate {
        out.json("signs.json", estimate)?;
    }
    if cfg.svg {
        out.svg("cv.svg", cv_plot(&result))?;
    }
    Ok(())
}

fn cv_plot(result: &CvResult) -> String {
    let mut series: Vec<Series> = Vec::new();
    let by_alpha = matches!(result.policy, CvPolicy::AlphaGrid { .. });
    for pt in &result.points {
        let (key, x) = if by_alpha {
            (format!("alpha={}", pt.alpha.unwrap_or(f64::NAN)), pt.lambda.unwrap_or(f64::NAN))
        } else {
            (format!("lambda2={}", pt.lambda2), pt.lambda1)
        };
        match series.iter_mut().find(|s| s.label == key) {
            Some(s) => s.points.push((x.log10(), pt.mean_error)),
            None => series.push(Series {
                label: key,
                points: vec![(x.log10(), pt.mean_error)],
            }),
        }
    }
    svg_line_plot("Cross-validation error", "log10 lambda", "mean held-out MSE", &series)
}

#[derive(Serialize)]
struct Truth<'a> {
    spec: &'a SimulationSpec,
    seed: u64,
    beta: &'a [f64],
    support: &'a [usize],
    sigma: f64,
}

fn simulate(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let spec = cfg.spec()?;
    let data = simulate_dataset(&spec, cfg.seed)?;
    for (split, ds) in [("train", &data.train), ("valid", &data.valid), ("test", &data.test)] {
        out.file(&format!("{split}_design.csv"), |w| write_design(w, ds.x(), ds.names()))?;
        out.file(&format!("{split}_response.csv"), |w| write_response(w, ds.y()))?;
    }
    let g = build_module_graph(&spec)?;
    out.file("graph.tsv", |w| write_edge_list(w, &g))?;
    out.json(
        "truth.json",
        &Truth {
            spec: &spec,
            seed: cfg.seed,
            beta: &data.truth.beta,
            support: &data.truth.support,
            sigma: data.truth.sigma,
        },
    )
}

fn bench(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let spec = cfg.spec()?;
    let run = run_benchmark(&spec, &cfg.bench_config())?;
    out.file("benchmark.csv", |w| write_benchmark(w, &run.table))?;
    out.json("benchmark.json", &run)?;
    if cfg.svg {
        out.svg("benchmark.svg", bench_plot(&run))?;
    }
    Ok(())
}

fn bench_plot(run: &BenchmarkRun) -> String {
    let series: Vec<Series> = run
        .config
        .methods
        .iter()
        .map(|&m| Series {
            label: m.name().to_string(),
            points: run
                .outcomes
                .iter()
                .filter(|o| o.method == m)
                .map(|o| (o.replicate as f64, o.test_mse))
                .collect(),
        })
        .collect();
    svg_line_plot("Test MSE by replicate", "replicate", "test MSE", &series)
}

#[derive(Serialize)]
struct RocSummary {
    method: Method,
    auc: f64,
    lambda2: f64,
    points: usize,
}

fn roc(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let spec = cfg.spec()?;
    let (data, tuned) = tune_replicate(&spec, &cfg.bench_config(), 0)?;
    let mut summary = Vec::new();
    let mut series = Vec::new();
    for (method, t) in tuned {
        let t = t?;
        let curve = grace_core::simbench::roc_curve(&t.path, &data.truth.support)?;
        out.file(&format!("roc_{}.csv", method.name().to_lowercase()), |w| write_roc(w, &curve))?;
        summary.push(RocSummary {
            method,
            auc: curve.auc,
            lambda2: t.lambda2,
            points: curve.points.len(),
        });
        series.push(Series {
            label: format!("{} (AUC {:.3})", method.name(), curve.auc),
            points: curve.points.iter().map(|pt| (pt.fpr, pt.tpr)).collect(),
        });
    }
    out.json("roc.json", &summary)?;
    if cfg.svg {
        out.svg("roc.svg", svg_line_plot("ROC", "false positive rate", "true positive rate", &series))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Diagnosis {
    design: String,
    beta: Vec<f64>,
    sigma: f64,
    #[serde(flatten)]
    report: TheoryReport,
}

/// Covariance of the built-in design: two independent relevant covariates
/// and an irrelevant one correlated `r` with each.
fn toy_covariance(r: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[1.0, 0.0, r, 0.0, 1.0, r, r, r, 1.0])
}

fn diagnose(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let (x, source) = match &cfg.design {
        Some(path) => {
            let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let (x, _) = parse_design(std::io::BufReader::new(file))?;
            (x, path.display().to_string())
        }
        None => (
            exact_covariance_design(&toy_covariance(cfg.cor), cfg.samples, cfg.seed)?,
            format!("built-in, cor = {}", cfg.cor),
        ),
    };
    let p = x.ncols();
    let beta = match (&cfg.design, cfg.beta.is_empty()) {
        (_, false) => cfg.beta.clone(),
        (None, true) => vec![1.0, 1.0, 0.0],
        (Some(_), true) => return Err(Error::InvalidArgument("--beta is required with --design".into())),
    };
    let sigma = cfg.sigma.unwrap_or(1.0);
    let g = cfg.graph(p)?;
    let design = FixedDesign::standardizing(x, beta.clone(), sigma, laplacian(&g))?;
    let n = design.n() as f64;
    let penalty = match (cfg.lambda1, cfg.lambda, cfg.alpha) {
        (None, None, None) => PenaltyConfig::new(n.sqrt() * n.ln(), cfg.lambda2.unwrap_or(0.0))?,
        _ => cfg.penalty(design.n())?,
    };
    let report = theory_report(&design, penalty, cfg.reps, cfg.seed)?;
    out.json(
        "theory.json",
        &Diagnosis {
            design: source,
            beta,
            sigma,
            report,
        },
    )
}
