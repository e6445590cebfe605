//! Graph-constrained regularized linear regression.

// Negated float comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod cv;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod io;
pub mod path;
pub mod simbench;
pub mod solver;

pub use data::{Dataset, Standardization};
pub use error::{Error, Result};
pub use graph::{laplacian, signed_laplacian, LaplacianKind, LaplacianMatrix, WeightedGraph};
pub use solver::{fit_grace, objective, FitOptions, FitResult, PenaltyConfig};
pub use path::{fit_path, fit_path_until, PathStop, lambda1_grid, lambda_grid, predict, prediction_mse, PathParameter, PathResult};
pub use cv::{kfold_cv, CvOptions, CvPolicy, CvResult};
pub use adaptive::{fit_agrace, initial_estimate, EnetTuning, SignEstimate};
