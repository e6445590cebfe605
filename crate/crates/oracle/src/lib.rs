//! Brute-force reference computations for tests.
//!
//! Nothing here depends on `grace-core`; every routine works from dense
//! matrices and textbook formulas so it can check the solver independently.

use nalgebra::{DMatrix, DVector};

/// `||y - X b||^2 + lambda1 ||b||_1 + lambda2 b^T L b`.
pub fn q_objective(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    l: &DMatrix<f64>,
    beta: &DVector<f64>,
    lambda1: f64,
    lambda2: f64,
) -> f64 {
    let r = y - x * beta;
    r.norm_squared() + lambda1 * beta.lp_norm(1) + lambda2 * (beta.transpose() * l * beta)[(0, 0)]
}

/// Exact minimizer of `q_objective` for small `p`.
///
/// Enumerates all `3^p` sign patterns. For each pattern the objective is a
/// smooth quadratic on the matching orthant face; its stationary point
/// solves `(X_A^T X_A + lambda2 L_AA) b_A = X_A^T y - lambda1 s_A / 2`.
/// Sign-consistent stationary points are kept and the one with the smallest
/// objective is returned.
pub fn kkt_enumeration(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    l: &DMatrix<f64>,
    lambda1: f64,
    lambda2: f64,
) -> DVector<f64> {
    let p = x.ncols();
    assert!(p <= 12, "enumeration is exponential in p");
    let mut best = DVector::zeros(p);
    let mut best_q = q_objective(x, y, l, &best, lambda1, lambda2);
    let patterns = 3usize.pow(p as u32);
    for code in 0..patterns {
        let mut c = code;
        let signs: Vec<f64> = (0..p)
            .map(|_| {
                let s = (c % 3) as f64 - 1.0;
                c /= 3;
                s
            })
            .collect();
        let active: Vec<usize> = (0..p).filter(|&j| signs[j] != 0.0).collect();
        if active.is_empty() {
            continue;
        }
        let xa = x.select_columns(&active);
        let la = l.select_rows(&active).select_columns(&active);
        let m = xa.transpose() * &xa + la * lambda2;
        let rhs = xa.transpose() * y
            - DVector::from_iterator(active.len(), active.iter().map(|&j| lambda1 * signs[j] / 2.0));
        let Some(sol) = m.lu().solve(&rhs) else {
            continue;
        };
        if active.iter().zip(sol.iter()).any(|(&j, &b)| signs[j] * b < 0.0) {
            continue;
        }
        let mut beta = DVector::zeros(p);
        for (&j, &b) in active.iter().zip(sol.iter()) {
            beta[j] = b;
        }
        let q = q_objective(x, y, l, &beta, lambda1, lambda2);
        if q < best_q {
            best_q = q;
            best = beta;
        }
    }
    best
}

/// Ordinary least squares through the normal equations `X^T X b = X^T y`.
pub fn normal_equations(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    (x.transpose() * x)
        .cholesky()
        .expect("X^T X must be positive definite")
        .solve(&(x.transpose() * y))
}

/// Area under a step-free ROC polyline computed by summing trapezoids over
/// `(fpr, tpr)` points already sorted by `fpr`.
pub fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_lasso_is_soft_thresholding() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0]);
        let y = DVector::from_column_slice(&[3.0, 1.0, -1.0, -3.0]);
        let l = DMatrix::zeros(2, 2);
        // X^T y = (8, 4), X^T X = 4 I: b_j = S(x_j^T y, lambda1/2) / 4
        let b = kkt_enumeration(&x, &y, &l, 10.0, 0.0);
        assert!((b[0] - 0.75).abs() < 1e-12);
        assert_eq!(b[1], 0.0);
    }

    #[test]
    fn zero_penalty_matches_normal_equations() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.5, 2.0, -1.0, -1.0, 0.3, 0.0, 2.0]);
        let y = DVector::from_column_slice(&[1.0, 2.0, -0.5, 0.7]);
        let l = DMatrix::identity(2, 2);
        let a = kkt_enumeration(&x, &y, &l, 0.0, 0.0);
        let b = normal_equations(&x, &y);
        assert!((a - b).amax() < 1e-12);
    }
}
