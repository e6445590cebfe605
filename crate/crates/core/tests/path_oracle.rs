use grace_core::path::{fit_path, lambda1_grid, lambda_grid, predict, PathParameter};
use grace_core::{fit_grace, laplacian, Dataset, FitOptions, WeightedGraph};
use grace_oracle::kkt_enumeration;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn raw_dataset(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Dataset {
    let x = DMatrix::from_fn(n, p, |_, j| 2.0 * j as f64 + rng.sample::<f64, _>(StandardNormal));
    let y = DVector::from_fn(n, |i, _| {
        (0..p).map(|j| x[(i, j)] * (1.0 - j as f64 / 2.0)).sum::<f64>() + rng.sample::<f64, _>(StandardNormal)
    });
    Dataset::new(x, y).unwrap()
}

fn chain(p: usize) -> WeightedGraph {
    let edges: Vec<(usize, usize, f64)> = (0..p - 1).map(|u| (u, u + 1, 1.0)).collect();
    WeightedGraph::new(p, &edges).unwrap()
}

#[test]
fn warm_path_agrees_with_cold_refits() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let ds = raw_dataset(&mut rng, 60, 12).standardize().unwrap();
    let l = laplacian(&chain(12));
    let opts = FitOptions::default();
    for parameter in [PathParameter::Lambda1 { lambda2: 7.0 }, PathParameter::Lambda { alpha: 0.3 }] {
        let grid = match parameter {
            PathParameter::Lambda1 { .. } => lambda1_grid(&ds, 0.001, 100).unwrap(),
            PathParameter::Lambda { alpha } => lambda_grid(&ds, alpha, 0.001, 100).unwrap(),
        };
        let path = fit_path(&ds, &l, parameter, &grid, &opts).unwrap();
        assert!(path.fits[0].beta.iter().all(|&b| b == 0.0));
        for _ in 0..5 {
            let k = rng.random_range(0..grid.len());
            let cfg = parameter.penalty(grid[k], ds.n()).unwrap();
            let cold = fit_grace(&ds, &l, &cfg, None, &opts).unwrap();
            for (a, b) in cold.beta.iter().zip(&path.fits[k].beta) {
                assert!((a - b).abs() < 1e-5, "grid point {k}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn lasso_path_matches_enumeration_pointwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let ds = raw_dataset(&mut rng, 40, 4).standardize().unwrap();
    let l = laplacian(&chain(4));
    let grid = lambda1_grid(&ds, 0.001, 60).unwrap();
    let path = fit_path(&ds, &l, PathParameter::Lambda1 { lambda2: 0.0 }, &grid, &FitOptions::default()).unwrap();
    let zero = DMatrix::zeros(4, 4);
    for (k, fit) in path.fits.iter().enumerate() {
        let want = kkt_enumeration(ds.x(), ds.y(), &zero, grid[k], 0.0);
        for (a, b) in fit.beta.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-5, "grid point {k}: {a} vs {b}");
        }
    }
}

#[test]
fn training_predictions_equal_fitted_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let raw = raw_dataset(&mut rng, 30, 5);
    let ds = raw.standardize().unwrap();
    let grid = lambda1_grid(&ds, 0.01, 10).unwrap();
    let path = fit_path(&ds, &laplacian(&chain(5)), PathParameter::Lambda1 { lambda2: 2.0 }, &grid, &FitOptions::default())
        .unwrap();
    let fit = path.fits.last().unwrap();
    let yhat = predict(fit, raw.x()).unwrap();
    let fitted = ds.x() * DVector::from_column_slice(&fit.beta);
    // the response is centered but not scaled
    let y_mean = raw.y().mean();
    for i in 0..30 {
        assert!((yhat[i] - (y_mean + fitted[i])).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grids_are_geometric_and_decreasing(
        seed in 0u64..10_000,
        alpha in 0.01f64..=1.0,
        eps in 1e-4f64..0.5,
        count in 2usize..120,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ds = raw_dataset(&mut rng, 20, 3).standardize().unwrap();
        let grid = lambda_grid(&ds, alpha, eps, count).unwrap();
        prop_assert_eq!(grid.len(), count);
        prop_assert!(grid.windows(2).all(|w| w[1] < w[0]));
        let ratio = grid[1] / grid[0];
        for w in grid.windows(2) {
            prop_assert!((w[1] / w[0] - ratio).abs() < 1e-9);
        }
        prop_assert!((grid[count - 1] / grid[0] - eps).abs() < 1e-9 * eps.max(1.0));
        let top = (0..3)
            .map(|j| ds.x().column(j).dot(ds.y()).abs())
            .fold(0.0, f64::max) / (ds.n() as f64 * alpha);
        prop_assert!((grid[0] - top).abs() < 1e-9 * top);
    }
}
