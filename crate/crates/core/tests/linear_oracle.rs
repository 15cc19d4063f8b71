//! Ridge regression against an SVD least-squares oracle.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sosnet::engine::{fit_linear_head, LinearModel};

fn oracle_ridge(x: &[Vec<f64>], y: &[f64], reg: f64) -> Vec<f64> {
    // Stack [X; sqrt(reg) I] and solve the augmented least-squares problem by SVD.
    let (n, d) = (x.len(), x[0].len());
    let mut a = DMatrix::zeros(n + d, d);
    let mut b = DVector::zeros(n + d);
    for i in 0..n {
        for j in 0..d {
            a[(i, j)] = x[i][j];
        }
        b[i] = y[i];
    }
    for j in 0..d {
        a[(n + j, j)] = reg.sqrt();
    }
    let svd = a.svd(true, true);
    svd.solve(&b, 1e-14).unwrap().iter().copied().collect()
}

fn random_problem(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let y = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    (x, y)
}

#[test]
fn ridge_matches_svd_oracle() {
    for seed in 0..8 {
        let (x, y) = random_problem(seed, 60, 12);
        for reg in [1e-6, 1e-2, 1.0] {
            let w = fit_linear_head(&x, &y, reg).unwrap();
            let o = oracle_ridge(&x, &y, reg);
            for (a, b) in w.iter().zip(&o) {
                assert!((a - b).abs() < 1e-6, "seed {seed} reg {reg}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn wide_design_is_handled_by_regularisation() {
    let (x, y) = random_problem(11, 20, 64);
    let w = fit_linear_head(&x, &y, 1e-3).unwrap();
    let o = oracle_ridge(&x, &y, 1e-3);
    assert!(w.iter().zip(&o).all(|(a, b)| (a - b).abs() < 1e-6));
}

#[test]
fn intercept_model_recovers_an_affine_map() {
    let (x, _) = random_problem(5, 80, 6);
    let truth = [0.5, -1.0, 2.0, 0.0, 0.25, -0.75];
    let y: Vec<f64> = x.iter().map(|r| 3.0 + r.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>()).collect();
    let m = LinearModel::fit_ridge(&x, &y, 1e-10).unwrap();
    assert!((m.bias - 3.0).abs() < 1e-6);
    assert!(m.weights.iter().zip(&truth).all(|(a, b)| (a - b).abs() < 1e-6));
}

#[test]
fn non_finite_features_are_rejected() {
    let (mut x, y) = random_problem(1, 10, 3);
    x[4][1] = f64::NAN;
    assert!(fit_linear_head(&x, &y, 1.0).is_err());
}
