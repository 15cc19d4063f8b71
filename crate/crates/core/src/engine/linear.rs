use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::ops::gemm;

/// `y ≈ w·x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

fn flatten(features: &[Vec<f64>], targets: &[f64]) -> Result<(Vec<f64>, usize, usize)> {
    let n = features.len();
    if n == 0 || n != targets.len() {
        return Err(Error::InvalidArgument(format!(
            "{} feature rows for {} targets",
            n,
            targets.len()
        )));
    }
    let d = features[0].len();
    if d == 0 || features.iter().any(|f| f.len() != d) {
        return Err(Error::InvalidArgument("feature rows must share a positive length".into()));
    }
    let x: Vec<f64> = features.concat();
    if x.iter().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("features or targets".into()));
    }
    Ok((x, n, d))
}

/// In-place lower Cholesky factor of a symmetric positive definite `d x d` matrix.
fn cholesky(a: &mut [f64], d: usize) -> Result<()> {
    for j in 0..d {
        let mut s = a[j * d + j];
        for k in 0..j {
            s -= a[j * d + k] * a[j * d + k];
        }
        if s <= 0.0 || !s.is_finite() {
            return Err(Error::NonFinite(format!("normal equations are not positive definite at column {j}")));
        }
        let l = s.sqrt();
        a[j * d + j] = l;
        for i in j + 1..d {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= a[i * d + k] * a[j * d + k];
            }
            a[i * d + j] = s / l;
        }
    }
    Ok(())
}

fn cholesky_solve(l: &[f64], d: usize, b: &[f64]) -> Vec<f64> {
    let mut z = b.to_vec();
    for i in 0..d {
        let s: f64 = (0..i).map(|k| l[i * d + k] * z[k]).sum();
        z[i] = (z[i] - s) / l[i * d + i];
    }
    for i in (0..d).rev() {
        let s: f64 = (i + 1..d).map(|k| l[k * d + i] * z[k]).sum();
        z[i] = (z[i] - s) / l[i * d + i];
    }
    z
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Minimises `|Xw - y|^2 + reg |w|^2` (no intercept) through the normal
/// equations, refined until the relative residual is below `1e-8`.
pub fn fit_linear_head(features: &[Vec<f64>], targets: &[f64], reg: f64) -> Result<Vec<f64>> {
    if !(reg > 0.0 && reg.is_finite()) {
        return Err(Error::InvalidArgument(format!("reg_strength must be > 0, got {reg}")));
    }
    let (x, n, d) = flatten(features, targets)?;
    let mut a = vec![0.0; d * d];
    gemm(d, n, d, &x, true, &x, false, 0.0, &mut a);
    for i in 0..d {
        a[i * d + i] += reg;
    }
    let mut b = vec![0.0; d];
    gemm(d, n, 1, &x, true, targets, false, 0.0, &mut b);
    let mut l = a.clone();
    cholesky(&mut l, d)?;
    let mut w = cholesky_solve(&l, d, &b);
    let scale = norm(&b).max(f64::MIN_POSITIVE);
    for _ in 0..10 {
        let mut r = b.clone();
        let mut aw = vec![0.0; d];
        gemm(d, d, 1, &a, false, &w, false, 0.0, &mut aw);
        for (ri, awi) in r.iter_mut().zip(&aw) {
            *ri -= awi;
        }
        if norm(&r) / scale < 1e-8 {
            break;
        }
        let delta = cholesky_solve(&l, d, &r);
        for (wi, di) in w.iter_mut().zip(&delta) {
            *wi += di;
        }
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ridge solution".into()));
    }
    Ok(w)
}

fn centered(features: &[Vec<f64>], targets: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>, f64) {
    let n = features.len() as f64;
    let d = features.first().map_or(0, Vec::len);
    let mut mean_x = vec![0.0; d];
    for f in features {
        for (m, v) in mean_x.iter_mut().zip(f) {
            *m += v / n;
        }
    }
    let mean_y = targets.iter().sum::<f64>() / n;
    let xc = features
        .iter()
        .map(|f| f.iter().zip(&mean_x).map(|(v, m)| v - m).collect())
        .collect();
    let yc = targets.iter().map(|y| y - mean_y).collect();
    (xc, yc, mean_x, mean_y)
}

impl LinearModel {
    /// Ridge regression with an unpenalised intercept (fit on centred data).
    pub fn fit_ridge(features: &[Vec<f64>], targets: &[f64], reg: f64) -> Result<Self> {
        flatten(features, targets)?;
        let (xc, yc, mean_x, mean_y) = centered(features, targets);
        let weights = fit_linear_head(&xc, &yc, reg)?;
        let bias = mean_y - weights.iter().zip(&mean_x).map(|(w, m)| w * m).sum::<f64>();
        Ok(LinearModel { weights, bias })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

/// Linear support vector regression with the epsilon-insensitive L1 loss,
/// `0.5 |w|^2 + c * sum max(|w·x + b - y| - eps, 0)`, solved by dual
/// coordinate descent on centred data.
pub fn fit_eps_insensitive(features: &[Vec<f64>], targets: &[f64], eps: f64, c: f64) -> Result<LinearModel> {
    if !(eps >= 0.0 && eps.is_finite() && c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("need eps >= 0 and c > 0, got {eps} and {c}")));
    }
    flatten(features, targets)?;
    let (xc, yc, mean_x, mean_y) = centered(features, targets);
    let n = xc.len();
    let d = mean_x.len();
    let q: Vec<f64> = xc.iter().map(|x| x.iter().map(|v| v * v).sum()).collect();
    let mut beta = vec![0.0; n];
    let mut w = vec![0.0; d];
    let tol = 1e-9 * (1.0 + yc.iter().fold(0.0f64, |m, y| m.max(y.abs())));
    for _ in 0..20_000 {
        let mut max_step = 0.0f64;
        for i in 0..n {
            if q[i] == 0.0 {
                continue;
            }
            let g = xc[i].iter().zip(&w).map(|(x, wi)| x * wi).sum::<f64>() - yc[i];
            let (gp, gn) = (g + eps, g - eps);
            let qb = q[i] * beta[i];
            let step = if gp < qb {
                -gp / q[i]
            } else if gn > qb {
                -gn / q[i]
            } else {
                -beta[i]
            };
            let new = (beta[i] + step).clamp(-c, c);
            let delta = new - beta[i];
            if delta != 0.0 {
                beta[i] = new;
                for (wi, x) in w.iter_mut().zip(&xc[i]) {
                    *wi += delta * x;
                }
                max_step = max_step.max(delta.abs() * q[i].sqrt());
            }
        }
        if max_step < tol {
            break;
        }
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("svr solution".into()));
    }
    let bias = mean_y - w.iter().zip(&mean_x).map(|(wi, m)| wi * m).sum::<f64>();
    Ok(LinearModel { weights: w, bias })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_design_gives_xt_y() {
        // Rows of the 3x3 identity: X orthonormal, so w = X^T y as reg -> 0.
        let x = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let y = [2.0, -1.0, 0.5];
        let w = fit_linear_head(&x, &y, 1e-12).unwrap();
        for (a, b) in w.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn heavy_regularisation_shrinks_to_zero() {
        let x = vec![vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 0.5]];
        let w = fit_linear_head(&x, &[1.0, 2.0, 3.0], 1e12).unwrap();
        assert!(w.iter().all(|v| v.abs() < 1e-10));
        assert!(fit_linear_head(&x, &[1.0, 2.0, 3.0], 0.0).is_err());
    }

    #[test]
    fn ridge_intercept_recovers_an_affine_map() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * i % 7) as f64]).collect();
        let y: Vec<f64> = x.iter().map(|f| 3.0 + 2.0 * f[0] - f[1]).collect();
        let m = LinearModel::fit_ridge(&x, &y, 1e-10).unwrap();
        assert!((m.bias - 3.0).abs() < 1e-6);
        assert!((m.weights[0] - 2.0).abs() < 1e-6 && (m.weights[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn svr_fits_inside_the_tube() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 10.0]).collect();
        let y: Vec<f64> = x.iter().map(|f| 1.0 + 4.0 * f[0]).collect();
        let m = fit_eps_insensitive(&x, &y, 0.1, 100.0).unwrap();
        for (f, t) in x.iter().zip(&y) {
            assert!((m.predict(f) - t).abs() <= 0.1 + 1e-6);
        }
    }
}
