use nalgebra::{DMatrix, DVector};

use super::{check_problem, finish, soft_threshold, CoefficientMatrix, OptimizerConfig};
use crate::error::{Error, Result};
use crate::library::FeatureMatrix;

/// Column transform applied before the coordinate descent.
struct Standardized {
    x: DMatrix<f64>,
    /// Original column index for each standardized column.
    columns: Vec<usize>,
    means: Vec<f64>,
    scales: Vec<f64>,
}

fn standardize(theta: &FeatureMatrix, intercept: Option<usize>) -> Standardized {
    let n = theta.nrows() as f64;
    let mut columns = Vec::new();
    let mut means = Vec::new();
    let mut scales = Vec::new();
    for j in 0..theta.ncols() {
        if Some(j) == intercept {
            continue;
        }
        let col = theta.values.column(j);
        let mean = if intercept.is_some() { col.sum() / n } else { 0.0 };
        let scale = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        if scale > 0.0 {
            columns.push(j);
            means.push(mean);
            scales.push(scale);
        }
    }
    let x = DMatrix::from_fn(theta.nrows(), columns.len(), |i, k| {
        (theta.values[(i, columns[k])] - means[k]) / scales[k]
    });
    Standardized {
        x,
        columns,
        means,
        scales,
    }
}

/// Cyclic coordinate descent on `‖y − Xb‖² + α‖b‖₁`.
///
/// Returns the coefficients, the number of sweeps and whether the largest
/// per-sweep update fell below `tol`.
fn coordinate_descent(
    gram: &DMatrix<f64>,
    xty: &DVector<f64>,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> (DVector<f64>, usize, bool) {
    let p = xty.len();
    let mut b = DVector::zeros(p);
    // g = Xᵀ(y − Xb)
    let mut g = xty.clone();
    let level = alpha / 2.0;
    for sweep in 1..=max_iter {
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let gjj = gram[(j, j)];
            let rho = g[j] + gjj * b[j];
            let new = soft_threshold(rho, level) / gjj;
            let delta = new - b[j];
            if delta != 0.0 {
                b[j] = new;
                g.axpy(-delta, &gram.column(j), 1.0);
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < tol {
            return (b, sweep, true);
        }
    }
    (b, max_iter, false)
}

/// L1-penalized regression on standardized features.
///
/// With a constant column present the other features are centered and
/// scaled to unit variance, the intercept is left unpenalized and recovered
/// afterwards. Without one, features are only scaled by their RMS.
pub fn lasso(theta: &FeatureMatrix, xdot: &DMatrix<f64>, cfg: &OptimizerConfig) -> Result<CoefficientMatrix> {
    let OptimizerConfig::Lasso { alpha, tol, max_iter } = *cfg else {
        return Err(Error::Config("lasso called with a non-LASSO config".into()));
    };
    cfg.validate()?;
    check_problem(theta, xdot)?;

    let intercept = theta.intercept();
    let std = standardize(theta, intercept);
    let gram = std.x.transpose() * &std.x;
    let n = theta.nrows() as f64;

    let mut values = DMatrix::zeros(theta.ncols(), xdot.ncols());
    let mut all_converged = true;
    let mut max_iters = 0;
    for (k, y) in xdot.column_iter().enumerate() {
        let y_mean = if intercept.is_some() { y.sum() / n } else { 0.0 };
        let yc = y.map(|v| v - y_mean);
        let xty = std.x.transpose() * yc;
        let (b, iters, converged) = if std.columns.is_empty() {
            (DVector::zeros(0), 0, true)
        } else {
            coordinate_descent(&gram, &xty, alpha, tol, max_iter)
        };
        let mut offset = y_mean;
        for (slot, &j) in std.columns.iter().enumerate() {
            let c = b[slot] / std.scales[slot];
            values[(j, k)] = c;
            offset -= std.means[slot] * c;
        }
        if let Some(i) = intercept {
            values[(i, k)] = offset / theta.values[(0, i)];
        }
        all_converged &= converged;
        max_iters = max_iters.max(iters);
    }
    finish(values, theta, all_converged, max_iters, None)
}
