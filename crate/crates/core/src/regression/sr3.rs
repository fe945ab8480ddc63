use nalgebra::{DMatrix, DVector};

use super::{check_problem, finish, CoefficientMatrix, Norm, OptimizerConfig, RegularizedLstsq};
use crate::error::{Error, Result};
use crate::library::FeatureMatrix;

struct Sr3Params {
    kappa: f64,
    nu: f64,
    norm: Norm,
    tol: f64,
    max_iter: usize,
}

fn params(cfg: &OptimizerConfig) -> Result<Sr3Params> {
    let OptimizerConfig::Sr3 {
        kappa,
        nu,
        norm,
        tol,
        max_iter,
    } = *cfg
    else {
        return Err(Error::Config("sr3 called with a non-SR3 config".into()));
    };
    cfg.validate()?;
    Ok(Sr3Params {
        kappa,
        nu,
        norm,
        tol,
        max_iter,
    })
}

/// Closed-form minimizer over Ξ of `½‖ΘΞ − Ẋ‖² + (ν/2)‖Ξ − W‖²`.
pub fn xi_step(theta: &FeatureMatrix, xdot: &DMatrix<f64>, nu: f64, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_problem(theta, xdot)?;
    if w.shape() != (theta.ncols(), xdot.ncols()) {
        return Err(Error::Data("W does not match the problem shape".into()));
    }
    if !(nu.is_finite() && nu > 0.0) {
        return Err(Error::Config(format!("nu must be > 0, got {nu}")));
    }
    let ls = RegularizedLstsq::new(&theta.values, nu, &theta.names)?;
    let mut out = DMatrix::zeros(theta.ncols(), xdot.ncols());
    for k in 0..xdot.ncols() {
        let prior: Vec<f64> = w.column(k).iter().copied().collect();
        out.set_column(k, &ls.solve(xdot.column(k).as_slice(), Some(&prior)));
    }
    Ok(out)
}

fn prox(xi: &DVector<f64>, p: &Sr3Params, intercept: Option<usize>) -> DVector<f64> {
    let ratio = p.kappa / p.nu;
    DVector::from_fn(xi.len(), |j, _| {
        if Some(j) == intercept {
            xi[j]
        } else {
            p.norm.prox(xi[j], ratio)
        }
    })
}

fn objective(
    theta: &DMatrix<f64>,
    y: &[f64],
    xi: &DVector<f64>,
    w: &DVector<f64>,
    p: &Sr3Params,
    intercept: Option<usize>,
) -> f64 {
    let fit = theta * xi;
    let misfit: f64 = fit.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
    let penalty: f64 = w
        .iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != intercept)
        .map(|(_, &v)| p.norm.penalty(v))
        .sum();
    0.5 * misfit + p.kappa * penalty + 0.5 * p.nu * (xi - w).norm_squared()
}

fn run(
    theta: &FeatureMatrix,
    xdot: &DMatrix<f64>,
    cfg: &OptimizerConfig,
    mut trace: Option<&mut Vec<Vec<f64>>>,
) -> Result<CoefficientMatrix> {
    let p = params(cfg)?;
    check_problem(theta, xdot)?;
    let intercept = theta.intercept();
    let relaxed_ls = RegularizedLstsq::new(&theta.values, p.nu, &theta.names)?;
    let ols = RegularizedLstsq::new(&theta.values, 0.0, &theta.names).ok();

    let ncols = theta.ncols();
    let mut w_all = DMatrix::zeros(ncols, xdot.ncols());
    let mut xi_all = DMatrix::zeros(ncols, xdot.ncols());
    let mut all_converged = true;
    let mut max_iters = 0;

    for (k, y) in xdot.column_iter().enumerate() {
        let y = y.as_slice();
        let step = relaxed_ls.prior_solver(y);
        let mut xi = match &ols {
            Some(ls) => ls.solve(y, None),
            None => step.solve(&DVector::zeros(ncols)),
        };
        let mut w = prox(&xi, &p, intercept);
        let mut history = Vec::new();
        if trace.is_some() {
            history.push(objective(&theta.values, y, &xi, &w, &p, intercept));
        }

        let mut converged = false;
        let mut iters = 0;
        while iters < p.max_iter {
            iters += 1;
            xi = step.solve(&w);
            let w_next = prox(&xi, &p, intercept);
            let change = (&w_next - &w).norm();
            w = w_next;
            if trace.is_some() {
                history.push(objective(&theta.values, y, &xi, &w, &p, intercept));
            }
            if change < p.tol {
                converged = true;
                break;
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(history);
        }
        w_all.set_column(k, &w);
        xi_all.set_column(k, &xi);
        all_converged &= converged;
        max_iters = max_iters.max(iters);
    }
    finish(w_all, theta, all_converged, max_iters, Some(xi_all))
}

/// Sparse relaxed regularized regression; the returned coefficients are the sparse iterate W.
pub fn sr3(theta: &FeatureMatrix, xdot: &DMatrix<f64>, cfg: &OptimizerConfig) -> Result<CoefficientMatrix> {
    run(theta, xdot, cfg, None)
}

/// Like [`sr3`], also returning the objective after initialization and every iteration, per target.
pub fn sr3_with_objective(
    theta: &FeatureMatrix,
    xdot: &DMatrix<f64>,
    cfg: &OptimizerConfig,
) -> Result<(CoefficientMatrix, Vec<Vec<f64>>)> {
    let mut trace = Vec::new();
    let c = run(theta, xdot, cfg, Some(&mut trace))?;
    Ok((c, trace))
}
