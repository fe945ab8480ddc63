use nalgebra::DMatrix;

use super::{check_problem, finish, CoefficientMatrix, OptimizerConfig, RegularizedLstsq};
use crate::error::{Error, Result};
use crate::library::FeatureMatrix;

/// Sequentially thresholded least squares.
///
/// The intercept column, when present, is never thresholded.
pub fn stlsq(theta: &FeatureMatrix, xdot: &DMatrix<f64>, cfg: &OptimizerConfig) -> Result<CoefficientMatrix> {
    let OptimizerConfig::Stlsq {
        threshold,
        alpha,
        max_iter,
    } = *cfg
    else {
        return Err(Error::Config("stlsq called with a non-STLSQ config".into()));
    };
    cfg.validate()?;
    check_problem(theta, xdot)?;

    let p = theta.ncols();
    let intercept = theta.intercept();
    let mut values = DMatrix::zeros(p, xdot.ncols());
    let mut all_converged = true;
    let mut max_iters = 0;

    for (k, y) in xdot.column_iter().enumerate() {
        let y = y.as_slice();
        let mut active: Vec<usize> = (0..p).collect();
        let mut coef = vec![0.0; p];
        let mut converged = false;
        let mut iters = 0;

        while iters < max_iter {
            iters += 1;
            let sub = theta.values.select_columns(&active);
            let names: Vec<String> = active.iter().map(|&j| theta.names[j].clone()).collect();
            let x = RegularizedLstsq::new(&sub, alpha, &names)?.solve(y, None);

            coef.iter_mut().for_each(|c| *c = 0.0);
            for (slot, &j) in active.iter().enumerate() {
                coef[j] = x[slot];
            }
            let kept: Vec<usize> = active
                .iter()
                .copied()
                .filter(|&j| Some(j) == intercept || coef[j].abs() >= threshold)
                .collect();
            for &j in &active {
                if !kept.contains(&j) {
                    coef[j] = 0.0;
                }
            }
            if kept.is_empty() {
                converged = true;
                break;
            }
            if kept.len() == active.len() {
                converged = true;
                break;
            }
            active = kept;
        }

        for (j, c) in coef.into_iter().enumerate() {
            values[(j, k)] = c;
        }
        all_converged &= converged;
        max_iters = max_iters.max(iters);
    }
    finish(values, theta, all_converged, max_iters, None)
}
