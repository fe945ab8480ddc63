//! Sparse regression of state derivatives onto a feature library.

mod lasso;
mod lstsq;
mod sr3;
mod stlsq;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::{FeatureMatrix, LibrarySpec};

pub use lasso::lasso;
pub use sr3::{sr3, sr3_with_objective, xi_step};
pub use stlsq::stlsq;

pub(crate) use lstsq::RegularizedLstsq;

fn default_stlsq_max_iter() -> usize {
    20
}

fn default_tol() -> f64 {
    1e-6
}

fn default_lasso_max_iter() -> usize {
    10_000
}

fn default_sr3_tol() -> f64 {
    1e-8
}

fn default_sr3_max_iter() -> usize {
    5_000
}

/// Penalty `R(W)` of the relaxed formulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L0,
    L1,
    L2,
}

impl Norm {
    /// Proximal map of `(κ/ν)·R` at `x`; `ratio` is `κ/ν`.
    pub fn prox(self, x: f64, ratio: f64) -> f64 {
        match self {
            Norm::L0 => {
                if x.abs() < (2.0 * ratio).sqrt() {
                    0.0
                } else {
                    x
                }
            }
            Norm::L1 => x.signum() * (x.abs() - ratio).max(0.0),
            Norm::L2 => x / (1.0 + 2.0 * ratio),
        }
    }

    /// `R(w)` for a single entry.
    pub fn penalty(self, w: f64) -> f64 {
        match self {
            Norm::L0 => {
                if w != 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Norm::L1 => w.abs(),
            Norm::L2 => w * w,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Norm::L0 => "l0",
            Norm::L1 => "l1",
            Norm::L2 => "l2",
        }
    }
}

pub fn soft_threshold(x: f64, level: f64) -> f64 {
    Norm::L1.prox(x, level)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum OptimizerConfig {
    Stlsq {
        #[serde(rename = "lambda")]
        threshold: f64,
        alpha: f64,
        #[serde(default = "default_stlsq_max_iter")]
        max_iter: usize,
    },
    Lasso {
        alpha: f64,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default = "default_lasso_max_iter")]
        max_iter: usize,
    },
    Sr3 {
        kappa: f64,
        nu: f64,
        norm: Norm,
        #[serde(default = "default_sr3_tol")]
        tol: f64,
        #[serde(default = "default_sr3_max_iter")]
        max_iter: usize,
    },
}

impl OptimizerConfig {
    pub fn stlsq(threshold: f64, alpha: f64) -> Self {
        OptimizerConfig::Stlsq {
            threshold,
            alpha,
            max_iter: default_stlsq_max_iter(),
        }
    }

    pub fn lasso(alpha: f64) -> Self {
        OptimizerConfig::Lasso {
            alpha,
            tol: default_tol(),
            max_iter: default_lasso_max_iter(),
        }
    }

    pub fn sr3(kappa: f64, nu: f64, norm: Norm) -> Self {
        OptimizerConfig::Sr3 {
            kappa,
            nu,
            norm,
            tol: default_sr3_tol(),
            max_iter: default_sr3_max_iter(),
        }
    }

    /// Short label used in reports: `stlsq`, `lasso`, `sr3_l0`, ...
    pub fn label(&self) -> String {
        match self {
            OptimizerConfig::Stlsq { .. } => "stlsq".into(),
            OptimizerConfig::Lasso { .. } => "lasso".into(),
            OptimizerConfig::Sr3 { norm, .. } => format!("sr3_{}", norm.label()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")))
            }
        };
        let iters = |m: usize| {
            if m >= 1 {
                Ok(())
            } else {
                Err(Error::Config("max_iter must be at least 1".into()))
            }
        };
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        match *self {
            OptimizerConfig::Stlsq {
                threshold,
                alpha,
                max_iter,
            } => {
                nonneg("lambda", threshold)?;
                nonneg("alpha", alpha)?;
                iters(max_iter)
            }
            OptimizerConfig::Lasso { alpha, tol, max_iter } => {
                nonneg("alpha", alpha)?;
                positive("tol", tol)?;
                iters(max_iter)
            }
            OptimizerConfig::Sr3 {
                kappa,
                nu,
                tol,
                max_iter,
                ..
            } => {
                nonneg("kappa", kappa)?;
                positive("nu", nu)?;
                positive("tol", tol)?;
                iters(max_iter)
            }
        }
    }
}

/// Ξ: rows follow the feature library, columns the fitted derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    pub values: DMatrix<f64>,
    pub feature_names: Vec<String>,
    pub converged: bool,
    pub iterations: usize,
    /// The relaxed variable of SR3, kept for diagnostics.
    pub relaxed: Option<DMatrix<f64>>,
}

impl CoefficientMatrix {
    pub fn column(&self, target: usize) -> Vec<f64> {
        self.values.column(target).iter().copied().collect()
    }

    /// Per target, how many coefficients reach `threshold` in magnitude.
    pub fn active_counts(&self, threshold: f64) -> Vec<usize> {
        self.values
            .column_iter()
            .map(|c| c.iter().filter(|v| v.abs() >= threshold).count())
            .collect()
    }
}

pub(crate) fn check_problem(theta: &FeatureMatrix, xdot: &DMatrix<f64>) -> Result<()> {
    if theta.nrows() != xdot.nrows() {
        return Err(Error::Data(format!(
            "feature matrix has {} rows, targets have {}",
            theta.nrows(),
            xdot.nrows()
        )));
    }
    if theta.ncols() == 0 || xdot.ncols() == 0 {
        return Err(Error::Data("empty regression problem".into()));
    }
    if xdot.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("targets contain non-finite values".into()));
    }
    Ok(())
}

pub(crate) fn finish(
    values: DMatrix<f64>,
    theta: &FeatureMatrix,
    converged: bool,
    iterations: usize,
    relaxed: Option<DMatrix<f64>>,
) -> Result<CoefficientMatrix> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("fit produced non-finite coefficients".into()));
    }
    Ok(CoefficientMatrix {
        values,
        feature_names: theta.names.clone(),
        converged,
        iterations,
        relaxed,
    })
}

/// Minimizes `‖ΘΞ − Ẋ‖² + α‖Ξ‖²` column by column.
pub fn ridge_solve(theta: &FeatureMatrix, xdot: &DMatrix<f64>, alpha: f64) -> Result<CoefficientMatrix> {
    check_problem(theta, xdot)?;
    let ls = RegularizedLstsq::new(&theta.values, alpha, &theta.names)?;
    let mut values = DMatrix::zeros(theta.ncols(), xdot.ncols());
    for (k, y) in xdot.column_iter().enumerate() {
        let x = ls.solve(y.as_slice(), None);
        values.set_column(k, &x);
    }
    finish(values, theta, true, 1, None)
}

/// Dispatches on the optimizer variant.
pub fn fit(theta: &FeatureMatrix, xdot: &DMatrix<f64>, cfg: &OptimizerConfig) -> Result<CoefficientMatrix> {
    cfg.validate()?;
    match cfg {
        OptimizerConfig::Stlsq { .. } => stlsq(theta, xdot, cfg),
        OptimizerConfig::Lasso { .. } => lasso(theta, xdot, cfg),
        OptimizerConfig::Sr3 { .. } => sr3(theta, xdot, cfg),
    }
}

/// Serialized form of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub chunk_id: String,
    pub library_spec: LibrarySpec,
    pub feature_names: Vec<String>,
    /// Target name mapped to its coefficient column.
    pub coefficients: std::collections::BTreeMap<String, Vec<f64>>,
    pub optimizer_config: OptimizerConfig,
    pub converged: bool,
    pub iterations: usize,
}

impl FittedModel {
    /// Wraps the single `ω̇` column of a fit; `θ̇ = ω` is structural and not fitted.
    pub fn new(chunk_id: &str, library_spec: LibrarySpec, coeffs: &CoefficientMatrix, optimizer_config: OptimizerConfig) -> Self {
        let mut coefficients = std::collections::BTreeMap::new();
        coefficients.insert("omega_dot".to_string(), coeffs.column(0));
        Self {
            chunk_id: chunk_id.to_string(),
            library_spec,
            feature_names: coeffs.feature_names.clone(),
            coefficients,
            optimizer_config,
            converged: coeffs.converged,
            iterations: coeffs.iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_problem() -> (FeatureMatrix, DMatrix<f64>) {
        let theta = FeatureMatrix::new(
            DMatrix::identity(3, 3),
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        (theta, DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]))
    }

    #[test]
    fn ridge_on_identity() {
        let (theta, y) = identity_problem();
        let ols = ridge_solve(&theta, &y, 0.0).unwrap();
        assert_eq!(ols.column(0), vec![1.0, 2.0, 3.0]);
        let r = ridge_solve(&theta, &y, 1.0).unwrap();
        for (a, b) in r.column(0).iter().zip([0.5, 1.0, 1.5]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn ols_residual_is_orthogonal() {
        let n = 100;
        let values = DMatrix::from_fn(n, 5, |i, j| {
            let x = i as f64 / n as f64;
            match j {
                0 => 1.0,
                1 => x,
                2 => (7.0 * x).sin(),
                3 => (3.0 * x).cos() * x,
                _ => (x - 0.3).abs(),
            }
        });
        let theta = FeatureMatrix::new(values, (0..5).map(|j| format!("f{j}")).collect()).unwrap();
        let y = DMatrix::from_fn(n, 1, |i, _| ((i * 37 % 11) as f64) / 11.0 - 0.5);
        let c = ridge_solve(&theta, &y, 0.0).unwrap();
        let r = &y - &theta.values * &c.values;
        let g = theta.values.transpose() * r;
        assert!(g.amax() < 1e-8, "{}", g.amax());
    }

    #[test]
    fn singular_design_names_columns() {
        let values = DMatrix::from_fn(20, 3, |i, j| match j {
            0 => 1.0,
            1 => i as f64,
            _ => 2.0 * i as f64 + 1.0,
        });
        let theta = FeatureMatrix::new(values, vec!["1".into(), "x".into(), "y".into()]).unwrap();
        let y = DMatrix::from_fn(20, 1, |i, _| i as f64);
        match ridge_solve(&theta, &y, 0.0) {
            Err(Error::Singular { columns }) => assert_eq!(columns.len(), 1),
            other => panic!("{other:?}"),
        }
        assert!(ridge_solve(&theta, &y, 1e-6).is_ok());
    }

    #[test]
    fn scalar_prox_forms() {
        assert_eq!(Norm::L1.prox(3.0, 1.0), 2.0);
        assert_eq!(Norm::L1.prox(-0.5, 1.0), 0.0);
        // √(2·0.5) = 1
        assert_eq!(Norm::L0.prox(0.9, 0.5), 0.0);
        assert_eq!(Norm::L0.prox(1.1, 0.5), 1.1);
        assert_eq!(Norm::L2.prox(3.0, 0.5), 1.5);
    }

    #[test]
    fn config_json_round_trip() {
        let cfgs = [
            OptimizerConfig::stlsq(1e-3, 1e-6),
            OptimizerConfig::lasso(1e-6),
            OptimizerConfig::sr3(1e-6, 1.0, Norm::L1),
        ];
        for c in cfgs {
            let s = serde_json::to_string(&c).unwrap();
            assert_eq!(serde_json::from_str::<OptimizerConfig>(&s).unwrap(), c);
        }
        let parsed: OptimizerConfig =
            serde_json::from_str(r#"{"method":"stlsq","lambda":0.1,"alpha":0.0}"#).unwrap();
        assert_eq!(parsed, OptimizerConfig::stlsq(0.1, 0.0));
    }

    #[test]
    fn invalid_configs() {
        assert!(OptimizerConfig::sr3(0.0, 0.0, Norm::L0).validate().is_err());
        assert!(OptimizerConfig::lasso(-1.0).validate().is_err());
        let c = OptimizerConfig::Stlsq {
            threshold: 0.1,
            alpha: 0.0,
            max_iter: 0,
        };
        assert!(c.validate().unwrap_err().is_config());
    }
}
