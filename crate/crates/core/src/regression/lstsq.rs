//! Least-squares kernels shared by the sparse solvers.
//!
//! All solves go through a column-pivoted Householder QR of the augmented
//! system `[Θ; √α I]` with unit-norm columns, which keeps the raw polynomial
//! features (whose scales span many decades) well conditioned.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Householder QR with column pivoting (largest remaining column norm first).
#[derive(Debug, Clone)]
pub(crate) struct PivotedQr {
    /// Householder vectors on and below the diagonal, `R` above it.
    packed: DMatrix<f64>,
    betas: Vec<f64>,
    r_diag: Vec<f64>,
    /// `perm[k]` is the original column sitting at position `k`.
    perm: Vec<usize>,
}

impl PivotedQr {
    pub fn new(mut a: DMatrix<f64>) -> Self {
        let (m, p) = a.shape();
        assert!(m >= p, "QR needs at least as many rows as columns");
        let mut perm: Vec<usize> = (0..p).collect();
        let mut betas = vec![0.0; p];
        let mut r_diag = vec![0.0; p];

        for k in 0..p {
            let pivot = (k..p)
                .map(|j| (j, a.view((k, j), (m - k, 1)).norm_squared()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best })
                .0;
            if pivot != k {
                a.swap_columns(k, pivot);
                perm.swap(k, pivot);
            }

            let norm = a.view((k, k), (m - k, 1)).norm();
            if norm == 0.0 {
                r_diag[k] = 0.0;
                betas[k] = 0.0;
                continue;
            }
            let x0 = a[(k, k)];
            let alpha = if x0 >= 0.0 { -norm } else { norm };
            a[(k, k)] = x0 - alpha;
            let vtv = a.view((k, k), (m - k, 1)).norm_squared();
            let beta = 2.0 / vtv;
            for j in k + 1..p {
                let dot = a.view((k, k), (m - k, 1)).dot(&a.view((k, j), (m - k, 1)));
                let s = beta * dot;
                for i in k..m {
                    let v = a[(i, k)];
                    a[(i, j)] -= s * v;
                }
            }
            betas[k] = beta;
            r_diag[k] = alpha;
        }
        Self {
            packed: a,
            betas,
            r_diag,
            perm,
        }
    }

    pub fn ncols(&self) -> usize {
        self.perm.len()
    }

    /// Original indices of columns whose pivot falls below `rtol * |R00|`.
    pub fn deficient_columns(&self, rtol: f64) -> Vec<usize> {
        let lead = self.r_diag.first().map_or(0.0, |r| r.abs());
        match self.r_diag.iter().position(|r| r.abs() <= rtol * lead) {
            Some(rank) => self.perm[rank..].to_vec(),
            None => Vec::new(),
        }
    }

    /// Applies `Qᵀ` in place.
    pub fn qt_mul(&self, b: &mut DVector<f64>) {
        let m = self.packed.nrows();
        for k in 0..self.ncols() {
            if self.betas[k] == 0.0 {
                continue;
            }
            let v = self.packed.view((k, k), (m - k, 1));
            let s = self.betas[k] * v.dot(&b.rows(k, m - k));
            for i in k..m {
                b[i] -= s * self.packed[(i, k)];
            }
        }
    }

    /// Solves `R z = top` and undoes the pivoting.
    pub fn back_substitute(&self, top: &[f64]) -> DVector<f64> {
        let p = self.ncols();
        let mut z = vec![0.0; p];
        for i in (0..p).rev() {
            let mut acc = top[i];
            for j in i + 1..p {
                acc -= self.packed[(i, j)] * z[j];
            }
            z[i] = if self.r_diag[i] == 0.0 { 0.0 } else { acc / self.r_diag[i] };
        }
        let mut x = DVector::zeros(p);
        for (k, &col) in self.perm.iter().enumerate() {
            x[col] = z[k];
        }
        x
    }
}

/// Minimizer of `‖Θx − y‖² + α‖x − prior‖²`, factored once for repeated right-hand sides.
#[derive(Debug, Clone)]
pub(crate) struct RegularizedLstsq {
    qr: PivotedQr,
    scale: Vec<f64>,
    nrows: usize,
    sqrt_alpha: f64,
}

impl RegularizedLstsq {
    /// `names` label the columns of `theta` in singularity errors.
    pub fn new(theta: &DMatrix<f64>, alpha: f64, names: &[String]) -> Result<Self> {
        let (n, p) = theta.shape();
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::Config(format!("ridge weight must be >= 0, got {alpha}")));
        }
        if alpha == 0.0 && n < p {
            return Err(Error::Singular {
                columns: names.to_vec(),
            });
        }
        let sqrt_alpha = alpha.sqrt();
        let rows = if alpha > 0.0 { n + p } else { n };
        let mut a = DMatrix::zeros(rows, p);
        a.view_mut((0, 0), (n, p)).copy_from(theta);
        if alpha > 0.0 {
            for j in 0..p {
                a[(n + j, j)] = sqrt_alpha;
            }
        }
        let scale: Vec<f64> = (0..p)
            .map(|j| {
                let s = a.column(j).norm();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        for (j, s) in scale.iter().enumerate() {
            a.column_mut(j).unscale_mut(*s);
        }
        let qr = PivotedQr::new(a);
        if alpha == 0.0 {
            let rtol = (rows.max(p) as f64) * f64::EPSILON;
            let bad = qr.deficient_columns(rtol);
            if !bad.is_empty() {
                return Err(Error::Singular {
                    columns: bad.into_iter().map(|j| names[j].clone()).collect(),
                });
            }
        }
        Ok(Self {
            qr,
            scale,
            nrows: n,
            sqrt_alpha,
        })
    }

    pub fn ncols(&self) -> usize {
        self.scale.len()
    }

    fn rhs(&self, y: &[f64], prior: Option<&[f64]>) -> DVector<f64> {
        let p = self.ncols();
        let extra = if self.sqrt_alpha > 0.0 { p } else { 0 };
        let mut b = DVector::zeros(self.nrows + extra);
        b.rows_mut(0, self.nrows).copy_from_slice(y);
        if let (Some(prior), true) = (prior, extra > 0) {
            for j in 0..p {
                b[self.nrows + j] = self.sqrt_alpha * prior[j];
            }
        }
        b
    }

    fn finish(&self, qtb: &[f64]) -> DVector<f64> {
        let mut x = self.qr.back_substitute(qtb);
        for (j, s) in self.scale.iter().enumerate() {
            x[j] /= s;
        }
        x
    }

    pub fn solve(&self, y: &[f64], prior: Option<&[f64]>) -> DVector<f64> {
        let mut b = self.rhs(y, prior);
        self.qr.qt_mul(&mut b);
        self.finish(&b.as_slice()[..self.ncols()])
    }

    /// Precomputes `Qᵀ[y; 0]` and the map `prior ↦ Qᵀ[0; √α prior]` for fast repeated solves.
    pub fn prior_solver(&self, y: &[f64]) -> PriorSolver<'_> {
        let p = self.ncols();
        let mut base = self.rhs(y, None);
        self.qr.qt_mul(&mut base);
        let mut gain = DMatrix::zeros(p, p);
        if self.sqrt_alpha > 0.0 {
            for j in 0..p {
                let mut e = DVector::zeros(self.nrows + p);
                e[self.nrows + j] = self.sqrt_alpha;
                self.qr.qt_mul(&mut e);
                gain.column_mut(j).copy_from(&e.rows(0, p));
            }
        }
        PriorSolver {
            lstsq: self,
            base: base.rows(0, p).into_owned(),
            gain,
        }
    }
}

pub(crate) struct PriorSolver<'a> {
    lstsq: &'a RegularizedLstsq,
    base: DVector<f64>,
    gain: DMatrix<f64>,
}

impl PriorSolver<'_> {
    pub fn solve(&self, prior: &DVector<f64>) -> DVector<f64> {
        let top = &self.base + &self.gain * prior;
        self.lstsq.finish(top.as_slice())
    }
}
