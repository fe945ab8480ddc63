//! Gaussian smoothing, finite differences and bulk-angle reconstruction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::{aggregate, evaluate_chunk, PipelineConfig};
use crate::ingest::{to_angular, AngularSeries, FrequencyChunk};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Mirror about the edge, repeating the edge sample (`d c b a | a b c d | d c b a`).
    #[default]
    Reflect,
    /// Repeat the edge sample.
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    /// Kernel standard deviation in seconds.
    pub sigma: f64,
    /// Kernel half-width in multiples of `sigma`.
    #[serde(default = "default_truncation")]
    pub truncation_radius: f64,
    #[serde(default)]
    pub boundary: Boundary,
}

fn default_truncation() -> f64 {
    4.0
}

impl SmoothingConfig {
    pub fn new(sigma: f64) -> Self {
        Self {
            sigma,
            truncation_radius: default_truncation(),
            boundary: Boundary::Reflect,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::Config(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.truncation_radius.is_finite() && self.truncation_radius >= 1.0) {
            return Err(Error::Config(format!(
                "truncation radius must be >= 1, got {}",
                self.truncation_radius
            )));
        }
        Ok(())
    }
}

/// Sum with Neumaier compensation.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Discrete Gaussian weights for offsets `-r..=r`, normalized to unit sum.
pub fn gaussian_kernel(sigma_samples: f64, truncation_radius: f64) -> Vec<f64> {
    let radius = (truncation_radius * sigma_samples + 0.5).floor() as i64;
    let denom = 2.0 * sigma_samples * sigma_samples;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / denom).exp())
        .collect();
    let total = compensated_sum(raw.iter().copied());
    let kernel: Vec<f64> = raw.into_iter().map(|w| w / total).collect();
    let check = compensated_sum(kernel.iter().copied());
    assert!((check - 1.0).abs() <= 1e-15, "kernel sums to {check}");
    kernel
}

fn padded_index(j: i64, n: usize, boundary: Boundary) -> usize {
    let n = n as i64;
    match boundary {
        Boundary::Nearest => j.clamp(0, n - 1) as usize,
        Boundary::Reflect => {
            let m = j.rem_euclid(2 * n);
            (if m < n { m } else { 2 * n - 1 - m }) as usize
        }
    }
}

/// Convolves `series` with a truncated Gaussian of `cfg.sigma` seconds.
pub fn gaussian_filter(series: &[f64], dt: f64, cfg: &SmoothingConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if series.len() < 2 {
        return Err(Error::Data("smoothing needs at least 2 samples".into()));
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite value at sample {i}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config(format!("sampling interval must be > 0, got {dt}")));
    }
    let kernel = gaussian_kernel(cfg.sigma / dt, cfg.truncation_radius);
    let radius = (kernel.len() / 2) as i64;
    let n = series.len();
    let out = (0..n as i64)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * series[padded_index(i + k as i64 - radius, n, cfg.boundary)])
                .sum()
        })
        .collect();
    Ok(out)
}

/// Second-order finite differences: central inside, one-sided at both ends.
pub fn estimate_derivative(series: &[f64], dt: f64) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 3 {
        return Err(Error::Data("differentiation needs at least 3 samples".into()));
    }
    let h2 = 2.0 * dt;
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (series[i + 1] - series[i - 1]) / h2;
    }
    d[0] = (-3.0 * series[0] + 4.0 * series[1] - series[2]) / h2;
    d[n - 1] = (3.0 * series[n - 1] - 4.0 * series[n - 2] + series[n - 3]) / h2;
    Ok(d)
}

/// Cumulative trapezoidal integral of `omega` starting from `theta0`.
pub fn integrate_angle(omega: &[f64], dt: f64, theta0: f64) -> Vec<f64> {
    let mut theta = Vec::with_capacity(omega.len());
    if omega.is_empty() {
        return theta;
    }
    theta.push(theta0);
    for w in omega.windows(2) {
        let last = *theta.last().unwrap();
        theta.push(last + dt * (w[0] + w[1]) / 2.0);
    }
    theta
}

/// Smoothed state of one chunk: bulk angle, angular deviation, elapsed time and ω̇.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateTrajectory {
    pub theta: Vec<f64>,
    pub omega: Vec<f64>,
    pub time: Vec<f64>,
    pub omega_dot: Vec<f64>,
    pub dt: f64,
}

impl StateTrajectory {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }
}

pub fn time_axis(n: usize, dt: f64) -> Vec<f64> {
    (0..n).map(|i| i as f64 * dt).collect()
}

pub fn build_trajectory(ang: &AngularSeries, cfg: &SmoothingConfig) -> Result<StateTrajectory> {
    let omega = gaussian_filter(&ang.omega, ang.dt, cfg)?;
    let theta = integrate_angle(&omega, ang.dt, 0.0);
    let omega_dot = estimate_derivative(&omega, ang.dt)?;
    Ok(StateTrajectory {
        time: time_axis(omega.len(), ang.dt),
        theta,
        omega,
        omega_dot,
        dt: ang.dt,
    })
}

/// One row of a smoothing-bandwidth sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaRow {
    pub sigma: f64,
    /// Mean RMSE over stable chunks; `+inf` when no chunk was stable.
    pub mean_rmse: f64,
    pub n_stable: usize,
    pub n_total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaSweep {
    pub best_sigma: f64,
    pub rows: Vec<SigmaRow>,
}

/// Picks the smoothing bandwidth whose fitted models best reproduce the raw ω.
///
/// For every candidate the chunks are smoothed, fitted and simulated with
/// `pipeline`, and the mean stable RMSE against the unsmoothed ω is recorded.
/// Ties go to the smaller σ.
pub fn optimize_sigma(
    chunks: &[FrequencyChunk],
    candidates: &[f64],
    pipeline: &PipelineConfig,
) -> Result<SigmaSweep> {
    if chunks.is_empty() {
        return Err(Error::EmptyInput("sigma sweep needs at least one chunk".into()));
    }
    if candidates.is_empty() {
        return Err(Error::Config("sigma sweep needs at least one candidate".into()));
    }
    for &sigma in candidates {
        SmoothingConfig {
            sigma,
            ..pipeline.smoothing
        }
        .validate()?;
    }

    let rows = candidates
        .par_iter()
        .map(|&sigma| {
            let mut cfg = pipeline.clone();
            cfg.smoothing.sigma = sigma;
            let records = chunks
                .par_iter()
                .map(|c| evaluate_chunk(c, &cfg))
                .collect::<Result<Vec<_>>>()?;
            let report = aggregate(&records)?;
            Ok(SigmaRow {
                sigma,
                mean_rmse: report.mean_stable_rmse.unwrap_or(f64::INFINITY),
                n_stable: report.n_stable,
                n_total: report.n_chunks,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let best = rows
        .iter()
        .filter(|r| r.mean_rmse.is_finite())
        .min_by(|a, b| {
            a.mean_rmse
                .total_cmp(&b.mean_rmse)
                .then(a.sigma.total_cmp(&b.sigma))
        });
    let best_sigma = match (best, rows.len()) {
        (Some(r), _) => r.sigma,
        (None, 1) => rows[0].sigma,
        (None, _) => {
            return Err(Error::Selection(
                "every sigma candidate produced only divergent simulations".into(),
            ))
        }
    };
    Ok(SigmaSweep { best_sigma, rows })
}

/// Writes the sweep as `sigma,mean_rmse,n_stable,n_total`.
pub fn write_sigma_csv<W: std::io::Write>(sweep: &SigmaSweep, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sigma", "mean_rmse", "n_stable", "n_total"])?;
    for r in &sweep.rows {
        w.write_record([
            r.sigma.to_string(),
            r.mean_rmse.to_string(),
            r.n_stable.to_string(),
            r.n_total.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Smoothing applied to a whole chunk, for callers that only need the trajectory.
pub fn chunk_trajectory(chunk: &FrequencyChunk, cfg: &SmoothingConfig) -> Result<StateTrajectory> {
    build_trajectory(&to_angular(chunk), cfg).map_err(|e| e.in_chunk(&chunk.chunk_id))
}
