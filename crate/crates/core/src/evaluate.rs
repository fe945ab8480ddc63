//! Per-chunk identification runs and their aggregate metrics.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{to_angular, FrequencyChunk};
use crate::library::{build_feature_matrix, FeatureMatrix, LibrarySpec};
use crate::preprocess::{build_trajectory, compensated_sum, SmoothingConfig, StateTrajectory};
use crate::regression::{fit, CoefficientMatrix, OptimizerConfig};
use crate::simulate::{
    chunk_seed, euler_maruyama_swing, simulate_model, Model, SwingParams, MIN_DIVERGENCE_BOUND,
};

fn default_factor() -> f64 {
    50.0
}

fn default_floor() -> f64 {
    MIN_DIVERGENCE_BOUND
}

fn default_active_threshold() -> f64 {
    1e-6
}

/// A simulation diverges once `|ω|` exceeds `max(factor · max|ω_raw|, floor)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceBound {
    #[serde(default = "default_factor")]
    pub factor: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
}

impl Default for DivergenceBound {
    fn default() -> Self {
        Self {
            factor: default_factor(),
            floor: default_floor(),
        }
    }
}

impl DivergenceBound {
    pub fn for_series(&self, omega: &[f64]) -> f64 {
        let peak = omega.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (self.factor * peak).max(self.floor)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.factor.is_finite() && self.factor > 0.0 && self.floor.is_finite() && self.floor > 0.0) {
            return Err(Error::Config("divergence factor and floor must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub smoothing: SmoothingConfig,
    pub library: LibrarySpec,
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub divergence: DivergenceBound,
    /// Coefficients at or above this magnitude count as active features.
    #[serde(default = "default_active_threshold")]
    pub active_threshold: f64,
}

impl PipelineConfig {
    pub fn new(smoothing: SmoothingConfig, library: LibrarySpec, optimizer: OptimizerConfig) -> Self {
        Self {
            smoothing,
            library,
            optimizer,
            divergence: DivergenceBound::default(),
            active_threshold: default_active_threshold(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.smoothing.validate()?;
        self.library.validate()?;
        self.optimizer.validate()?;
        self.divergence.validate()?;
        if !(self.active_threshold.is_finite() && self.active_threshold >= 0.0) {
            return Err(Error::Config("active_threshold must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub chunk_id: String,
    pub stable: bool,
    /// Present iff the simulation stayed bounded.
    pub rmse: Option<f64>,
    /// Active terms of the `ω̇` equation.
    pub n_active_features: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub mean_stable_rmse: Option<f64>,
    /// Population standard deviation over stable chunks.
    pub rmse_std: Option<f64>,
    pub stability_fraction: f64,
    pub mean_active_features: f64,
    pub n_chunks: usize,
    pub n_stable: usize,
    pub n_nonconverged: usize,
}

pub fn rmse(sim: &[f64], reference: &[f64]) -> Result<f64> {
    if sim.len() != reference.len() {
        return Err(Error::Data(format!(
            "rmse of sequences with lengths {} and {}",
            sim.len(),
            reference.len()
        )));
    }
    if sim.is_empty() {
        return Err(Error::Data("rmse of empty sequences".into()));
    }
    let ss = compensated_sum(sim.iter().zip(reference).map(|(a, b)| (a - b) * (a - b)));
    Ok((ss / sim.len() as f64).sqrt())
}

pub fn active_features(coeffs: &CoefficientMatrix, threshold: f64) -> Vec<usize> {
    coeffs.active_counts(threshold)
}

/// Order-independent mean and population standard deviation.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = compensated_sum(sorted.iter().copied()) / n;
    let var = compensated_sum(sorted.iter().map(|v| (v - mean) * (v - mean))) / n;
    (mean, var.sqrt())
}

pub fn aggregate(records: &[EvaluationRecord]) -> Result<AggregateReport> {
    if records.is_empty() {
        return Err(Error::Data("cannot aggregate zero records".into()));
    }
    let stable: Vec<f64> = records.iter().filter(|r| r.stable).filter_map(|r| r.rmse).collect();
    let n_stable = records.iter().filter(|r| r.stable).count();
    let (mean, std) = if stable.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&stable);
        (Some(m), Some(s))
    };
    let mut counts: Vec<f64> = records.iter().map(|r| r.n_active_features as f64).collect();
    counts.sort_by(f64::total_cmp);
    Ok(AggregateReport {
        mean_stable_rmse: mean,
        rmse_std: std,
        stability_fraction: n_stable as f64 / records.len() as f64,
        mean_active_features: compensated_sum(counts) / records.len() as f64,
        n_chunks: records.len(),
        n_stable,
        n_nonconverged: records.iter().filter(|r| !r.converged).count(),
    })
}

/// A chunk after smoothing and library evaluation, ready to be fitted repeatedly.
#[derive(Debug, Clone)]
pub struct PreparedChunk {
    pub chunk_id: String,
    pub library: LibrarySpec,
    pub trajectory: StateTrajectory,
    pub features: FeatureMatrix,
    pub raw_omega: Vec<f64>,
}

impl PreparedChunk {
    pub fn new(chunk: &FrequencyChunk, smoothing: &SmoothingConfig, library: &LibrarySpec) -> Result<Self> {
        let run = || {
            let raw_omega = to_angular(chunk).omega;
            let trajectory = build_trajectory(&to_angular(chunk), smoothing)?;
            let features = build_feature_matrix(&trajectory, library)?;
            Ok(Self {
                chunk_id: chunk.chunk_id.clone(),
                library: *library,
                trajectory,
                features,
                raw_omega,
            })
        };
        run().map_err(|e: Error| e.in_chunk(&chunk.chunk_id))
    }

    pub fn fit(&self, optimizer: &OptimizerConfig) -> Result<CoefficientMatrix> {
        let xdot = DMatrix::from_column_slice(self.trajectory.len(), 1, &self.trajectory.omega_dot);
        fit(&self.features, &xdot, optimizer).map_err(|e| e.in_chunk(&self.chunk_id))
    }

    /// Fits, simulates from the first smoothed state and scores against the raw ω.
    pub fn evaluate(
        &self,
        optimizer: &OptimizerConfig,
        divergence: &DivergenceBound,
        active_threshold: f64,
    ) -> Result<EvaluationRecord> {
        let coeffs = self.fit(optimizer)?;
        let run = || {
            let model = Model::from_fit(self.library, &coeffs, 0)?;
            let bound = divergence.for_series(&self.raw_omega);
            let x0 = (self.trajectory.theta[0], self.trajectory.omega[0]);
            let sim = simulate_model(&model, x0, self.trajectory.dt, self.raw_omega.len() - 1, bound)?;
            let rmse = if sim.stable {
                Some(rmse(&sim.trajectory.omega, &self.raw_omega)?)
            } else {
                None
            };
            Ok(EvaluationRecord {
                chunk_id: self.chunk_id.clone(),
                stable: sim.stable,
                rmse,
                n_active_features: coeffs.active_counts(active_threshold)[0],
                converged: coeffs.converged,
            })
        };
        run().map_err(|e: Error| e.in_chunk(&self.chunk_id))
    }
}

/// Smooths a chunk and fits the `ω̇` equation.
pub fn fit_chunk(chunk: &FrequencyChunk, pipeline: &PipelineConfig) -> Result<(StateTrajectory, CoefficientMatrix)> {
    pipeline.validate()?;
    let prepared = PreparedChunk::new(chunk, &pipeline.smoothing, &pipeline.library)?;
    let coeffs = prepared.fit(&pipeline.optimizer)?;
    Ok((prepared.trajectory, coeffs))
}

/// Smooth, fit, simulate over the chunk's horizon and score against the raw ω.
pub fn evaluate_chunk(chunk: &FrequencyChunk, pipeline: &PipelineConfig) -> Result<EvaluationRecord> {
    pipeline.validate()?;
    PreparedChunk::new(chunk, &pipeline.smoothing, &pipeline.library)?.evaluate(
        &pipeline.optimizer,
        &pipeline.divergence,
        pipeline.active_threshold,
    )
}

/// Evaluates every chunk in parallel; records keep the chunk order.
pub fn evaluate_chunks(chunks: &[FrequencyChunk], pipeline: &PipelineConfig) -> Result<Vec<EvaluationRecord>> {
    pipeline.validate()?;
    chunks.par_iter().map(|c| evaluate_chunk(c, pipeline)).collect()
}

/// Scores a swing-equation integration started from the chunk's first raw state.
///
/// Chunk `i` draws its noise from stream `seed + i`.
pub fn baseline_records(
    chunks: &[FrequencyChunk],
    params: &SwingParams,
    seed: u64,
    divergence: &DivergenceBound,
) -> Result<Vec<EvaluationRecord>> {
    params.validate()?;
    divergence.validate()?;
    chunks
        .par_iter()
        .enumerate()
        .map(|(i, chunk)| {
            let raw = to_angular(chunk).omega;
            let traj = euler_maruyama_swing(params, (0.0, raw[0]), chunk.dt, raw.len() - 1, chunk_seed(seed, i))?;
            let bound = divergence.for_series(&raw);
            let stable = traj.omega.iter().chain(&traj.theta).all(|v| v.is_finite())
                && traj.omega.iter().all(|v| v.abs() <= bound);
            let rmse = if stable { Some(rmse(&traj.omega, &raw)?) } else { None };
            Ok(EvaluationRecord {
                chunk_id: chunk.chunk_id.clone(),
                stable,
                rmse,
                n_active_features: 0,
                converged: true,
            })
        })
        .collect()
}

/// Writes `chunk_id,stable,rmse,n_active`; unstable chunks leave `rmse` empty.
pub fn write_records_csv<W: Write>(records: &[EvaluationRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["chunk_id", "stable", "rmse", "n_active"])?;
    for r in records {
        w.write_record([
            r.chunk_id.clone(),
            r.stable.to_string(),
            r.rmse.map(|v| v.to_string()).unwrap_or_default(),
            r.n_active_features.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::Norm;

    fn record(id: &str, rmse: Option<f64>) -> EvaluationRecord {
        EvaluationRecord {
            chunk_id: id.into(),
            stable: rmse.is_some(),
            rmse,
            n_active_features: 2,
            converged: true,
        }
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let r = rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((r - 12.5f64.sqrt()).abs() < 1e-15);
        let offset: Vec<f64> = (0..10).map(|i| i as f64 * 0.1 + 0.01).collect();
        let base: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        assert!((rmse(&offset, &base).unwrap() - 0.01).abs() < 1e-15);
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(Error::Data(_))));
    }

    #[test]
    fn aggregate_examples() {
        let recs = vec![
            record("a", Some(0.01)),
            record("b", Some(0.02)),
            record("c", None),
            record("d", Some(0.03)),
        ];
        let a = aggregate(&recs).unwrap();
        assert!((a.mean_stable_rmse.unwrap() - 0.02).abs() < 1e-15);
        assert_eq!(a.stability_fraction, 0.75);
        assert_eq!(a.n_stable, 3);

        let none = aggregate(&[record("a", None), record("b", None)]).unwrap();
        assert_eq!(none.stability_fraction, 0.0);
        assert_eq!(none.mean_stable_rmse, None);
        let json = serde_json::to_string(&none).unwrap();
        assert!(json.contains("\"mean_stable_rmse\":null"));

        assert!(matches!(aggregate(&[]), Err(Error::Data(_))));
    }

    #[test]
    fn active_feature_count() {
        let c = CoefficientMatrix {
            values: DMatrix::from_column_slice(3, 1, &[1e-7, 1e-5, 0.3]),
            feature_names: vec!["a".into(), "b".into(), "c".into()],
            converged: true,
            iterations: 1,
            relaxed: None,
        };
        assert_eq!(active_features(&c, 1e-6), vec![2]);
        let zero = CoefficientMatrix {
            values: DMatrix::zeros(3, 1),
            ..c
        };
        assert_eq!(active_features(&zero, 1e-12), vec![0]);
    }

    #[test]
    fn records_csv_leaves_unstable_rmse_empty() {
        let mut buf = Vec::new();
        write_records_csv(&[record("a", Some(0.5)), record("b", None)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "chunk_id,stable,rmse,n_active\na,true,0.5,2\nb,false,,2\n");
    }

    #[test]
    fn pipeline_json_defaults() {
        let cfg: PipelineConfig = serde_json::from_str(
            r#"{"smoothing":{"sigma":60},"library":{"poly_degree":2},
                "optimizer":{"method":"sr3","kappa":1e-6,"nu":1,"norm":"l1"}}"#,
        )
        .unwrap();
        assert_eq!(cfg.active_threshold, 1e-6);
        assert_eq!(cfg.divergence, DivergenceBound::default());
        assert_eq!(cfg.optimizer.label(), "sr3_l1");
        assert!(matches!(cfg.optimizer, OptimizerConfig::Sr3 { norm: Norm::L1, .. }));
    }
}
