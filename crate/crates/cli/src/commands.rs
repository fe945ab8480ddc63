use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use gridsindy::evaluate::{aggregate, baseline_records, evaluate_chunks, fit_chunk, write_records_csv, PipelineConfig};
use gridsindy::gridsearch::{best_config, emit_heatmap, run_grid, write_grid_csv, Criterion, HeatmapMetric};
use gridsindy::ingest::{
    parse_frequency_csv, read_chunk_store, segment_chunks, write_chunk_store, write_frequency_csv, FrequencyChunk,
    IngestSummary,
};
use gridsindy::preprocess::{optimize_sigma, write_sigma_csv, SmoothingConfig};
use gridsindy::regression::FittedModel;
use gridsindy::simulate::{generate_synthetic_trajectories, write_trajectories};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{require, HeatmapRequest, RunConfig};
use crate::Failure;

/// Where a command writes and what it records about itself.
pub struct Context {
    pub command: &'static str,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub config: RunConfig,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: Option<u64>,
    config: &'a RunConfig,
    outputs: Vec<String>,
    created_at: String,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, Failure> {
        let path = self.path(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
        }
        Ok(BufWriter::new(File::create(&path).map_err(|e| io_failure(&path, e))?))
    }

    fn write_json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<(), Failure> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Data(e.to_string()))?;
        writeln!(w).and_then(|_| w.flush()).map_err(|e| io_failure(&self.path(name), e))
    }

    fn write_with(
        &self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> gridsindy::Result<()>,
    ) -> Result<(), Failure> {
        let mut w = self.create(name)?;
        f(&mut w)?;
        w.flush().map_err(|e| io_failure(&self.path(name), e))
    }

    fn finish(&self, outputs: Vec<String>) -> Result<(), Failure> {
        let manifest = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            seed: self.seed,
            config: &self.config,
            outputs,
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        };
        self.write_json("manifest.json", &manifest)
    }

    fn chunks(&self) -> Result<Vec<FrequencyChunk>, Failure> {
        let path = self.config.input()?;
        let file = File::open(path).map_err(|e| io_failure(path, e))?;
        Ok(read_chunk_store(file)?)
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

pub fn ingest(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.config;
    let path = cfg.input()?;
    let file = File::open(path).map_err(|e| io_failure(path, e))?;
    let parsed = parse_frequency_csv(file, &cfg.columns)?;
    let segmentation = segment_chunks(&parsed.samples, cfg.chunk_len, cfg.f_ref)?;
    let summary = IngestSummary {
        rows_read: parsed.rows_read,
        rows_dropped: parsed.rows_dropped,
        chunks_emitted: segmentation.chunks.len(),
        chunks_skipped: segmentation.skipped,
    };
    ctx.write_json("summary.json", &summary)?;
    if segmentation.chunks.is_empty() {
        return Err(Failure::Data(format!(
            "no complete {}-sample window in {}",
            cfg.chunk_len,
            path.display()
        )));
    }
    ctx.write_with("chunks.csv", |w| write_chunk_store(&segmentation.chunks, w))?;
    eprintln!(
        "{} chunks from {} rows ({} dropped, {} windows incomplete)",
        summary.chunks_emitted, summary.rows_read, summary.rows_dropped, summary.chunks_skipped
    );
    ctx.finish(vec!["chunks.csv".into(), "summary.json".into()])
}

pub fn synth(ctx: &Context) -> Result<(), Failure> {
    let seed = ctx
        .seed
        .ok_or_else(|| Failure::Config("synth needs --seed".into()))?;
    let synthetic = require(ctx.config.synthetic.clone(), "synthetic")?;
    if synthetic.dt != 1.0 {
        return Err(Failure::Config(format!(
            "synthetic recordings are written on the 1 s grid, got dt = {}",
            synthetic.dt
        )));
    }
    let rows = generate_synthetic_trajectories(&synthetic, seed)?;
    let chunks: Vec<FrequencyChunk> = rows.iter().map(|(c, _)| c.clone()).collect();
    ctx.write_with("frequency.csv", |w| write_frequency_csv(&chunks, w))?;
    ctx.write_with("chunks.csv", |w| write_chunk_store(&chunks, w))?;
    ctx.write_with("trajectories.csv", |w| {
        write_trajectories(rows.iter().map(|(c, t)| (c.chunk_id.as_str(), t)), w)
    })?;
    ctx.finish(vec!["frequency.csv".into(), "chunks.csv".into(), "trajectories.csv".into()])
}

pub fn sigma_sweep(ctx: &Context, sigmas: Option<Vec<f64>>) -> Result<(), Failure> {
    let cfg = &ctx.config;
    let candidates = sigmas
        .or_else(|| cfg.sigma_candidates.clone())
        .ok_or_else(|| Failure::Config("no sigma candidates (--sigmas or \"sigma_candidates\")".into()))?;
    let first = *candidates
        .first()
        .ok_or_else(|| Failure::Config("sigma candidate list is empty".into()))?;
    let pipeline = PipelineConfig {
        divergence: cfg.divergence,
        active_threshold: cfg.active_threshold,
        ..PipelineConfig::new(
            cfg.smoothing.unwrap_or(SmoothingConfig::new(first)),
            require(cfg.library, "library")?,
            require(cfg.optimizer, "optimizer")?,
        )
    };
    pipeline.validate()?;
    let chunks = ctx.chunks()?;
    let sweep = optimize_sigma(&chunks, &candidates, &pipeline)?;
    ctx.write_with("sigma.csv", |w| write_sigma_csv(&sweep, w))?;
    ctx.write_json("sigma.json", &sweep)?;
    eprintln!("best sigma {} s", sweep.best_sigma);
    ctx.finish(vec!["sigma.csv".into(), "sigma.json".into()])
}

fn model_file(chunk_id: &str) -> String {
    let safe: String = chunk_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    format!("models/{safe}.json")
}

pub fn fit(ctx: &Context) -> Result<(), Failure> {
    let pipeline = ctx.config.pipeline()?;
    let chunks = ctx.chunks()?;
    let models = chunks
        .par_iter()
        .map(|c| {
            let (_, coeffs) = fit_chunk(c, &pipeline)?;
            Ok(FittedModel::new(&c.chunk_id, pipeline.library, &coeffs, pipeline.optimizer))
        })
        .collect::<gridsindy::Result<Vec<_>>>()?;
    let mut outputs = Vec::new();
    for m in &models {
        let name = model_file(&m.chunk_id);
        ctx.write_json(&name, m)?;
        outputs.push(name);
    }
    ctx.finish(outputs)
}

pub fn evaluate(ctx: &Context) -> Result<(), Failure> {
    let pipeline = ctx.config.pipeline()?;
    let chunks = ctx.chunks()?;
    let records = evaluate_chunks(&chunks, &pipeline)?;
    let report = aggregate(&records)?;
    ctx.write_with("records.csv", |w| write_records_csv(&records, w))?;
    ctx.write_json("aggregate.json", &report)?;
    ctx.finish(vec!["records.csv".into(), "aggregate.json".into()])
}

/// Heatmaps over each optimizer's two swept parameters.
fn default_heatmaps() -> Vec<HeatmapRequest> {
    [
        ("lasso", "alpha", "tol"),
        ("stlsq", "lambda", "alpha"),
        ("sr3_l0", "kappa", "nu"),
        ("sr3_l1", "kappa", "nu"),
        ("sr3_l2", "kappa", "nu"),
    ]
    .into_iter()
    .map(|(o, x, y)| HeatmapRequest {
        optimizer: o.into(),
        x: x.into(),
        y: y.into(),
        metric: None,
    })
    .collect()
}

pub fn grid(ctx: &Context) -> Result<(), Failure> {
    let spec = require(ctx.config.grid.clone(), "grid")?;
    spec.validate()?;
    let chunks = ctx.chunks()?;
    let result = run_grid(&chunks, &spec)?;
    let mut outputs = vec!["grid.csv".to_string(), "grid.json".to_string()];
    ctx.write_with("grid.csv", |w| write_grid_csv(&result, w))?;
    ctx.write_json("grid.json", &result)?;
    for (criterion, name) in [(Criterion::MinRmse, "best_min_rmse.json"), (Criterion::MaxStability, "best_max_stability.json")] {
        ctx.write_json(name, &best_config(&result, criterion)?)?;
        outputs.push(name.into());
    }

    // Explicit requests must succeed; the defaults skip optimizers whose
    // grid does not span two axes.
    let (requests, strict) = match &ctx.config.heatmaps {
        Some(r) => (r.clone(), true),
        None => (default_heatmaps(), false),
    };
    for req in requests {
        let metrics = match req.metric {
            Some(m) => vec![m],
            None => vec![HeatmapMetric::Rmse, HeatmapMetric::Stability],
        };
        for metric in metrics {
            match emit_heatmap(&result, &req.optimizer, (&req.x, &req.y), metric) {
                Ok(maps) => {
                    for map in maps {
                        let name = format!("heatmaps/{}", map.file_name());
                        ctx.write_with(&name, |w| map.write_csv(w))?;
                        outputs.push(name);
                    }
                }
                Err(e) if strict || !e.is_config() => return Err(e.into()),
                Err(_) => {}
            }
        }
    }
    ctx.finish(outputs)
}

pub fn baseline(ctx: &Context) -> Result<(), Failure> {
    let params = require(ctx.config.swing.clone(), "swing")?;
    let seed = match ctx.seed {
        Some(s) => s,
        None if params.epsilon == 0.0 => 0,
        None => return Err(Failure::Config("a noisy baseline needs --seed".into())),
    };
    let chunks = ctx.chunks()?;
    let records = baseline_records(&chunks, &params, seed, &ctx.config.divergence)?;
    let report = aggregate(&records)?;
    ctx.write_with("records.csv", |w| write_records_csv(&records, w))?;
    ctx.write_json("aggregate.json", &report)?;
    ctx.finish(vec!["records.csv".into(), "aggregate.json".into()])
}
