//! Hyperparameter sweeps over libraries and optimizers.

use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::{aggregate, AggregateReport, DivergenceBound, PreparedChunk};
use crate::ingest::FrequencyChunk;
use crate::library::LibrarySpec;
use crate::preprocess::SmoothingConfig;
use crate::regression::{Norm, OptimizerConfig};

/// `10^lo, 10^(lo+1), ..., 10^hi`.
pub fn decades(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| format!("1e{e}").parse().expect("decade literal")).collect()
}

fn default_max_iter_stlsq() -> usize {
    20
}

fn default_max_iter_lasso() -> usize {
    10_000
}

fn default_max_iter_sr3() -> usize {
    5_000
}

fn default_sr3_tol() -> f64 {
    1e-8
}

fn default_active_threshold() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoGrid {
    pub alpha: Vec<f64>,
    pub tol: Vec<f64>,
    #[serde(default = "default_max_iter_lasso")]
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StlsqGrid {
    pub lambda: Vec<f64>,
    pub alpha: Vec<f64>,
    #[serde(default = "default_max_iter_stlsq")]
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sr3Grid {
    pub kappa: Vec<f64>,
    pub nu: Vec<f64>,
    pub norm: Vec<Norm>,
    #[serde(default = "default_sr3_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter_sr3")]
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub libraries: Vec<LibrarySpec>,
    pub smoothing: SmoothingConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lasso: Option<LassoGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stlsq: Option<StlsqGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sr3: Option<Sr3Grid>,
    #[serde(default)]
    pub divergence: DivergenceBound,
    #[serde(default = "default_active_threshold")]
    pub active_threshold: f64,
}

impl GridSpec {
    /// Full sweep: one point per decade over the standard ranges, all three optimizers.
    pub fn standard(smoothing: SmoothingConfig) -> Self {
        Self {
            libraries: vec![LibrarySpec::p2(), LibrarySpec::p3(), LibrarySpec::p2f1()],
            smoothing,
            lasso: Some(LassoGrid {
                alpha: decades(-10, -3),
                tol: vec![1e-7, 1e-6],
                max_iter: default_max_iter_lasso(),
            }),
            stlsq: Some(StlsqGrid {
                lambda: decades(-10, -3),
                alpha: decades(-3, 1),
                max_iter: default_max_iter_stlsq(),
            }),
            sr3: Some(Sr3Grid {
                kappa: decades(-10, -3),
                nu: decades(-3, 1),
                norm: vec![Norm::L0, Norm::L1, Norm::L2],
                tol: default_sr3_tol(),
                max_iter: default_max_iter_sr3(),
            }),
            divergence: DivergenceBound::default(),
            active_threshold: default_active_threshold(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.libraries.is_empty() {
            return Err(Error::Config("grid needs at least one library".into()));
        }
        for lib in &self.libraries {
            lib.validate()?;
        }
        self.smoothing.validate()?;
        self.divergence.validate()?;
        if self.lasso.is_none() && self.stlsq.is_none() && self.sr3.is_none() {
            return Err(Error::Config("grid lists no optimizer".into()));
        }
        let nonempty = |name: &str, v: &[f64]| {
            if v.is_empty() {
                Err(Error::Config(format!("grid for {name} is empty")))
            } else {
                Ok(())
            }
        };
        if let Some(g) = &self.lasso {
            nonempty("lasso alpha", &g.alpha)?;
            nonempty("lasso tol", &g.tol)?;
        }
        if let Some(g) = &self.stlsq {
            nonempty("stlsq lambda", &g.lambda)?;
            nonempty("stlsq alpha", &g.alpha)?;
        }
        if let Some(g) = &self.sr3 {
            nonempty("sr3 kappa", &g.kappa)?;
            nonempty("sr3 nu", &g.nu)?;
            if g.norm.is_empty() {
                return Err(Error::Config("grid for sr3 norm is empty".into()));
            }
        }
        for (_, candidates) in self.candidates() {
            for c in candidates {
                c.config.validate()?;
            }
        }
        let libs: BTreeSet<String> = self.libraries.iter().map(|l| l.name()).collect();
        if libs.len() != self.libraries.len() {
            return Err(Error::Config("grid lists a library twice".into()));
        }
        Ok(())
    }

    /// Candidate configurations grouped by optimizer label, in output order.
    fn candidates(&self) -> Vec<(String, Vec<Candidate>)> {
        let mut groups = Vec::new();
        if let Some(g) = &self.lasso {
            let mut v = Vec::new();
            for &alpha in &sorted(&g.alpha) {
                for &tol in &sorted(&g.tol) {
                    v.push(Candidate {
                        params: vec![("alpha".into(), alpha), ("tol".into(), tol)],
                        config: OptimizerConfig::Lasso {
                            alpha,
                            tol,
                            max_iter: g.max_iter,
                        },
                    });
                }
            }
            groups.push(("lasso".to_string(), v));
        }
        if let Some(g) = &self.stlsq {
            let mut v = Vec::new();
            for &lambda in &sorted(&g.lambda) {
                for &alpha in &sorted(&g.alpha) {
                    v.push(Candidate {
                        params: vec![("lambda".into(), lambda), ("alpha".into(), alpha)],
                        config: OptimizerConfig::Stlsq {
                            threshold: lambda,
                            alpha,
                            max_iter: g.max_iter,
                        },
                    });
                }
            }
            groups.push(("stlsq".to_string(), v));
        }
        if let Some(g) = &self.sr3 {
            let norms: BTreeSet<Norm> = g.norm.iter().copied().collect();
            for norm in norms {
                let mut v = Vec::new();
                for &kappa in &sorted(&g.kappa) {
                    for &nu in &sorted(&g.nu) {
                        v.push(Candidate {
                            params: vec![("kappa".into(), kappa), ("nu".into(), nu)],
                            config: OptimizerConfig::Sr3 {
                                kappa,
                                nu,
                                norm,
                                tol: g.tol,
                                max_iter: g.max_iter,
                            },
                        });
                    }
                }
                groups.push((format!("sr3_{}", norm.label()), v));
            }
        }
        groups
    }
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

struct Candidate {
    params: Vec<(String, f64)>,
    config: OptimizerConfig,
}

/// Name of the parameter that controls sparsity for an optimizer label.
fn sparsity_param(optimizer: &str) -> &'static str {
    match optimizer {
        "lasso" => "alpha",
        "stlsq" => "lambda",
        _ => "kappa",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub library: String,
    pub optimizer: String,
    /// Swept parameters in declaration order.
    pub params: Vec<(String, f64)>,
    pub config: OptimizerConfig,
    pub report: Option<AggregateReport>,
    /// More than half of the chunk fits hit their iteration limit.
    pub nonconvergence_flag: bool,
    pub error: Option<String>,
}

impl GridRow {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn mean_stable_rmse(&self) -> Option<f64> {
        self.report.as_ref().and_then(|r| r.mean_stable_rmse)
    }

    pub fn stability_fraction(&self) -> Option<f64> {
        self.report.as_ref().map(|r| r.stability_fraction)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
}

/// Evaluates every (library, optimizer, configuration) combination.
pub fn run_grid(chunks: &[FrequencyChunk], spec: &GridSpec) -> Result<GridResult> {
    if chunks.is_empty() {
        return Err(Error::EmptyInput("grid search needs at least one chunk".into()));
    }
    spec.validate()?;
    let groups = spec.candidates();
    let mut rows = Vec::new();
    for library in &spec.libraries {
        let prepared: Vec<PreparedChunk> = chunks
            .par_iter()
            .map(|c| PreparedChunk::new(c, &spec.smoothing, library))
            .collect::<Result<_>>()?;
        for (label, candidates) in &groups {
            let evaluated: Vec<GridRow> = candidates
                .par_iter()
                .map(|cand| {
                    let records = prepared
                        .par_iter()
                        .map(|p| p.evaluate(&cand.config, &spec.divergence, spec.active_threshold))
                        .collect::<Result<Vec<_>>>()
                        .and_then(|r| aggregate(&r));
                    let (report, error) = match records {
                        Ok(r) => (Some(r), None),
                        Err(e) => (None, Some(e.to_string())),
                    };
                    GridRow {
                        library: library.name(),
                        optimizer: label.clone(),
                        params: cand.params.clone(),
                        config: cand.config,
                        nonconvergence_flag: report
                            .as_ref()
                            .is_some_and(|r| 2 * r.n_nonconverged > r.n_chunks),
                        report,
                        error,
                    }
                })
                .collect();
            rows.extend(evaluated);
        }
    }
    Ok(GridResult { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    MinRmse,
    MaxStability,
}

/// Outcome of the selection for one (library, optimizer) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSelection {
    pub library: String,
    pub optimizer: String,
    pub best: Option<GridRow>,
    pub error: Option<String>,
}

/// Picks the best row of every (library, optimizer) group.
///
/// Ties go to the larger sparsity parameter, then to the earlier row.
pub fn best_config(result: &GridResult, criterion: Criterion) -> Result<Vec<GroupSelection>> {
    if result.rows.is_empty() {
        return Err(Error::Selection("grid result has no rows".into()));
    }
    let mut groups: Vec<(String, String)> = Vec::new();
    for r in &result.rows {
        let key = (r.library.clone(), r.optimizer.clone());
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    Ok(groups
        .into_iter()
        .map(|(library, optimizer)| {
            let sparsity = sparsity_param(&optimizer);
            let score = |r: &GridRow| match criterion {
                Criterion::MinRmse => r.mean_stable_rmse(),
                Criterion::MaxStability => r.stability_fraction().map(|s| -s),
            };
            let mut best: Option<(&GridRow, f64)> = None;
            for row in result
                .rows
                .iter()
                .filter(|r| r.library == library && r.optimizer == optimizer)
            {
                let Some(s) = score(row) else { continue };
                let better = match best {
                    None => true,
                    Some((b, bs)) => {
                        s < bs
                            || (s == bs
                                && row.param(sparsity).unwrap_or(0.0) > b.param(sparsity).unwrap_or(0.0))
                    }
                };
                if better {
                    best = Some((row, s));
                }
            }
            match best {
                Some((row, _)) => GroupSelection {
                    library,
                    optimizer,
                    best: Some(row.clone()),
                    error: None,
                },
                None => GroupSelection {
                    error: Some(format!(
                        "selection error: no row of {optimizer}/{library} has a usable metric"
                    )),
                    library,
                    optimizer,
                    best: None,
                },
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatmapMetric {
    Rmse,
    Stability,
}

impl HeatmapMetric {
    pub fn label(self) -> &'static str {
        match self {
            HeatmapMetric::Rmse => "rmse",
            HeatmapMetric::Stability => "stability",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub optimizer: String,
    pub library: String,
    pub metric: HeatmapMetric,
    pub axes: (String, String),
    /// `(x, y, value)`, with `None` for missing metrics.
    pub cells: Vec<(f64, f64, Option<f64>)>,
}

impl Heatmap {
    pub fn file_name(&self) -> String {
        format!("{}_{}_{}.csv", self.optimizer, self.library, self.metric.label())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([self.axes.0.as_str(), self.axes.1.as_str(), self.metric.label()])?;
        for (x, y, v) in &self.cells {
            w.write_record([x.to_string(), y.to_string(), v.map(|v| v.to_string()).unwrap_or_default()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Long-format tables of `metric` over two swept parameters, one per library.
pub fn emit_heatmap(
    result: &GridResult,
    optimizer: &str,
    axes: (&str, &str),
    metric: HeatmapMetric,
) -> Result<Vec<Heatmap>> {
    let rows: Vec<&GridRow> = result.rows.iter().filter(|r| r.optimizer == optimizer).collect();
    if rows.is_empty() {
        return Err(Error::Config(format!("grid result has no {optimizer} rows")));
    }
    if axes.0 == axes.1 {
        return Err(Error::Config("heatmap axes must differ".into()));
    }
    let mut libraries: Vec<String> = Vec::new();
    for r in &rows {
        if !libraries.contains(&r.library) {
            libraries.push(r.library.clone());
        }
    }
    libraries
        .into_iter()
        .map(|library| {
            let group: Vec<&&GridRow> = rows.iter().filter(|r| r.library == library).collect();
            let mut cells = Vec::new();
            for r in &group {
                let (Some(x), Some(y)) = (r.param(axes.0), r.param(axes.1)) else {
                    return Err(Error::Config(format!(
                        "{optimizer} has no parameters ({}, {})",
                        axes.0, axes.1
                    )));
                };
                let value = match metric {
                    HeatmapMetric::Rmse => r.mean_stable_rmse(),
                    HeatmapMetric::Stability => r.stability_fraction(),
                };
                cells.push((x, y, value));
            }
            for (name, pick) in [(axes.0, 0usize), (axes.1, 1)] {
                let distinct: BTreeSet<u64> = cells
                    .iter()
                    .map(|c| if pick == 0 { c.0 } else { c.1 }.to_bits())
                    .collect();
                if distinct.len() < 2 {
                    return Err(Error::Config(format!("heatmap axis {name} does not vary")));
                }
            }
            Ok(Heatmap {
                optimizer: optimizer.to_string(),
                library,
                metric,
                axes: (axes.0.to_string(), axes.1.to_string()),
                cells,
            })
        })
        .collect()
}

const PARAM_COLUMNS: [&str; 5] = ["alpha", "lambda", "tol", "kappa", "nu"];

/// One CSV row per grid row; parameters an optimizer does not use are left empty.
pub fn write_grid_csv<W: Write>(result: &GridResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["library", "optimizer"];
    header.extend(PARAM_COLUMNS);
    header.extend([
        "mean_stable_rmse",
        "rmse_std",
        "stability_fraction",
        "mean_active_features",
        "n_chunks",
        "n_stable",
        "n_nonconverged",
        "nonconvergence_flag",
        "error",
    ]);
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in &result.rows {
        let mut rec = vec![r.library.clone(), r.optimizer.clone()];
        rec.extend(PARAM_COLUMNS.iter().map(|p| opt(r.param(p))));
        let rep = r.report.as_ref();
        rec.push(opt(rep.and_then(|x| x.mean_stable_rmse)));
        rec.push(opt(rep.and_then(|x| x.rmse_std)));
        rec.push(opt(rep.map(|x| x.stability_fraction)));
        rec.push(opt(rep.map(|x| x.mean_active_features)));
        rec.push(rep.map(|x| x.n_chunks.to_string()).unwrap_or_default());
        rec.push(rep.map(|x| x.n_stable.to_string()).unwrap_or_default());
        rec.push(rep.map(|x| x.n_nonconverged.to_string()).unwrap_or_default());
        rec.push(r.nonconvergence_flag.to_string());
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
