//! Acceptance experiments. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use gridsindy::evaluate::{fit_chunk, PipelineConfig};
use gridsindy::gridsearch::{run_grid, GridRow, GridSpec};
use gridsindy::ingest::FrequencyChunk;
use gridsindy::library::{feature_count, FeatureMatrix, Library, LibrarySpec};
use gridsindy::preprocess::{optimize_sigma, SmoothingConfig};
use gridsindy::regression::{
    fit, lasso, ridge_solve, sr3_with_objective, stlsq, xi_step, Norm, OptimizerConfig,
};
use gridsindy::simulate::{
    euler_maruyama_swing, generate_synthetic_dataset, simulate_model, Model, SwingParams, SyntheticConfig,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Check = Result<(bool, String), String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

const C_OMEGA: f64 = 0.5;
const C_THETA: f64 = 0.2;

/// Noiseless batch sampled every 0.05 s so finite differences resolve the dynamics.
fn noiseless_batch() -> Result<Vec<FrequencyChunk>, String> {
    let mut cfg = SyntheticConfig::new(SwingParams::new(C_OMEGA, C_THETA, 0.0), 50);
    cfg.dt = 0.05;
    cfg.substeps = 100;
    cfg.omega0 = [0.1, 0.5];
    generate_synthetic_dataset(&cfg, 1).map_err(err)
}

/// ε = 0.05 batch on the 1 s grid of recorded data.
fn noisy_batch() -> Result<Vec<FrequencyChunk>, String> {
    let mut cfg = SyntheticConfig::new(SwingParams::new(C_OMEGA, C_THETA, 0.05), 50);
    cfg.substeps = 10;
    cfg.omega0 = [0.1, 0.5];
    generate_synthetic_dataset(&cfg, 7).map_err(err)
}

/// Counts chunks whose ω̇ equation has exactly the {θ, ω} support, and the
/// worst relative coefficient error among them.
fn recovery(chunks: &[FrequencyChunk], pipeline: &PipelineConfig, threshold: f64) -> Result<(usize, f64), String> {
    let mut hits = 0;
    let mut worst: f64 = 0.0;
    for chunk in chunks {
        let (_, coeffs) = fit_chunk(chunk, pipeline).map_err(err)?;
        let col = coeffs.column(0);
        let active: Vec<&str> = coeffs
            .feature_names
            .iter()
            .zip(&col)
            .filter(|(_, v)| v.abs() >= threshold)
            .map(|(n, _)| n.as_str())
            .collect();
        if active == ["theta", "omega"] {
            let rel = ((col[1] + C_THETA).abs() / C_THETA).max((col[2] + C_OMEGA).abs() / C_OMEGA);
            if rel <= 0.1 {
                hits += 1;
            }
            worst = worst.max(rel);
        }
    }
    Ok((hits, worst))
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn synthetic_recovery() -> Check {
    let start = Instant::now();
    let chunks = noiseless_batch()?;
    let pipeline = PipelineConfig::new(
        SmoothingConfig::new(1e-4),
        LibrarySpec::p2(),
        OptimizerConfig::stlsq(1e-3, 1e-6),
    );
    let mut exact = 0;
    let mut worst: f64 = 0.0;
    for chunk in &chunks {
        let (_, coeffs) = fit_chunk(chunk, &pipeline).map_err(err)?;
        let col = coeffs.column(0);
        let support: Vec<usize> = (0..col.len()).filter(|&j| col[j].abs() >= 1e-3).collect();
        let rel = ((col[1] + C_THETA).abs() / C_THETA).max((col[2] + C_OMEGA).abs() / C_OMEGA);
        if support == [1, 2] && rel <= 1e-3 {
            exact += 1;
        }
        worst = worst.max(rel);
    }
    let elapsed = start.elapsed();
    Ok((
        exact == 50 && secs(elapsed) < 10.0,
        format!(
            "{exact}/50 chunks with support {{theta, omega}}, worst relative error {worst:.2e} (limit 1e-3), {:.1} s (limit 10 s)",
            secs(elapsed)
        ),
    ))
}

fn noisy_recovery() -> Check {
    let start = Instant::now();
    let chunks = noisy_batch()?;
    let pipeline = PipelineConfig::new(SmoothingConfig::new(60.0), LibrarySpec::p2(), OptimizerConfig::lasso(1e-6));
    let (hits, _) = recovery(&chunks, &pipeline, pipeline.active_threshold)?;
    let elapsed = start.elapsed();
    Ok((
        hits >= 45 && secs(elapsed) < 30.0,
        format!(
            "{hits}/50 chunks with support {{theta, omega}} and coefficients within 10% (need 45), {:.1} s (limit 30 s)",
            secs(elapsed)
        ),
    ))
}

/// Deterministic well-conditioned design with an intercept.
fn conditioned_problem() -> (FeatureMatrix, DMatrix<f64>) {
    let n = 300;
    let values = DMatrix::from_fn(n, 5, |i, j| {
        let t = i as f64;
        match j {
            0 => 1.0,
            1 => (0.1 * t).sin(),
            2 => (0.037 * t).cos(),
            3 => ((i % 13) as f64 - 6.0) / 6.0,
            _ => (0.23 * t).sin() * (0.011 * t).cos(),
        }
    });
    let y = DMatrix::from_fn(n, 1, |i, _| {
        let t = i as f64;
        0.4 - 1.3 * (0.1 * t).sin() + 0.8 * (0.037 * t).cos() + 0.05 * (0.71 * t).sin()
    });
    let names = ["1", "a", "b", "c", "d"].map(String::from).to_vec();
    (FeatureMatrix::new(values, names).unwrap(), y)
}

fn optimizer_cross_checks() -> Check {
    let (theta, y) = conditioned_problem();
    let ols = ridge_solve(&theta, &y, 0.0).map_err(err)?;
    let cfg = OptimizerConfig::Lasso {
        alpha: 1e-9,
        tol: 1e-12,
        max_iter: 200_000,
    };
    let l = lasso(&theta, &y, &cfg).map_err(err)?;
    let lasso_rel = l
        .column(0)
        .iter()
        .zip(ols.column(0))
        .map(|(a, b)| (a - b).abs() / b.abs())
        .fold(0.0, f64::max);

    let ridge = ridge_solve(&theta, &y, 1e-3).map_err(err)?;
    let st = stlsq(&theta, &y, &OptimizerConfig::stlsq(0.0, 1e-3)).map_err(err)?;
    let bitwise = st.values.iter().zip(ridge.values.iter()).all(|(a, b)| a.to_bits() == b.to_bits());

    let (relaxed, _) = sr3_with_objective(&theta, &y, &OptimizerConfig::sr3(0.0, 1.0, Norm::L1)).map_err(err)?;
    let step = xi_step(&theta, &y, 1.0, &relaxed.values).map_err(err)?;
    let sr3_gap = (step - &relaxed.values).amax();

    Ok((
        lasso_rel <= 1e-4 && bitwise && sr3_gap <= 1e-8,
        format!(
            "lasso(1e-9) vs OLS max relative {lasso_rel:.2e} (limit 1e-4); stlsq(0) bit-identical to ridge: {bitwise}; sr3(kappa 0) vs relaxed step {sr3_gap:.2e} (limit 1e-8)"
        ),
    ))
}

fn sr3_norms_agree() -> Check {
    let chunks = noiseless_batch()?;
    let mut same_support = 0;
    let mut worst: f64 = 0.0;
    for chunk in &chunks {
        let pipe = |norm| PipelineConfig::new(SmoothingConfig::new(1e-4), LibrarySpec::p2(), OptimizerConfig::sr3(1e-6, 1.0, norm));
        let (_, a) = fit_chunk(chunk, &pipe(Norm::L0)).map_err(err)?;
        let (_, b) = fit_chunk(chunk, &pipe(Norm::L1)).map_err(err)?;
        let sa: Vec<bool> = a.values.iter().map(|v| *v != 0.0).collect();
        let sb: Vec<bool> = b.values.iter().map(|v| *v != 0.0).collect();
        if sa == sb {
            same_support += 1;
        }
        worst = worst.max((&a.values - &b.values).amax());
    }
    Ok((
        same_support == 50 && worst <= 1e-10,
        format!("{same_support}/50 chunks with identical L0/L1 supports, max coefficient difference {worst:.2e} (limit 1e-10)"),
    ))
}

fn library_cardinalities() -> Check {
    let counts: Vec<usize> = [LibrarySpec::p2(), LibrarySpec::p3(), LibrarySpec::p2f1()]
        .iter()
        .map(|s| feature_count(s, 3))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let listed = [
        "1", "theta", "omega", "T", "theta^2", "theta omega", "theta T", "omega^2", "omega T", "T^2",
        "sin(theta)", "cos(theta)", "sin(omega)", "cos(omega)", "sin(T)", "cos(T)",
    ];
    let names = Library::new(LibrarySpec::p2f1()).map_err(err)?.names();
    let matches = names == listed;
    Ok((
        counts == [10, 20, 16] && matches,
        format!("p2/p3/p2f1 sizes {counts:?} (expected [10, 20, 16]); p2f1 terms match the published listing: {matches}"),
    ))
}

fn sigma_sweep_shape() -> Check {
    let start = Instant::now();
    let chunks = noisy_batch()?;
    let pipeline = PipelineConfig::new(SmoothingConfig::new(1.0), LibrarySpec::p2(), OptimizerConfig::lasso(1e-6));
    let sweep = optimize_sigma(&chunks, &[1.0, 20.0, 60.0, 200.0, 500.0], &pipeline).map_err(err)?;
    let elapsed = start.elapsed();
    let rmse: Vec<f64> = sweep.rows.iter().map(|r| r.mean_rmse).collect();
    let (first, last) = (rmse[0], rmse[rmse.len() - 1]);
    let best = rmse.iter().copied().fold(f64::INFINITY, f64::min);
    let interior = sweep.best_sigma != 1.0 && sweep.best_sigma != 500.0;
    let table = sweep
        .rows
        .iter()
        .map(|r| format!("{}:{:.6}", r.sigma, r.mean_rmse))
        .collect::<Vec<_>>()
        .join(" ");
    Ok((
        interior && first > best && last > best && secs(elapsed) < 60.0,
        format!(
            "argmin sigma {} over [{table}], {:.1} s (limit 60 s)",
            sweep.best_sigma,
            secs(elapsed)
        ),
    ))
}

/// Stability along `first` for every fixed value of the other parameters;
/// returns the offending series.
fn non_monotone_series(rows: &[&GridRow], first: &str) -> Vec<String> {
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        let key: Vec<String> = r
            .params
            .iter()
            .filter(|(n, _)| n != first)
            .map(|(n, v)| format!("{n}={v:e}"))
            .collect();
        let key = format!("{} {}", r.optimizer, key.join(","));
        if let (Some(x), Some(s)) = (r.param(first), r.stability_fraction()) {
            series.entry(key).or_default().push((x, s));
        }
    }
    let mut bad = Vec::new();
    for (key, mut points) in series {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let drops: Vec<f64> = points
            .windows(2)
            .map(|w| w[0].1 - w[1].1)
            .filter(|d| *d > 0.0)
            .collect();
        let ok = drops.is_empty() || (drops.len() == 1 && drops[0] <= 0.02 + 1e-12);
        if !ok {
            let values: Vec<String> = points.iter().map(|p| format!("{:.2}", p.1)).collect();
            bad.push(format!("{key}: [{}]", values.join(" ")));
        }
    }
    bad
}

fn regularization_trend() -> Check {
    let chunks = noisy_batch()?;
    let mut spec = GridSpec::standard(SmoothingConfig::new(60.0));
    spec.libraries = vec![LibrarySpec::p3()];
    spec.lasso = None;
    let result = run_grid(&chunks, &spec).map_err(err)?;
    let stlsq: Vec<&GridRow> = result.rows.iter().filter(|r| r.optimizer == "stlsq").collect();
    let sr3: Vec<&GridRow> = result.rows.iter().filter(|r| r.optimizer.starts_with("sr3")).collect();
    let mut bad = non_monotone_series(&stlsq, "lambda");
    bad.extend(non_monotone_series(&sr3, "kappa"));
    let total = 5 + 15;
    let shown = bad.iter().take(2).cloned().collect::<Vec<_>>().join("; ");
    Ok((
        bad.is_empty(),
        format!(
            "{}/{total} stability series non-decreasing in lambda / kappa (one drop <= 0.02 allowed){}",
            total - bad.len(),
            if shown.is_empty() { String::new() } else { format!("; e.g. {shown}") }
        ),
    ))
}

fn cli(args: &[&str]) -> Result<(), String> {
    let mut full = vec!["gridsindy"];
    full.extend_from_slice(args);
    match gridsindy_cli::execute(full) {
        0 => Ok(()),
        code => Err(format!("`gridsindy {}` exited with {code}", args.join(" "))),
    }
}

fn write_json(path: &Path, value: &Value) -> Result<String, String> {
    std::fs::write(path, serde_json::to_string_pretty(value).map_err(err)?).map_err(err)?;
    Ok(path.to_string_lossy().into_owned())
}

fn baseline_consistency() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let params = json!({"c_omega": C_OMEGA, "c_theta": C_THETA, "epsilon": 0.0});
    let cfg = write_json(
        &dir.path().join("run.json"),
        &json!({"synthetic": {"params": params, "n_chunks": 50, "omega0": [0.1, 0.5]}, "swing": params}),
    )?;
    let syn = dir.path().join("syn");
    let base = dir.path().join("base");
    cli(&["synth", "--config", &cfg, "--seed", "3", "--out", &syn.to_string_lossy()])?;
    let store = syn.join("chunks.csv");
    cli(&["baseline", "--config", &cfg, "--input", &store.to_string_lossy(), "--out", &base.to_string_lossy()])?;
    let report: Value = serde_json::from_slice(&std::fs::read(base.join("aggregate.json")).map_err(err)?).map_err(err)?;
    let rmse = report["mean_stable_rmse"].as_f64().ok_or("baseline had no stable chunk")?;

    // Euler–Maruyama at ε = 0 against RK4 of the same linear model over 900 unit steps
    let mut coeffs = vec![0.0; 10];
    coeffs[1] = -C_THETA;
    coeffs[2] = -C_OMEGA;
    let model = Model::new(LibrarySpec::p2(), coeffs).map_err(err)?;
    let rk = simulate_model(&model, (0.0, 1.0), 1.0, 900, 1e6).map_err(err)?;
    let em = euler_maruyama_swing(&SwingParams::new(C_OMEGA, C_THETA, 0.0), (0.0, 1.0), 1.0, 900, 0).map_err(err)?;
    let gap = em
        .omega
        .iter()
        .zip(&rk.trajectory.omega)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok((
        rmse < 5e-3 && gap < 5e-3,
        format!("matched baseline RMSE {rmse:.2e} (limit 5e-3); Euler-Maruyama vs RK4 over 900 unit steps max |d omega| {gap:.2e} (limit 5e-3)"),
    ))
}

fn dir_contents(root: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).map_err(err)? {
            let path = entry.map_err(err)?.path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let name = path.strip_prefix(root).map_err(err)?.to_string_lossy().into_owned();
            let mut bytes = std::fs::read(&path).map_err(err)?;
            if name == "manifest.json" {
                let mut v: Value = serde_json::from_slice(&bytes).map_err(err)?;
                v.as_object_mut().ok_or("manifest is not an object")?.remove("created_at");
                bytes = serde_json::to_vec(&v).map_err(err)?;
            }
            files.insert(name, bytes);
        }
    }
    Ok(files)
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let cfg = write_json(
        &dir.path().join("run.json"),
        &json!({
            "synthetic": {"params": {"c_omega": C_OMEGA, "c_theta": C_THETA, "epsilon": 0.05}, "n_chunks": 6, "omega0": [0.1, 0.5]},
            "smoothing": {"sigma": 20},
            "library": {"poly_degree": 2},
            "optimizer": {"method": "sr3", "kappa": 1e-4, "nu": 1.0, "norm": "l1"},
            "sigma_candidates": [1, 20, 60],
            "swing": {"c_omega": C_OMEGA, "c_theta": C_THETA, "epsilon": 0.05},
            "grid": {
                "libraries": [{"poly_degree": 2}, {"poly_degree": 2, "fourier_order": 1}],
                "smoothing": {"sigma": 20},
                "lasso": {"alpha": [1e-6, 1e-4], "tol": [1e-7, 1e-6]},
                "stlsq": {"lambda": [1e-4, 1e-3], "alpha": [1e-3, 1e-1]}
            }
        }),
    )?;
    let seed_store = dir.path().join("seed");
    cli(&["synth", "--config", &cfg, "--seed", "21", "--out", &seed_store.to_string_lossy()])?;
    let store = seed_store.join("chunks.csv").to_string_lossy().into_owned();
    let raw = seed_store.join("frequency.csv").to_string_lossy().into_owned();

    let commands: [(&str, Vec<&str>); 7] = [
        ("ingest", vec!["--input", &raw]),
        ("synth", vec!["--seed", "21"]),
        ("sigma-sweep", vec!["--input", &store]),
        ("fit", vec!["--input", &store]),
        ("evaluate", vec!["--input", &store]),
        ("grid", vec!["--input", &store]),
        ("baseline", vec!["--input", &store, "--seed", "4"]),
    ];
    let mut differing = Vec::new();
    for (name, extra) in &commands {
        let mut outputs = Vec::new();
        for (run, jobs) in [("a", "1"), ("b", "4")] {
            let out = dir.path().join(format!("{name}-{run}"));
            let out_s = out.to_string_lossy().into_owned();
            let mut args = vec![*name, "--config", &cfg, "--out", &out_s, "--jobs", jobs];
            args.extend(extra.iter().copied());
            cli(&args)?;
            outputs.push(dir_contents(&out)?);
        }
        if outputs[0] != outputs[1] || outputs[0].is_empty() {
            differing.push(*name);
        }
    }
    Ok((
        differing.is_empty(),
        format!(
            "{}/7 commands byte-identical across reruns (manifest timestamp excluded){}",
            7 - differing.len(),
            if differing.is_empty() { String::new() } else { format!("; differing: {differing:?}") }
        ),
    ))
}

fn random_problem(rng: &mut ChaCha8Rng, intercept: bool) -> (FeatureMatrix, DMatrix<f64>) {
    let rows = rng.random_range(30..120);
    let cols = rng.random_range(2..8);
    let values = DMatrix::from_fn(rows, cols, |_, j| if intercept && j == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
    let truth = DMatrix::from_fn(cols, 1, |_, _| if rng.random_bool(0.5) { rng.random_range(-2.0..2.0) } else { 0.0 });
    let noise = DMatrix::from_fn(rows, 1, |_, _| 0.05 * rng.random_range(-1.0..1.0));
    let y = &values * truth + noise;
    let names = (0..cols)
        .map(|j| if intercept && j == 0 { "1".to_string() } else { format!("x{j}") })
        .collect();
    (FeatureMatrix::new(values, names).unwrap(), y)
}

fn regression_invariants() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures: BTreeMap<&str, usize> = BTreeMap::new();
    let mut note = |name: &'static str, ok: bool| {
        *failures.entry(name).or_insert(0) += usize::from(!ok);
    };

    for _ in 0..100 {
        let with_intercept = rng.random_bool(0.5);
        let (theta, y) = random_problem(&mut rng, with_intercept);
        let lambda = rng.random_range(0.01..1.0);
        let c = stlsq(&theta, &y, &OptimizerConfig::stlsq(lambda, 1e-3)).map_err(err)?;
        let intercept = theta.intercept();
        let ok = c
            .column(0)
            .iter()
            .enumerate()
            .all(|(j, v)| Some(j) == intercept || *v == 0.0 || v.abs() >= lambda);
        note("stlsq floor", ok);
    }

    for _ in 0..100 {
        let with_intercept = rng.random_bool(0.5);
        let (theta, y) = random_problem(&mut rng, with_intercept);
        let alpha = rng.random_range(0.01..20.0);
        let tol = 1e-9;
        let c = lasso(&theta, &y, &OptimizerConfig::Lasso { alpha, tol, max_iter: 200_000 }).map_err(err)?;
        let coef = c.column(0);
        let n = theta.nrows() as f64;
        let residual = &y - &theta.values * DMatrix::from_column_slice(coef.len(), 1, &coef);
        let mut ok = c.converged;
        for j in 0..theta.ncols() {
            if with_intercept && j == 0 {
                continue;
            }
            let col = theta.values.column(j);
            let mean = if with_intercept { col.sum() / n } else { 0.0 };
            let scale = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            let grad: f64 = col.iter().zip(residual.iter()).map(|(x, r)| (x - mean) / scale * r).sum();
            let slack = if coef[j] != 0.0 {
                (grad - alpha / 2.0 * coef[j].signum()).abs()
            } else {
                (grad.abs() - alpha / 2.0).max(0.0)
            };
            ok &= slack / n <= 10.0 * tol;
        }
        note("lasso kkt", ok);
    }

    for i in 0..100 {
        let with_intercept = rng.random_bool(0.5);
        let (theta, y) = random_problem(&mut rng, with_intercept);
        let norm = [Norm::L0, Norm::L1, Norm::L2][i % 3];
        let cfg = OptimizerConfig::Sr3 {
            kappa: rng.random_range(1e-4..1.0),
            nu: rng.random_range(0.01..10.0),
            norm,
            tol: 1e-10,
            max_iter: 500,
        };
        let (_, trace) = sr3_with_objective(&theta, &y, &cfg).map_err(err)?;
        let ok = trace[0].windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        note("sr3 monotone", ok);
    }

    for i in 0..100 {
        let norm = [Norm::L0, Norm::L1, Norm::L2][i % 3];
        let x: f64 = rng.random_range(-5.0..5.0);
        let r: f64 = rng.random_range(1e-4..4.0);
        let closed = match norm {
            Norm::L0 => {
                if x.abs() >= (2.0 * r).sqrt() {
                    x
                } else {
                    0.0
                }
            }
            Norm::L1 => x.signum() * (x.abs() - r).max(0.0),
            Norm::L2 => x / (1.0 + 2.0 * r),
        };
        note("prox closed form", norm.prox(x, r) == closed);
    }

    // deterministic refits on one more instance
    let (theta, y) = random_problem(&mut rng, true);
    for cfg in [OptimizerConfig::stlsq(0.1, 1e-3), OptimizerConfig::lasso(0.1), OptimizerConfig::sr3(0.01, 1.0, Norm::L0)] {
        note("determinism", fit(&theta, &y, &cfg).map_err(err)?.values == fit(&theta, &y, &cfg).map_err(err)?.values);
    }

    let failed: usize = failures.values().sum();
    let summary = failures
        .iter()
        .map(|(k, v)| format!("{k}: {v} failures"))
        .collect::<Vec<_>>()
        .join(", ");
    Ok((failed == 0, format!("100 random instances per suite; {summary}")))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("synthetic recovery", synthetic_recovery),
        ("noisy recovery with smoothing", noisy_recovery),
        ("optimizer cross-checks", optimizer_cross_checks),
        ("SR3 L0/L1 agreement", sr3_norms_agree),
        ("library cardinalities", library_cardinalities),
        ("sigma sweep shape", sigma_sweep_shape),
        ("regularization-stability trend", regularization_trend),
        ("baseline consistency", baseline_consistency),
        ("determinism", determinism),
        ("regression invariants", regression_invariants),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        if !pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            secs(start.elapsed())
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
