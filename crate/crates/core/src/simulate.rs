//! Forward simulation of identified models and of the stochastic swing equation.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{chunk_label, frequency_from_omega, validate_f_ref, FrequencyChunk};
use crate::library::{Library, LibrarySpec};
use crate::preprocess::{time_axis, StateTrajectory};
use crate::regression::CoefficientMatrix;

/// Start of the synthetic time axis: 2024-01-01T00:00:00Z.
pub const SYNTHETIC_EPOCH: i64 = 1_704_067_200;

/// Absolute floor of the divergence bound in rad/s.
pub const MIN_DIVERGENCE_BOUND: f64 = 10.0;

/// `ΔP` takes `value` from `start` seconds onward, until the next step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerStep {
    pub start: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwingParams {
    pub c_omega: f64,
    pub c_theta: f64,
    #[serde(default)]
    pub epsilon: f64,
    /// Piecewise-constant power imbalance; zero before the first step.
    #[serde(default)]
    pub delta_p: Vec<PowerStep>,
}

impl SwingParams {
    pub fn new(c_omega: f64, c_theta: f64, epsilon: f64) -> Self {
        Self {
            c_omega,
            c_theta,
            epsilon,
            delta_p: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c_omega", self.c_omega),
            ("c_theta", self.c_theta),
            ("epsilon", self.epsilon),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.delta_p.iter().any(|s| !(s.start.is_finite() && s.value.is_finite())) {
            return Err(Error::Config("power schedule has non-finite entries".into()));
        }
        if self.delta_p.windows(2).any(|w| w[1].start <= w[0].start) {
            return Err(Error::Config("power schedule breakpoints must increase".into()));
        }
        Ok(())
    }

    pub fn power(&self, t: f64) -> f64 {
        self.delta_p
            .iter()
            .take_while(|s| s.start <= t)
            .last()
            .map_or(0.0, |s| s.value)
    }
}

/// A library together with the coefficients of the `ω̇` equation.
#[derive(Debug, Clone)]
pub struct Model {
    library: Library,
    omega_dot: Vec<f64>,
}

impl Model {
    pub fn new(spec: LibrarySpec, omega_dot: Vec<f64>) -> Result<Self> {
        let library = Library::new(spec)?;
        if omega_dot.len() != library.len() {
            return Err(Error::Data(format!(
                "{} coefficients for a {}-term library",
                omega_dot.len(),
                library.len()
            )));
        }
        if omega_dot.iter().any(|c| !c.is_finite()) {
            return Err(Error::Data("model has non-finite coefficients".into()));
        }
        Ok(Self { library, omega_dot })
    }

    /// Uses column `target` of a fitted coefficient matrix as the `ω̇` equation.
    pub fn from_fit(spec: LibrarySpec, coeffs: &CoefficientMatrix, target: usize) -> Result<Self> {
        let model = Self::new(spec, coeffs.column(target))?;
        if model.library.names() != coeffs.feature_names {
            return Err(Error::Data("coefficient rows do not match the library".into()));
        }
        Ok(model)
    }

    pub fn omega_dot(&self, theta: f64, omega: f64, t: f64) -> f64 {
        self.library.combine(&self.omega_dot, theta, omega, t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    /// States up to (not including) the first divergent one; `omega_dot` is left empty.
    pub trajectory: StateTrajectory,
    pub stable: bool,
    pub divergence_step: Option<usize>,
}

/// Divergence bound for a chunk whose raw ω peaks at `max_abs_omega`.
pub fn divergence_bound(max_abs_omega: f64, factor: f64) -> f64 {
    (factor * max_abs_omega).max(MIN_DIVERGENCE_BOUND)
}

/// Integrates `θ̇ = ω`, `ω̇ = model(θ, ω, t)` with classical RK4 from `t = 0`.
pub fn simulate_model(model: &Model, x0: (f64, f64), dt: f64, n_steps: usize, bound: f64) -> Result<SimulationResult> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config(format!("time step must be > 0, got {dt}")));
    }
    if bound.is_nan() || bound <= 0.0 {
        return Err(Error::Config(format!("divergence bound must be > 0, got {bound}")));
    }
    let ok = |th: f64, om: f64| th.is_finite() && om.is_finite() && om.abs() <= bound;
    let mut theta = Vec::with_capacity(n_steps + 1);
    let mut omega = Vec::with_capacity(n_steps + 1);
    let mut divergence_step = None;

    let (mut th, mut om) = x0;
    if ok(th, om) {
        theta.push(th);
        omega.push(om);
        let f = |t: f64, th: f64, om: f64| (om, model.omega_dot(th, om, t));
        for k in 0..n_steps {
            let t = k as f64 * dt;
            let h = dt;
            let k1 = f(t, th, om);
            let k2 = f(t + h / 2.0, th + h / 2.0 * k1.0, om + h / 2.0 * k1.1);
            let k3 = f(t + h / 2.0, th + h / 2.0 * k2.0, om + h / 2.0 * k2.1);
            let k4 = f(t + h, th + h * k3.0, om + h * k3.1);
            th += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            om += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            if !ok(th, om) {
                divergence_step = Some(k + 1);
                break;
            }
            theta.push(th);
            omega.push(om);
        }
    } else {
        divergence_step = Some(0);
    }

    Ok(SimulationResult {
        trajectory: StateTrajectory {
            time: time_axis(theta.len(), dt),
            theta,
            omega,
            omega_dot: Vec::new(),
            dt,
        },
        stable: divergence_step.is_none(),
        divergence_step,
    })
}

/// Euler–Maruyama integration of the swing equation; `n_steps + 1` samples from `t = 0`.
pub fn euler_maruyama_swing(
    params: &SwingParams,
    x0: (f64, f64),
    dt: f64,
    n_steps: usize,
    seed: u64,
) -> Result<StateTrajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    em_with_rng(params, x0, dt, n_steps, 1, &mut rng)
}

/// Integrates at `dt / substeps` and keeps every `substeps`-th state.
fn em_with_rng(
    params: &SwingParams,
    x0: (f64, f64),
    dt: f64,
    n_steps: usize,
    substeps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<StateTrajectory> {
    params.validate()?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config(format!("time step must be > 0, got {dt}")));
    }
    if substeps == 0 {
        return Err(Error::Config("substeps must be at least 1".into()));
    }
    let h = dt / substeps as f64;
    let noise = params.epsilon * h.sqrt();
    let (mut th, mut om) = x0;
    let mut theta = Vec::with_capacity(n_steps + 1);
    let mut omega = Vec::with_capacity(n_steps + 1);
    theta.push(th);
    omega.push(om);
    for k in 0..n_steps * substeps {
        let t = k as f64 * h;
        let z: f64 = StandardNormal.sample(rng);
        let drift = -params.c_omega * om - params.c_theta * th + params.power(t);
        let next_om = om + h * drift + noise * z;
        th += h * om;
        om = next_om;
        if (k + 1) % substeps == 0 {
            theta.push(th);
            omega.push(om);
        }
    }
    Ok(StateTrajectory {
        time: time_axis(theta.len(), dt),
        theta,
        omega,
        omega_dot: Vec::new(),
        dt,
    })
}

fn default_chunk_len() -> usize {
    crate::ingest::DEFAULT_CHUNK_LEN
}

fn default_dt() -> f64 {
    1.0
}

fn default_f_ref() -> f64 {
    50.0
}

fn default_substeps() -> usize {
    1
}

/// Settings for a batch of independent synthetic chunks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub params: SwingParams,
    pub n_chunks: usize,
    #[serde(default = "default_chunk_len")]
    pub chunk_len: usize,
    /// Sampling interval of the emitted chunks in seconds.
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_f_ref")]
    pub f_ref: f64,
    /// Each chunk starts at `θ = 0` and an `ω` drawn uniformly from this range.
    #[serde(default)]
    pub omega0: [f64; 2],
    /// Euler–Maruyama steps per sampling interval.
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

impl SyntheticConfig {
    pub fn new(params: SwingParams, n_chunks: usize) -> Self {
        Self {
            params,
            n_chunks,
            chunk_len: default_chunk_len(),
            dt: default_dt(),
            f_ref: default_f_ref(),
            omega0: [0.0, 0.0],
            substeps: default_substeps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        validate_f_ref(self.f_ref)?;
        if self.n_chunks == 0 {
            return Err(Error::Config("n_chunks must be at least 1".into()));
        }
        if self.chunk_len < 2 {
            return Err(Error::Config("chunk_len must be at least 2".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.substeps == 0 {
            return Err(Error::Config("substeps must be at least 1".into()));
        }
        let [lo, hi] = self.omega0;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Config(format!("invalid omega0 range [{lo}, {hi}]")));
        }
        Ok(())
    }
}

/// Seed of the random stream used for chunk `index`.
pub fn chunk_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add(index as u64)
}

/// Generates `n_chunks` independent trajectories and their frequency chunks.
pub fn generate_synthetic_trajectories(
    cfg: &SyntheticConfig,
    seed: u64,
) -> Result<Vec<(FrequencyChunk, StateTrajectory)>> {
    cfg.validate()?;
    (0..cfg.n_chunks)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(chunk_seed(seed, i));
            let [lo, hi] = cfg.omega0;
            let u: f64 = Uniform::new_inclusive(0.0, 1.0)
                .expect("valid unit interval")
                .sample(&mut rng);
            let omega0 = lo + (hi - lo) * u;
            let traj = em_with_rng(
                &cfg.params,
                (0.0, omega0),
                cfg.dt,
                cfg.chunk_len - 1,
                cfg.substeps,
                &mut rng,
            )?;
            if traj.omega.iter().chain(&traj.theta).any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("synthetic chunk {i} diverged")));
            }
            let start = SYNTHETIC_EPOCH + (i as f64 * cfg.chunk_len as f64 * cfg.dt).ceil() as i64;
            let frequency = traj
                .omega
                .iter()
                .map(|&w| frequency_from_omega(w, cfg.f_ref))
                .collect();
            let chunk = FrequencyChunk::new(chunk_label(start), start, cfg.dt, cfg.f_ref, frequency)?;
            Ok((chunk, traj))
        })
        .collect()
}

pub fn generate_synthetic_dataset(cfg: &SyntheticConfig, seed: u64) -> Result<Vec<FrequencyChunk>> {
    Ok(generate_synthetic_trajectories(cfg, seed)?
        .into_iter()
        .map(|(c, _)| c)
        .collect())
}

/// Writes `chunk_id,t,theta,omega` rows.
pub fn write_trajectories<'a, W: Write>(
    rows: impl IntoIterator<Item = (&'a str, &'a StateTrajectory)>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["chunk_id", "t", "theta", "omega"])?;
    for (id, traj) in rows {
        for i in 0..traj.len() {
            w.write_record([
                id.to_string(),
                traj.time[i].to_string(),
                traj.theta[i].to_string(),
                traj.omega[i].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
