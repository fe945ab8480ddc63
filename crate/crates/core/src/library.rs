//! Candidate function libraries over the state `(θ, ω, T)`.
//!
//! Column order is fixed: the constant, the linear terms in state order, the
//! higher-degree monomials in graded lexicographic order, then `sin`/`cos`
//! pairs per state. For `p2f1` this gives
//! `1, θ, ω, T, θ², θω, θT, ω², ωT, T², sin θ, cos θ, sin ω, cos ω, sin T, cos T`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::StateTrajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum State {
    Theta,
    Omega,
    Time,
}

impl State {
    const ALL: [State; 3] = [State::Theta, State::Omega, State::Time];

    fn symbol(self) -> &'static str {
        match self {
            State::Theta => "theta",
            State::Omega => "omega",
            State::Time => "T",
        }
    }

    fn from_symbol(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|st| st.symbol() == s)
    }

    fn pick(self, theta: f64, omega: f64, t: f64) -> f64 {
        match self {
            State::Theta => theta,
            State::Omega => omega,
            State::Time => t,
        }
    }
}

/// One library column as a symbolic expression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Feature {
    Constant,
    /// Exponents of `(θ, ω, T)`.
    Monomial([u8; 3]),
    Sin { state: State, scale: f64 },
    Cos { state: State, scale: f64 },
}

impl Feature {
    pub fn evaluate(&self, theta: f64, omega: f64, t: f64) -> f64 {
        match *self {
            Feature::Constant => 1.0,
            Feature::Monomial(exps) => {
                let mut v = 1.0;
                for (state, &e) in State::ALL.iter().zip(&exps) {
                    let x = state.pick(theta, omega, t);
                    for _ in 0..e {
                        v *= x;
                    }
                }
                v
            }
            Feature::Sin { state, scale } => (scale * state.pick(theta, omega, t)).sin(),
            Feature::Cos { state, scale } => (scale * state.pick(theta, omega, t)).cos(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Feature::Constant)
    }

    pub fn degree(&self) -> u32 {
        match self {
            Feature::Monomial(e) => e.iter().map(|&x| x as u32).sum(),
            _ => 0,
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let trig = |f: &mut fmt::Formatter<'_>, name: &str, state: State, scale: f64| {
            if scale == 1.0 {
                write!(f, "{name}({})", state.symbol())
            } else {
                write!(f, "{name}({scale}*{})", state.symbol())
            }
        };
        match *self {
            Feature::Constant => write!(f, "1"),
            Feature::Monomial(exps) => {
                let mut first = true;
                for (state, &e) in State::ALL.iter().zip(&exps) {
                    if e == 0 {
                        continue;
                    }
                    if !first {
                        write!(f, " ")?;
                    }
                    first = false;
                    if e == 1 {
                        write!(f, "{}", state.symbol())?;
                    } else {
                        write!(f, "{}^{e}", state.symbol())?;
                    }
                }
                Ok(())
            }
            Feature::Sin { state, scale } => trig(f, "sin", state, scale),
            Feature::Cos { state, scale } => trig(f, "cos", state, scale),
        }
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Format(format!("unrecognized feature name {s:?}"));
        if s == "1" {
            return Ok(Feature::Constant);
        }
        for (prefix, is_sin) in [("sin(", true), ("cos(", false)] {
            if let Some(inner) = s.strip_prefix(prefix).and_then(|r| r.strip_suffix(')')) {
                let (scale, sym) = match inner.split_once('*') {
                    Some((k, sym)) => (k.parse::<f64>().map_err(|_| bad())?, sym),
                    None => (1.0, inner),
                };
                let state = State::from_symbol(sym).ok_or_else(bad)?;
                return Ok(if is_sin {
                    Feature::Sin { state, scale }
                } else {
                    Feature::Cos { state, scale }
                });
            }
        }
        let mut exps = [0u8; 3];
        for factor in s.split(' ') {
            let (sym, e) = match factor.split_once('^') {
                Some((sym, e)) => (sym, e.parse::<u8>().map_err(|_| bad())?),
                None => (factor, 1),
            };
            let state = State::from_symbol(sym).ok_or_else(bad)?;
            let idx = State::ALL.iter().position(|&x| x == state).unwrap();
            if exps[idx] != 0 || e == 0 {
                return Err(bad());
            }
            exps[idx] = e;
        }
        Ok(Feature::Monomial(exps))
    }
}

/// Declarative description of a candidate library.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LibrarySpec {
    pub poly_degree: u8,
    #[serde(default)]
    pub fourier_order: u8,
    #[serde(default = "default_true")]
    pub include_time: bool,
    /// Factor applied to `T` inside `sin`/`cos`.
    #[serde(default = "default_scale")]
    pub time_scale: f64,
}

fn default_true() -> bool {
    true
}

fn default_scale() -> f64 {
    1.0
}

impl LibrarySpec {
    pub fn new(poly_degree: u8, fourier_order: u8) -> Self {
        Self {
            poly_degree,
            fourier_order,
            include_time: true,
            time_scale: 1.0,
        }
    }

    pub fn p2() -> Self {
        Self::new(2, 0)
    }

    pub fn p3() -> Self {
        Self::new(3, 0)
    }

    pub fn p2f1() -> Self {
        Self::new(2, 1)
    }

    pub fn n_states(&self) -> usize {
        if self.include_time {
            3
        } else {
            2
        }
    }

    /// Short label such as `p2`, `p3` or `p2f1`.
    pub fn name(&self) -> String {
        let mut s = format!("p{}", self.poly_degree);
        if self.fourier_order > 0 {
            s.push_str(&format!("f{}", self.fourier_order));
        }
        if !self.include_time {
            s.push_str("-notime");
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.poly_degree) {
            return Err(Error::Config(format!(
                "polynomial degree must be 1, 2 or 3, got {}",
                self.poly_degree
            )));
        }
        if self.fourier_order > 1 {
            return Err(Error::Config(format!(
                "fourier order must be 0 or 1, got {}",
                self.fourier_order
            )));
        }
        if self.poly_degree == 3 && self.fourier_order == 1 {
            return Err(Error::Config("p3f1 is not a supported library".into()));
        }
        if !(self.time_scale.is_finite() && self.time_scale > 0.0) {
            return Err(Error::Config(format!(
                "time scale must be > 0, got {}",
                self.time_scale
            )));
        }
        Ok(())
    }

    pub fn features(&self) -> Result<Vec<Feature>> {
        self.validate()?;
        let states = &State::ALL[..self.n_states()];
        let mut out = vec![Feature::Constant];
        for degree in 1..=self.poly_degree as usize {
            for combo in nondecreasing_tuples(states.len(), degree) {
                let mut exps = [0u8; 3];
                for i in combo {
                    exps[i] += 1;
                }
                out.push(Feature::Monomial(exps));
            }
        }
        if self.fourier_order == 1 {
            for &state in states {
                let scale = if state == State::Time { self.time_scale } else { 1.0 };
                out.push(Feature::Sin { state, scale });
                out.push(Feature::Cos { state, scale });
            }
        }
        Ok(out)
    }
}

/// Index tuples `i1 <= i2 <= ... <= id` over `0..n`, in lexicographic order.
fn nondecreasing_tuples(n: usize, d: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for prefix in nondecreasing_tuples(n, d - 1) {
        let from = prefix.last().copied().unwrap_or(0);
        for i in from..n {
            let mut t = prefix.clone();
            t.push(i);
            out.push(t);
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of library columns for `n_states` state variables.
pub fn feature_count(spec: &LibrarySpec, n_states: usize) -> Result<usize> {
    spec.validate()?;
    let d = spec.poly_degree as usize;
    Ok(binomial(n_states + d, d) + 2 * spec.fourier_order as usize * n_states)
}

/// Θ(X): one row per sample, one named column per candidate function.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: DMatrix<f64>,
    pub names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(values: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        if names.len() != values.ncols() {
            return Err(Error::Data(format!(
                "{} names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        let mut sorted = names.clone();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Data(format!("duplicate feature name {:?}", w[0])));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("feature matrix has non-finite entries".into()));
        }
        Ok(Self { values, names })
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Index of the column holding a non-zero constant, if any.
    pub fn intercept(&self) -> Option<usize> {
        if let Some(i) = self.column_index("1") {
            return Some(i);
        }
        (0..self.ncols()).find(|&j| {
            let col = self.values.column(j);
            let first = col[0];
            first != 0.0 && col.iter().all(|&v| v == first)
        })
    }
}

/// Evaluates a library along a trajectory.
#[derive(Debug, Clone)]
pub struct Library {
    spec: LibrarySpec,
    features: Vec<Feature>,
}

impl Library {
    pub fn new(spec: LibrarySpec) -> Result<Self> {
        Ok(Self {
            features: spec.features()?,
            spec,
        })
    }

    pub fn spec(&self) -> &LibrarySpec {
        &self.spec
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.to_string()).collect()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn evaluate_row(&self, theta: f64, omega: f64, t: f64, out: &mut [f64]) {
        for (slot, f) in out.iter_mut().zip(&self.features) {
            *slot = f.evaluate(theta, omega, t);
        }
    }

    /// Dot product of the library row at `(θ, ω, t)` with `coefficients`.
    pub fn combine(&self, coefficients: &[f64], theta: f64, omega: f64, t: f64) -> f64 {
        self.features
            .iter()
            .zip(coefficients)
            .filter(|(_, &c)| c != 0.0)
            .map(|(f, &c)| c * f.evaluate(theta, omega, t))
            .sum()
    }
}

pub fn build_feature_matrix(traj: &StateTrajectory, spec: &LibrarySpec) -> Result<FeatureMatrix> {
    let library = Library::new(*spec)?;
    let n = traj.len();
    if traj.theta.len() != n || traj.time.len() != n {
        return Err(Error::Data("trajectory sequences differ in length".into()));
    }
    let bad = traj
        .theta
        .iter()
        .chain(&traj.omega)
        .chain(&traj.time)
        .any(|v| !v.is_finite());
    if bad {
        return Err(Error::Data("trajectory contains non-finite values".into()));
    }
    let p = library.len();
    let mut values = DMatrix::zeros(n, p);
    let mut row = vec![0.0; p];
    for i in 0..n {
        library.evaluate_row(traj.theta[i], traj.omega[i], traj.time[i], &mut row);
        for (j, &v) in row.iter().enumerate() {
            values[(i, j)] = v;
        }
    }
    FeatureMatrix::new(values, library.names())
}
