//! `key = value` run configuration.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::path::PathBuf;

use fracphase::mms::REFERENCE_GRADING;
use fracphase::{Grid, Model, ModelParams, TimeMesh};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },

    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },

    #[error("line {line}: key {key:?} given twice")]
    DuplicateKey { line: usize, key: String },

    #[error("missing required key {0:?}")]
    MissingKey(&'static str),

    #[error("{key}: cannot parse {value:?}: {reason}")]
    Parse { key: String, value: String, reason: String },

    #[error("{key}: {reason}")]
    Range { key: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Ellipse,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: Model,
    /// Required by `simulate`, unused by `convergence`.
    pub alpha: Option<f64>,
    pub steps: Option<usize>,
    pub gamma: f64,
    pub horizon: f64,
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub stabilization: f64,
    pub eps: f64,
    pub mobility: f64,
    pub initial: InitialCondition,
    pub tol: f64,
    pub maxit: usize,
    pub output_dir: PathBuf,
    /// Write `phi_<step>` every this many steps; 0 disables snapshots.
    pub snapshot_stride: usize,
    /// Also write raw `.bin` snapshots.
    pub binary: bool,
    pub alphas: Vec<f64>,
    pub step_counts: Vec<usize>,
    pub gamma_map: Vec<(f64, f64)>,
}

const KEYS: &[&str] = &[
    "model",
    "alpha",
    "N",
    "gamma",
    "T",
    "nx",
    "ny",
    "lx",
    "ly",
    "S",
    "eps",
    "M",
    "initial",
    "tol",
    "maxit",
    "output_dir",
    "snapshot_stride",
    "binary",
    "alphas",
    "Ns",
    "gamma_map",
];

fn parse_err(key: &str, value: &str, reason: impl ToString) -> ConfigError {
    ConfigError::Parse {
        key: key.into(),
        value: value.into(),
        reason: reason.to_string(),
    }
}

fn range(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Range {
        key: key.into(),
        reason: reason.into(),
    }
}

fn float(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = value.parse().map_err(|e| parse_err(key, value, e))?;
    if !v.is_finite() {
        return Err(range(key, format!("must be finite, got {value}")));
    }
    Ok(v)
}

fn integer(key: &str, value: &str) -> Result<usize, ConfigError> {
    value.parse().map_err(|e| parse_err(key, value, e))
}

fn list<T>(key: &str, value: &str, item: impl Fn(&str, &str) -> Result<T, ConfigError>) -> Result<Vec<T>, ConfigError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| item(key, s))
        .collect()
}

fn initial_condition(value: &str) -> Result<InitialCondition, ConfigError> {
    if value == "ellipse" {
        return Ok(InitialCondition::Ellipse);
    }
    match value.split_once(':') {
        Some(("constant", v)) => Ok(InitialCondition::Constant(float("initial", v.trim())?)),
        _ => Err(parse_err("initial", value, "expected `ellipse` or `constant:<value>`")),
    }
}

fn gamma_map(value: &str) -> Result<Vec<(f64, f64)>, ConfigError> {
    list("gamma_map", value, |key, pair| {
        let (a, g) = pair
            .split_once(':')
            .ok_or_else(|| parse_err(key, pair, "expected `alpha:gamma` pairs"))?;
        Ok((float(key, a.trim())?, float(key, g.trim())?))
    })
}

impl RunConfig {
    fn with_model(model: Model) -> Self {
        Self {
            model,
            alpha: None,
            steps: None,
            gamma: 1.0,
            horizon: 5.0,
            nx: 64,
            ny: 64,
            lx: PI,
            ly: PI,
            stabilization: ModelParams::DEFAULT_STABILIZATION,
            eps: ModelParams::DEFAULT_EPS,
            mobility: ModelParams::DEFAULT_MOBILITY,
            initial: InitialCondition::Ellipse,
            tol: 1e-10,
            maxit: 500,
            output_dir: PathBuf::from("out"),
            snapshot_stride: 0,
            binary: false,
            alphas: REFERENCE_GRADING.iter().map(|&(a, _)| a).collect(),
            step_counts: vec![8, 16, 32, 64],
            gamma_map: REFERENCE_GRADING.to_vec(),
        }
    }

    /// Model parameters for `alpha`.
    pub fn params(&self, alpha: f64) -> ModelParams {
        ModelParams {
            model: self.model,
            alpha,
            eps: self.eps,
            mobility: self.mobility,
            stabilization: self.stabilization,
        }
    }

    /// `alpha` and `N`, which `simulate` needs.
    pub fn simulation_keys(&self) -> Result<(f64, usize), ConfigError> {
        let alpha = self.alpha.ok_or(ConfigError::MissingKey("alpha"))?;
        let steps = self.steps.ok_or(ConfigError::MissingKey("N"))?;
        Ok((alpha, steps))
    }

    /// Checks every value against the solver preconditions. Run again
    /// after command-line overrides.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let check_params = |key: &str, alpha: f64| self.params(alpha).validated().map(|_| ()).map_err(|e| range(key, e.to_string()));
        check_params("alpha", self.alpha.unwrap_or(0.5))?;
        Grid::new(self.nx, self.ny, self.lx, self.ly).map_err(|e| range("nx/ny/lx/ly", e.to_string()))?;
        TimeMesh::graded(self.horizon, self.steps.unwrap_or(1), self.gamma).map_err(|e| range("N/T/gamma", e.to_string()))?;
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(range("tol", format!("must lie in (0, 1), got {}", self.tol)));
        }
        if self.maxit == 0 {
            return Err(range("maxit", "must be at least 1"));
        }
        if let InitialCondition::Constant(v) = self.initial {
            if !v.is_finite() {
                return Err(range("initial", "constant must be finite"));
            }
        }

        if self.alphas.is_empty() {
            return Err(range("alphas", "needs at least one value"));
        }
        for &a in &self.alphas {
            check_params("alphas", a)?;
            if fracphase::mms::gamma_for(&self.gamma_map, a).is_err() {
                return Err(range("gamma_map", format!("no grading exponent for alpha = {a}")));
            }
        }
        for &(a, g) in &self.gamma_map {
            TimeMesh::graded(1.0, 1, g).map_err(|e| range("gamma_map", format!("alpha = {a}: {e}")))?;
        }
        match self.step_counts.first() {
            None => return Err(range("Ns", "needs at least one value")),
            Some(0) => return Err(range("Ns", "step counts must be positive")),
            _ => {}
        }
        if self.step_counts.windows(2).any(|w| w[1] != 2 * w[0]) {
            return Err(range("Ns", "each step count must double the previous one"));
        }
        Ok(())
    }
}

/// Parses and validates a configuration. `model` is always required;
/// everything else has a default except `alpha` and `N`, which only
/// `simulate` needs.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut pairs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            text: raw.to_string(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Syntax { line, text: raw.to_string() });
        }
        let canonical = if key == "mobility" { "M" } else { key };
        if !KEYS.contains(&canonical) {
            return Err(ConfigError::UnknownKey { line, key: key.into() });
        }
        if !seen.insert(canonical) {
            return Err(ConfigError::DuplicateKey { line, key: key.into() });
        }
        pairs.push((canonical, value));
    }

    let model = pairs
        .iter()
        .find(|(k, _)| *k == "model")
        .map(|(_, v)| v.parse::<Model>().map_err(|e| parse_err("model", v, e)))
        .ok_or(ConfigError::MissingKey("model"))??;
    let mut cfg = RunConfig::with_model(model);
    for (key, value) in pairs {
        match key {
            "model" => {}
            "alpha" => cfg.alpha = Some(float(key, value)?),
            "N" => cfg.steps = Some(integer(key, value)?),
            "gamma" => cfg.gamma = float(key, value)?,
            "T" => cfg.horizon = float(key, value)?,
            "nx" => cfg.nx = integer(key, value)?,
            "ny" => cfg.ny = integer(key, value)?,
            "lx" => cfg.lx = float(key, value)?,
            "ly" => cfg.ly = float(key, value)?,
            "S" => cfg.stabilization = float(key, value)?,
            "eps" => cfg.eps = float(key, value)?,
            "M" => cfg.mobility = float(key, value)?,
            "initial" => cfg.initial = initial_condition(value)?,
            "tol" => cfg.tol = float(key, value)?,
            "maxit" => cfg.maxit = integer(key, value)?,
            "output_dir" => cfg.output_dir = PathBuf::from(value),
            "snapshot_stride" => cfg.snapshot_stride = integer(key, value)?,
            "binary" => cfg.binary = value.parse().map_err(|e| parse_err(key, value, e))?,
            "alphas" => cfg.alphas = list(key, value, float)?,
            "Ns" => cfg.step_counts = list(key, value, integer)?,
            "gamma_map" => cfg.gamma_map = gamma_map(value)?,
            _ => unreachable!("key list checked above"),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}
