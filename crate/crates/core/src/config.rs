//! Structured-text experiment configuration: a validating TOML loader for
//! simulation, variational-inequality verification and cluster-statistics
//! runs. The schema is documented in the repository README.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::convex::{Potential, PotentialKind, PotentialSpec};
use crate::grid::{Field, Grid};
use crate::noise::NoiseModel;
use crate::solver::{Scheme, SolverConfig, DEFAULT_NEWTON_MAX_ITER, DEFAULT_NEWTON_TOL};

#[derive(Clone, Debug)]
pub enum ConfigError {
    Io(String),
    Parse(String),
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(m) => write!(f, "cannot read config: {}", m),
            ConfigError::Parse(m) => write!(f, "cannot parse config: {}", m),
            ConfigError::Invalid(m) => write!(f, "invalid config: {}", m),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridSection {
    pub a: f64,
    pub b: f64,
    pub cells: usize,
}

/// Either a builtin potential by name or a full piecewise description.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PotentialSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none", flatten)]
    pub spec: Option<PotentialSpec>,
}

impl PotentialSection {
    pub fn resolve(&self) -> Result<Potential, ConfigError> {
        if let Some(name) = &self.builtin {
            return match name.as_str() {
                "psi1" => Ok(Potential::psi1()),
                "psi2" => Ok(Potential::psi2()),
                "quadratic" => Ok(Potential::quadratic()),
                other => Err(ConfigError::Invalid(format!(
                    "unknown builtin potential '{}'",
                    other
                ))),
            };
        }
        match &self.spec {
            Some(spec) => {
                let mut spec = spec.clone();
                spec.kind = PotentialKind::Custom;
                Potential::from_spec(spec).map_err(|e| ConfigError::Invalid(e.to_string()))
            }
            None => Err(ConfigError::Invalid(
                "potential needs either 'builtin' or a piecewise spec".into(),
            )),
        }
    }
}

fn default_newton_tol() -> f64 {
    DEFAULT_NEWTON_TOL
}

fn default_newton_max_iter() -> usize {
    DEFAULT_NEWTON_MAX_ITER
}

fn default_scheme() -> Scheme {
    Scheme::ImplicitMonotone
}

fn default_snapshot_paths() -> usize {
    8
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverSection {
    pub eps: f64,
    pub dt: f64,
    pub t_end: f64,
    pub paths: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_max_iter")]
    pub newton_max_iter: usize,
    #[serde(default)]
    pub snapshot_cadence: usize,
    #[serde(default = "default_snapshot_paths")]
    pub snapshot_paths: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_k: Option<f64>,
}

/// Initial condition specification.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialSection {
    #[default]
    Zero,
    /// `amplitude * sin(mode * pi * (x - a) / (b - a))`.
    Sine { amplitude: f64, mode: usize },
    /// Interior node values, explicitly.
    Values { values: Vec<f64> },
}

impl InitialSection {
    pub fn build(&self, grid: &Grid) -> Result<Field, ConfigError> {
        match self {
            InitialSection::Zero => Ok(Field::zeros(grid)),
            InitialSection::Sine { amplitude, mode } => {
                let (a, len) = (grid.a(), grid.length());
                let m = *mode as f64;
                Ok(Field::from_fn(grid, |x| {
                    amplitude * (m * std::f64::consts::PI * (x - a) / len).sin()
                }))
            }
            InitialSection::Values { values } => Field::from_values(grid, values.clone())
                .map_err(|e| ConfigError::Invalid(e.to_string())),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: String,
}

/// Top-level simulation config.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub grid: GridSection,
    pub potential: PotentialSection,
    pub solver: SolverSection,
    pub noise: NoiseModel,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl SimulateConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Io(e.to_string()))?;
        Self::from_toml(&text)
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        Grid::new(self.grid.a, self.grid.b, self.grid.cells)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Resolve into a validated solver configuration and initial state.
    pub fn build(&self) -> Result<(SolverConfig, Field), ConfigError> {
        let grid = self.grid()?;
        let potential = self.potential.resolve()?;
        let mut cfg = SolverConfig::new(
            grid.clone(),
            potential,
            self.solver.eps,
            self.solver.dt,
            self.solver.t_end,
            self.noise.clone(),
        );
        cfg.scheme = self.solver.scheme;
        cfg.newton_tol = self.solver.newton_tol;
        cfg.newton_max_iter = self.solver.newton_max_iter;
        cfg.paths = self.solver.paths;
        cfg.snapshot_cadence = self.solver.snapshot_cadence;
        cfg.snapshot_paths = self.solver.snapshot_paths;
        cfg.decay_k = self.solver.decay_k;
        let x0 = self.initial.build(&grid)?;
        Ok((cfg, x0))
    }
}

/// Test-process entry of a verification config.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestProcessSection {
    Zero,
    /// Drift `G = Delta g` for a sine-profile `g`, integrated exactly.
    ConstantG { amplitude: f64, mode: usize },
    RegularizedSolution { inner_eps: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SviSection {
    /// The frozen constant in the inequality's Gronwall term.
    pub c: f64,
    /// Margins must stay above `-se_multiplier` standard errors.
    #[serde(default = "default_se_multiplier")]
    pub se_multiplier: f64,
}

fn default_se_multiplier() -> f64 {
    2.0
}

/// Top-level variational-inequality verification config: a candidate run
/// plus a list of test processes sharing its grid and noise.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifySviConfig {
    #[serde(flatten)]
    pub simulate: SimulateConfig,
    pub svi: SviSection,
    #[serde(rename = "test_process")]
    pub test_processes: Vec<TestProcessSection>,
}

impl VerifySviConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if cfg.test_processes.is_empty() {
            return Err(ConfigError::Invalid(
                "need at least one [[test_process]]".into(),
            ));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Io(e.to_string()))?;
        Self::from_toml(&text)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SocSection {
    /// Supercritical threshold on `|X|`.
    #[serde(default = "default_soc_threshold")]
    pub threshold: f64,
}

fn default_soc_threshold() -> f64 {
    1.0
}

/// Config for the cluster-statistics command.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SocConfig {
    #[serde(flatten)]
    pub simulate: SimulateConfig,
    #[serde(default = "default_soc_section")]
    pub soc: SocSection,
}

fn default_soc_section() -> SocSection {
    SocSection { threshold: 1.0 }
}

impl SocConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Io(e.to_string()))?;
        Self::from_toml(&text)
    }
}
