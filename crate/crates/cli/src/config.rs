//! Run configuration: file loading, flag overrides and validation.

use std::fmt;
use std::path::{Path, PathBuf};

use homog_core::cell::{BruteForceMode, Orientation};
use homog_core::gammalab::LambdaParams;
use homog_core::kernel::PeriodicStepKernel;
use homog_core::states::Potential;
use serde::{Deserialize, Serialize};

pub const THREADS_ENV: &str = "HOMOG_THREADS";

/// A configuration problem, reported with exit code 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error in `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    ClosedForm,
    ProjectedGradient,
    BruteForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Minimal implied-g(1) difference for the non-representability verdict.
    pub difference: f64,
    /// Final error a constituent convergence study must reach.
    pub study: f64,
    /// Agreement of admissible energies under f and f_M.
    pub admissible: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            difference: 1e-3,
            study: 1e-2,
            admissible: 1e-12,
        }
    }
}

/// Everything a subcommand may need. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    /// Explicit kernel; replaces the λ-kernel in `energy`.
    pub kernel: Option<PeriodicStepKernel>,
    pub potential: Potential,
    /// Step function JSON file for `energy`.
    pub state: Option<PathBuf>,
    pub eps: f64,
    pub eps_grid: Vec<f64>,
    pub t: f64,
    pub t_steps: usize,
    pub s_grid: Vec<f64>,
    #[serde(alias = "M_grid")]
    pub m_grid: Vec<f64>,
    /// Cell grid size for `cell-solve`.
    pub n: usize,
    /// Cell grid size for `cell-verify`.
    pub brute_n: usize,
    pub method: SolveMethod,
    pub brute_mode: BruteForceMode,
    pub orientation: Orientation,
    pub max_iter: usize,
    pub solver_tol: f64,
    pub quadrature_n: Option<usize>,
    pub deviations: Vec<String>,
    /// Randomized instances in the exact-vs-quadrature check.
    pub instances: usize,
    pub tolerances: Tolerances,
    pub seed: u64,
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
}

pub const DEVIATION_NAMES: [&str; 4] = ["three_level_thirds", "two_level_gap_0.5", "two_level_gap_2", "oscillating_lift"];

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 2.0,
            lambda: 0.5,
            kernel: None,
            potential: Potential::InfiniteTripleWell,
            state: None,
            eps: 1.0 / 32.0,
            eps_grid: [8, 16, 32, 64, 128, 256].iter().map(|m| 1.0 / *m as f64).collect(),
            t: 0.5,
            t_steps: 101,
            s_grid: vec![0.5, 0.25],
            m_grid: vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0],
            n: 256,
            brute_n: 16,
            method: SolveMethod::ProjectedGradient,
            brute_mode: BruteForceMode::AllSubsets,
            orientation: Orientation::LowCostAtZero,
            max_iter: 20_000,
            solver_tol: 1e-12,
            quadrature_n: None,
            deviations: DEVIATION_NAMES[..3].iter().map(|s| s.to_string()).collect(),
            instances: 50,
            tolerances: Tolerances::default(),
            seed: 0,
            output_dir: PathBuf::from("homog-out"),
            threads: None,
        }
    }
}

impl RunConfig {
    /// Loads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("--config", format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text).map_err(|e| ConfigError::new(path.display().to_string(), e.to_string()))
        } else {
            toml::from_str(&text).map_err(|e| ConfigError::new(path.display().to_string(), e.to_string()))
        }
    }

    pub fn params(&self) -> Result<LambdaParams, ConfigError> {
        LambdaParams::new(self.alpha, self.beta, self.lambda)
            .map_err(|e| ConfigError::new("alpha/beta/lambda", e.to_string()))
    }

    /// Checks the fields shared by every subcommand.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params()?;
        self.potential
            .validate()
            .map_err(|e| ConfigError::new("potential", e.to_string()))?;
        let Tolerances {
            difference,
            study,
            admissible,
        } = self.tolerances;
        for (name, v) in [
            ("tolerances.difference", difference),
            ("tolerances.study", study),
            ("tolerances.admissible", admissible),
            ("solver_tol", self.solver_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::new(name, format!("must be positive, found {v}")));
            }
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(ConfigError::new("eps", format!("must lie in (0, 1], found {}", self.eps)));
        }
        if !(0.0..=1.0).contains(&self.t) {
            return Err(ConfigError::new("t", format!("must lie in [0, 1], found {}", self.t)));
        }
        if self.threads == Some(0) {
            return Err(ConfigError::new("threads", "must be at least 1"));
        }
        Ok(())
    }

    pub fn require_eps_grid(&self) -> Result<(), ConfigError> {
        if self.eps_grid.is_empty() {
            return Err(ConfigError::new("eps_grid", "must not be empty"));
        }
        if self.eps_grid.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(ConfigError::new("eps_grid", "values must lie in (0, 1]"));
        }
        if self.eps_grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(ConfigError::new("eps_grid", "must be strictly decreasing"));
        }
        Ok(())
    }

    pub fn require_s_grid(&self, len: usize) -> Result<(), ConfigError> {
        if self.s_grid.len() < len {
            return Err(ConfigError::new("s_grid", format!("needs at least {len} value(s)")));
        }
        if self.s_grid.iter().any(|s| !(*s > 0.0 && *s < 1.0)) {
            return Err(ConfigError::new("s_grid", "values must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn require_m_grid(&self) -> Result<(), ConfigError> {
        if self.m_grid.is_empty() {
            return Err(ConfigError::new("m_grid", "must not be empty"));
        }
        if self.m_grid.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(ConfigError::new("m_grid", "values must be positive"));
        }
        Ok(())
    }

    /// Thread count: explicit flag, then the environment, then the file.
    pub fn resolve_threads(&self, flag: Option<usize>) -> Result<Option<usize>, ConfigError> {
        if let Some(t) = flag {
            return positive_threads("--threads", t).map(Some);
        }
        if let Ok(raw) = std::env::var(THREADS_ENV) {
            let t: usize = raw
                .trim()
                .parse()
                .map_err(|_| ConfigError::new(THREADS_ENV, format!("not a thread count: {raw:?}")))?;
            return positive_threads(THREADS_ENV, t).map(Some);
        }
        match self.threads {
            Some(t) => positive_threads("threads", t).map(Some),
            None => Ok(None),
        }
    }
}

fn positive_threads(field: &str, t: usize) -> Result<usize, ConfigError> {
    if t == 0 {
        Err(ConfigError::new(field, "must be at least 1"))
    } else {
        Ok(t)
    }
}
