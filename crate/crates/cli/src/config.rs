//! Run configuration: defaults, JSON file loading, and flag overrides.

use serde::{Deserialize, Serialize};

/// Parameter grids and generator settings for a run. A JSON file may supply
/// any subset of fields; command-line flags override file values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub generator: GeneratorSpec,
    /// Path to a space document; overrides the generator when set.
    #[serde(default)]
    pub space: Option<String>,
    #[serde(default = "grids::p")]
    pub p: Vec<f64>,
    #[serde(default = "grids::q")]
    pub q: Vec<f64>,
    #[serde(default = "grids::rho")]
    pub rho: Vec<f64>,
    #[serde(default = "grids::lambda")]
    pub lambda: Vec<f64>,
    #[serde(default = "grids::alpha")]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub out: Option<String>,
    /// Multiplicative slack on explicit constants (default 1e-9).
    #[serde(default)]
    pub tolerance: Option<f64>,
    // search
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default = "grids::iterations")]
    pub iterations: usize,
    #[serde(default = "grids::restarts")]
    pub restarts: usize,
    // oracle
    #[serde(default = "grids::count")]
    pub count: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config is valid")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    #[serde(default)]
    pub kind: GeneratorKind,
    /// Required unless a space document is supplied.
    #[serde(default)]
    pub depth: Option<u32>,
    #[serde(default)]
    pub seed: u64,
    /// Conditional probability of the left child for biased trees.
    #[serde(default)]
    pub bias: Option<f64>,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec { kind: GeneratorKind::Random, depth: None, seed: 0, bias: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Rademacher,
    #[default]
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

mod grids {
    pub fn p() -> Vec<f64> {
        vec![2.0]
    }
    pub fn q() -> Vec<f64> {
        vec![2.0]
    }
    pub fn rho() -> Vec<f64> {
        vec![1.1, 1.5, 2.0, 2.5, 3.0]
    }
    pub fn lambda() -> Vec<f64> {
        (-3..=3).map(|j| 2f64.powi(j)).collect()
    }
    pub fn alpha() -> Vec<f64> {
        vec![0.25, 1.0, 4.0]
    }
    pub fn iterations() -> usize {
        200
    }
    pub fn restarts() -> usize {
        4
    }
    pub fn count() -> usize {
        100
    }
}

/// A configuration problem; the message names the offending field.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn load(path: Option<&str>) -> Result<Self, ConfigError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError(format!("config: cannot read {p}: {e}")))?;
                serde_json::from_str(&text)
                    .map_err(|e| ConfigError(format!("config: invalid JSON in {p}: {e}")))
            }
        }
    }

    /// Validates grid and generator invariants shared by all commands.
    pub fn validate(&self, command: &str) -> Result<(), ConfigError> {
        let need_nonempty: [(&str, bool); 5] = [
            ("p", self.p.is_empty()),
            ("q", self.q.is_empty()),
            ("rho", self.rho.is_empty()),
            ("lambda", self.lambda.is_empty()),
            ("alpha", self.alpha.is_empty()),
        ];
        for (name, empty) in need_nonempty {
            if empty {
                return Err(ConfigError(format!("{name}: grid must be nonempty")));
            }
        }
        // search and oracle always generate their own inputs
        if self.space.is_none() || command == "search" || command == "oracle" {
            let depth = self
                .generator
                .depth
                .ok_or_else(|| ConfigError("generator/depth: required".into()))?;
            if depth == 0 {
                return Err(ConfigError("generator/depth: must be at least 1".into()));
            }
            if command == "oracle" && depth > 14 {
                return Err(ConfigError(
                    "generator/depth: must be at most 14 for the oracle command".into(),
                ));
            }
        }
        if let Some(b) = self.generator.bias {
            if b.is_nan() || b <= 0.0 || b >= 1.0 {
                return Err(ConfigError("generator/bias: must lie in (0, 1)".into()));
            }
        }
        for (name, grid) in [("p", &self.p), ("q", &self.q)] {
            if grid.iter().any(|&v| v.is_nan() || v <= 1.0) {
                return Err(ConfigError(format!("{name}: exponents must exceed 1")));
            }
        }
        for (name, grid) in [("rho", &self.rho), ("lambda", &self.lambda), ("alpha", &self.alpha)]
        {
            if grid.iter().any(|&v| v.is_nan() || v <= 0.0) {
                return Err(ConfigError(format!("{name}: values must be positive")));
            }
        }
        if command == "search" && self.target.is_none() {
            return Err(ConfigError("target: required for the search command".into()));
        }
        if self.iterations == 0 || self.restarts == 0 {
            return Err(ConfigError("iterations/restarts: must be at least 1".into()));
        }
        if self.count == 0 {
            return Err(ConfigError("count: must be at least 1".into()));
        }
        Ok(())
    }
}
