//! Configuration, seeded instance generation, certification campaigns and
//! their reports.

mod campaign;
mod generate;
mod report;

pub use campaign::{build_instances, certify_instance, required_steps, run_campaign, BuiltInstance};
pub use generate::{generate_instance, BlockKind, GeneratedShape, MixKind};
pub use report::{
    emit_report, CertificationReport, IndividualRecord, InstanceReport, LiminfRecord, RateRecord, Status,
};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::EngineError;
use crate::operators::Operator;
use crate::rates::RateError;
use crate::schedules::{Gamma, MixRule, Theta};

/// Current layout of both the config file and the summary report.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable that replaces the configured seed.
pub const SEED_ENV: &str = "REGRATE_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parsing config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{SEED_ENV} = {0:?} is not a 64-bit unsigned integer")]
    SeedOverride(String),
    #[error("unsupported schema_version {0}")]
    Schema(u32),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("instance {index}: {source}")]
    Instance { index: usize, source: EngineError },
    #[error("instance {index}: {source}")]
    Rate { index: usize, source: RateError },
}

/// Strictness constant of a generated group: a literal value, or a fraction
/// of the ceiling `1 − 1/(θ(1) + 1)` of the reference schedule `t ≡ 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KSpec {
    Value(f64),
    CeilingFraction { ceiling_fraction: f64 },
}

impl KSpec {
    pub fn resolve(&self) -> Result<f64, ConfigError> {
        let k = match *self {
            KSpec::Value(k) => k,
            KSpec::CeilingFraction { ceiling_fraction } => {
                if !(0.0..=1.0).contains(&ceiling_fraction) {
                    return Err(ConfigError::Invalid(format!(
                        "ceiling_fraction {ceiling_fraction} outside [0, 1]"
                    )));
                }
                let reference = crate::schedules::constant_step(0.5, 0.0).expect("valid reference schedule");
                let ceiling =
                    crate::rates::k_ceiling(reference.theta()).map_err(|e| ConfigError::Invalid(e.to_string()))?;
                ceiling_fraction * ceiling
            }
        };
        if !(0.0..1.0).contains(&k) {
            return Err(ConfigError::Invalid(format!("k = {k} outside [0, 1)")));
        }
        Ok(k)
    }
}

/// Step sizes: a fixed `t`, or `t = (1 + k)/2`, which maximizes
/// `(t − k)(1 − t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StepSpec {
    Constant {
        t: f64,
    },
    #[default]
    Midpoint,
}

impl StepSpec {
    pub fn t(&self, k: f64) -> f64 {
        match *self {
            StepSpec::Constant { t } => t,
            StepSpec::Midpoint => (1.0 + k) / 2.0,
        }
    }
}

/// A hand-written instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitInstance {
    #[serde(default)]
    pub label: Option<String>,
    pub family: Vec<Operator>,
    #[serde(default)]
    pub k: f64,
    pub x0: Vec<f64>,
    /// Defaults to `max(‖x0‖, ‖x0 − p‖)` rounded up.
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub step: StepSpec,
    pub mix: MixRule,
    /// Replaces the derived `θ`.
    #[serde(default)]
    pub theta: Option<Theta>,
    /// Replaces the derived `γ`.
    #[serde(default)]
    pub gamma: Option<Gamma>,
    #[serde(default)]
    pub eps_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub individual_eps_grid: Option<Vec<f64>>,
}

/// `count` seeded instances; instance `j` takes the `j`-th entry (cyclically)
/// of `k_values` and `mixes`, and draws `d` and `N` from the given lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratedGroup {
    #[serde(default)]
    pub label: Option<String>,
    pub count: usize,
    pub dimensions: Vec<usize>,
    pub family_sizes: Vec<usize>,
    pub k_values: Vec<KSpec>,
    #[serde(default = "default_mixes")]
    pub mixes: Vec<MixKind>,
    #[serde(default)]
    pub step: StepSpec,
    #[serde(default = "BlockKind::all")]
    pub blocks: Vec<BlockKind>,
    #[serde(default)]
    pub eps_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub individual_eps_grid: Option<Vec<f64>>,
}

fn default_mixes() -> Vec<MixKind> {
    vec![MixKind::Constant, MixKind::Geometric]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum InstanceSpec {
    Explicit(ExplicitInstance),
    Generated(GeneratedGroup),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// File name of the summary JSON inside the output directory.
    #[serde(default = "default_summary")]
    pub summary: String,
    /// Whether campaigns also write one trace CSV per instance.
    #[serde(default)]
    pub traces: bool,
}

fn default_summary() -> String {
    "summary.json".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            summary: default_summary(),
            traces: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default)]
    pub instances: Vec<InstanceSpec>,
    /// Tolerances for `Φ` and the liminf grid, descending.
    #[serde(default = "default_eps_grid")]
    pub eps_grid: Vec<f64>,
    /// Tolerances for `Φ′` and `Φ″`, descending.
    #[serde(default = "default_individual_eps_grid")]
    pub individual_eps_grid: Vec<f64>,
    #[serde(default = "default_m_grid")]
    pub liminf_m_grid: Vec<u64>,
    /// Steps iterated beyond the largest bound.
    #[serde(default = "default_margin")]
    pub n_max_margin: u64,
    /// Upper limit on iterated steps; generated instances shrink to fit.
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    #[serde(default = "default_slack")]
    pub slack: f64,
    /// Sample size for the per-operator strictness checks.
    #[serde(default = "default_pairs")]
    pub operator_pairs: usize,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn default_eps_grid() -> Vec<f64> {
    vec![1.0, 0.1, 0.01]
}

fn default_individual_eps_grid() -> Vec<f64> {
    vec![1.0, 0.1]
}

fn default_m_grid() -> Vec<u64> {
    vec![0, 10, 100]
}

fn default_margin() -> u64 {
    100
}

fn default_max_steps() -> u64 {
    1_000_000
}

fn default_slack() -> f64 {
    crate::check::DEFAULT_SLACK
}

fn default_pairs() -> usize {
    64
}

fn check_grid(name: &str, grid: &[f64]) -> Result<(), ConfigError> {
    if grid.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(ConfigError::Invalid(format!("{name} must be positive and finite")));
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(ConfigError::Invalid(format!("{name} must be strictly descending")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// A config with defaults and no instances.
    pub fn new(seed: u64) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            seed,
            instances: Vec::new(),
            eps_grid: default_eps_grid(),
            individual_eps_grid: default_individual_eps_grid(),
            liminf_m_grid: default_m_grid(),
            n_max_margin: default_margin(),
            max_steps: default_max_steps(),
            slack: default_slack(),
            operator_pairs: default_pairs(),
            output: OutputConfig::default(),
        }
    }

    /// 50 nonexpansive instances certified for `Φ` down to `ε = 0.01`, and 40
    /// more cycling `k ∈ {0, 0.3, 0.5, 0.9·k_ceiling}` certified for all
    /// rates. `d ≤ 8`, `N ≤ 4`, constant and geometric mixes alternate.
    pub fn default_suite(seed: u64) -> Self {
        let group = |label: &str, count, k_values, individual: Vec<f64>| {
            InstanceSpec::Generated(GeneratedGroup {
                label: Some(label.into()),
                count,
                dimensions: (1..=8).collect(),
                family_sizes: (1..=4).collect(),
                k_values,
                mixes: default_mixes(),
                step: StepSpec::Midpoint,
                blocks: BlockKind::all(),
                eps_grid: None,
                individual_eps_grid: Some(individual),
            })
        };
        ExperimentConfig {
            instances: vec![
                group("nonexpansive", 50, vec![KSpec::Value(0.0)], vec![]),
                group(
                    "strict",
                    40,
                    vec![
                        KSpec::Value(0.0),
                        KSpec::Value(0.3),
                        KSpec::Value(0.5),
                        KSpec::CeilingFraction { ceiling_fraction: 0.9 },
                    ],
                    default_individual_eps_grid(),
                ),
            ],
            max_steps: 200_000,
            ..ExperimentConfig::new(seed)
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file and applies the seed override from the environment.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = ExperimentConfig::from_json(&text)?;
        if let Ok(raw) = std::env::var(SEED_ENV) {
            config.seed = raw.trim().parse().map_err(|_| ConfigError::SeedOverride(raw))?;
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Schema(self.schema_version));
        }
        check_grid("eps_grid", &self.eps_grid)?;
        check_grid("individual_eps_grid", &self.individual_eps_grid)?;
        if !(self.slack >= 0.0 && self.slack.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "slack {} must be nonnegative",
                self.slack
            )));
        }
        if self.max_steps == 0 {
            return Err(ConfigError::Invalid("max_steps must be positive".into()));
        }
        for spec in &self.instances {
            match spec {
                InstanceSpec::Explicit(e) => {
                    for grid in [&e.eps_grid, &e.individual_eps_grid].into_iter().flatten() {
                        check_grid("instance eps grid", grid)?;
                    }
                    if !(0.0..1.0).contains(&e.k) {
                        return Err(ConfigError::Invalid(format!("k = {} outside [0, 1)", e.k)));
                    }
                }
                InstanceSpec::Generated(g) => {
                    for grid in [&g.eps_grid, &g.individual_eps_grid].into_iter().flatten() {
                        check_grid("group eps grid", grid)?;
                    }
                    if g.count > 0 && (g.dimensions.is_empty() || g.family_sizes.is_empty() || g.k_values.is_empty()) {
                        return Err(ConfigError::Invalid(
                            "generated group needs dimensions, family_sizes and k_values".into(),
                        ));
                    }
                    if g.dimensions.contains(&0) || g.family_sizes.contains(&0) {
                        return Err(ConfigError::Invalid(
                            "dimensions and family sizes must be positive".into(),
                        ));
                    }
                    if g.count > 0 && (g.mixes.is_empty() || g.blocks.is_empty()) {
                        return Err(ConfigError::Invalid("generated group needs mixes and blocks".into()));
                    }
                    for k in &g.k_values {
                        k.resolve()?;
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceiling_fraction_resolves_against_half_step() {
        // θ(1) = 4 for t ≡ 1/2, so the ceiling is 4/5
        let k = KSpec::CeilingFraction { ceiling_fraction: 0.9 }.resolve().unwrap();
        assert!((k - 0.72).abs() < 1e-15);
        assert!(KSpec::Value(1.0).resolve().is_err());
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = ExperimentConfig::from_json(r#"{"seed": 5}"#).unwrap();
        assert_eq!(c, ExperimentConfig::new(5));
        assert!(ExperimentConfig::from_json(r#"{"seed": 5, "eps_grid": [0.1, 1]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"seed": 5, "eps_grid": [1, -0.1]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"seed": 5, "schema_version": 9}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"seed": 5, "bogus": 1}"#).is_err());
    }

    #[test]
    fn default_suite_round_trips() {
        let c = ExperimentConfig::default_suite(7);
        c.validate().unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn explicit_instance_parses() {
        let text = r#"{
            "seed": 1,
            "instances": [{
                "source": "explicit",
                "family": [{"kind": "scaling", "center": [0.0], "factor": -1.0}],
                "x0": [1.0],
                "b": 1.0,
                "step": {"type": "constant", "t": 0.75},
                "mix": {"type": "constant", "weights": [1.0]},
                "theta": {"type": "constant", "value": 0}
            }]
        }"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        let InstanceSpec::Explicit(e) = &c.instances[0] else {
            panic!()
        };
        assert_eq!(e.theta, Some(Theta::Constant { value: 0 }));
        assert_eq!(e.step, StepSpec::Constant { t: 0.75 });
    }
}
