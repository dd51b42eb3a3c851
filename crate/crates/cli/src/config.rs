//! Run configuration: a TOML file merged with command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sgdlab_core::experiments::{BudgetRule, StepRule, DEFAULT_BUDGET_FACTOR};
use sgdlab_core::models::{EntryDistribution, GlmFamily};
use sgdlab_core::{Activation, Family};

use crate::CliError;

/// Environment variable overriding the output directory.
pub const ENV_OUTPUT_DIR: &str = "SGDLAB_OUTPUT_DIR";
/// Environment variable overriding the worker count.
pub const ENV_THREADS: &str = "SGDLAB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Hermite,
    Predict,
    Simulate,
    Scan,
    Lln,
    Refute,
    Compare,
    VerifyB,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Hermite => "hermite",
            Command::Predict => "predict",
            Command::Simulate => "simulate",
            Command::Scan => "scan",
            Command::Lln => "lln",
            Command::Refute => "refute",
            Command::Compare => "compare",
            Command::VerifyB => "verify-b",
        }
    }

    /// Commands whose output depends on random draws.
    pub fn needs_seed(self) -> bool {
        !matches!(self, Command::Hermite | Command::Predict)
    }
}

/// A number or the keyword "theory".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumOrTheory {
    Value(f64),
    Keyword(String),
}

impl NumOrTheory {
    /// `Some(v)` for a number, `None` for "theory".
    pub fn value(&self, path: &str) -> Result<Option<f64>, CliError> {
        match self {
            NumOrTheory::Value(v) => Ok(Some(*v)),
            NumOrTheory::Keyword(k) if k == "theory" => Ok(None),
            NumOrTheory::Keyword(k) => Err(CliError::Config(format!("{path}: expected a number or \"theory\", got \"{k}\""))),
        }
    }

    pub fn parse_flag(s: &str) -> Result<Self, String> {
        if s == "theory" {
            return Ok(NumOrTheory::Keyword(s.into()));
        }
        s.parse::<f64>().map(NumOrTheory::Value).map_err(|_| format!("expected a number or \"theory\", got \"{s}\""))
    }
}

/// Step-size rule of grid experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepRuleConfig {
    Value(f64),
    List(Vec<f64>),
    Power { coefficient: f64, exponent: f64 },
    Keyword(String),
}

impl StepRuleConfig {
    pub fn resolve(&self, path: &str) -> Result<StepRule, CliError> {
        Ok(match self {
            StepRuleConfig::Value(v) => StepRule::Fixed(*v),
            StepRuleConfig::List(v) => StepRule::PerN(v.clone()),
            StepRuleConfig::Power { coefficient, exponent } => StepRule::Power { coefficient: *coefficient, exponent: *exponent },
            StepRuleConfig::Keyword(k) if k == "theory" => StepRule::Theory,
            StepRuleConfig::Keyword(k) => {
                return Err(CliError::Config(format!("{path}: expected a number, a list, a power rule or \"theory\", got \"{k}\"")))
            }
        })
    }
}

/// Samples-per-dimension rule of grid experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BudgetRuleConfig {
    Value(f64),
    List(Vec<f64>),
    Keyword(String),
}

impl BudgetRuleConfig {
    pub fn resolve(&self, path: &str, factor: f64) -> Result<BudgetRule, CliError> {
        Ok(match self {
            BudgetRuleConfig::Value(v) => BudgetRule::Fixed(*v),
            BudgetRuleConfig::List(v) => BudgetRule::PerN(v.clone()),
            BudgetRuleConfig::Keyword(k) if k == "theory" => BudgetRule::Theory { factor },
            BudgetRuleConfig::Keyword(k) => {
                return Err(CliError::Config(format!("{path}: expected a number, a list or \"theory\", got \"{k}\"")))
            }
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    /// supervised, glm, linear_regression, tensor_pca, composite_tensor, gaussian_mixture, population.
    pub family: Option<String>,
    pub activation: Option<String>,
    /// Polynomial teacher, coefficients of z^0, z^1, ...
    pub polynomial: Option<Vec<f64>>,
    pub student: Option<String>,
    pub student_polynomial: Option<Vec<f64>>,
    pub glm: Option<GlmFamily>,
    pub noise_std: Option<f64>,
    pub order: Option<usize>,
    pub orders: Option<[usize; 2]>,
    pub snr: Option<f64>,
    pub weight: Option<f64>,
    pub entries: Option<EntryDistribution>,
    pub p: Option<f64>,
    /// φ(m) coefficients for the population family.
    pub coefficients: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsBlock {
    pub n: Option<usize>,
    pub delta: Option<NumOrTheory>,
    pub alpha: Option<NumOrTheory>,
    /// Overrides ⌊αN⌋.
    pub steps: Option<u64>,
    /// "uniform" or "fixed".
    pub init: Option<String>,
    pub m0: Option<f64>,
    pub thresholds: Option<Vec<f64>>,
    pub stride: Option<u64>,
    pub diagnostics: Option<bool>,
    pub stop_at: Option<f64>,
    pub sign_symmetric: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    pub n_grid: Option<Vec<usize>>,
    pub seeds: Option<usize>,
    pub eta: Option<f64>,
    pub delta: Option<StepRuleConfig>,
    pub alpha: Option<BudgetRuleConfig>,
    pub budget_factor: Option<f64>,
    pub extra_thresholds: Option<Vec<f64>>,
    pub m0: Option<f64>,
    pub activations: Option<Vec<String>>,
    pub level: Option<f64>,
    pub iota: Option<f64>,
    pub probes: Option<usize>,
    pub samples_per_probe: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HermiteBlock {
    pub truncation: Option<usize>,
    pub quad_order: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictBlock {
    pub k: Option<usize>,
    pub n: Option<usize>,
    pub drift_coefficient: Option<f64>,
    pub lbar: Option<f64>,
    pub alpha: Option<f64>,
    pub eta: Option<f64>,
    pub m0: Option<f64>,
    pub gamma: Option<f64>,
    pub big_k: Option<f64>,
    pub d: Option<f64>,
}

/// Everything a run needs; every field is optional in the file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub master_seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub force: Option<bool>,
    pub model: Option<ModelBlock>,
    pub dynamics: Option<DynamicsBlock>,
    pub experiment: Option<ExperimentBlock>,
    pub hermite: Option<HermiteBlock>,
    pub predict: Option<PredictBlock>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// The configuration echoed in a run manifest.
    pub fn from_manifest(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read manifest {}: {e}", path.display())))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let config = value.get("config").cloned().ok_or_else(|| missing("config"))?;
        serde_json::from_value(config).map_err(|e| CliError::Config(format!("{}: config: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn model_mut(&mut self) -> &mut ModelBlock {
        self.model.get_or_insert_with(Default::default)
    }

    pub fn dynamics_mut(&mut self) -> &mut DynamicsBlock {
        self.dynamics.get_or_insert_with(Default::default)
    }

    pub fn experiment_mut(&mut self) -> &mut ExperimentBlock {
        self.experiment.get_or_insert_with(Default::default)
    }

    pub fn hermite_mut(&mut self) -> &mut HermiteBlock {
        self.hermite.get_or_insert_with(Default::default)
    }

    pub fn predict_mut(&mut self) -> &mut PredictBlock {
        self.predict.get_or_insert_with(Default::default)
    }

    pub fn master_seed(&self) -> Result<u64, CliError> {
        self.master_seed.ok_or_else(|| missing("master_seed"))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("sgdlab-out"))
    }

    pub fn threads(&self) -> usize {
        self.threads.unwrap_or(1).max(1)
    }

    /// Fills output directory and thread count from the environment when unset by flags.
    pub fn apply_env(&mut self, flag_output: bool, flag_threads: bool) -> Result<(), CliError> {
        if !flag_output {
            if let Ok(dir) = std::env::var(ENV_OUTPUT_DIR) {
                self.output_dir = Some(PathBuf::from(dir));
            }
        }
        if !flag_threads {
            if let Ok(t) = std::env::var(ENV_THREADS) {
                let t = t.parse().map_err(|_| CliError::Config(format!("{ENV_THREADS}: expected an integer, got \"{t}\"")))?;
                self.threads = Some(t);
            }
        }
        Ok(())
    }
}

pub fn missing(path: &str) -> CliError {
    CliError::Config(format!("missing required field `{path}`"))
}

pub fn parse_activation(name: &str, path: &str) -> Result<Activation, CliError> {
    name.parse().map_err(|e| CliError::Config(format!("{path}: {e}")))
}

fn activation_from(name: &Option<String>, poly: &Option<Vec<f64>>, path: &str) -> Result<Option<Activation>, CliError> {
    match (name, poly) {
        (Some(_), Some(_)) => Err(CliError::Config(format!("{path}: give either an activation name or a polynomial, not both"))),
        (Some(n), None) => parse_activation(n, path).map(Some),
        (None, Some(c)) => Ok(Some(Activation::Polynomial(c.clone()))),
        (None, None) => Ok(None),
    }
}

impl ModelBlock {
    /// The teacher activation of a supervised model.
    pub fn teacher(&self) -> Result<Activation, CliError> {
        activation_from(&self.activation, &self.polynomial, "model.activation")?.ok_or_else(|| missing("model.activation"))
    }

    pub fn family_name(&self) -> &str {
        self.family.as_deref().unwrap_or("supervised")
    }

    pub fn family(&self) -> Result<Family<f64>, CliError> {
        let need = |v: Option<f64>, path: &str| v.ok_or_else(|| missing(path));
        Ok(match self.family_name() {
            "supervised" => Family::Supervised {
                teacher: self.teacher()?,
                student: activation_from(&self.student, &self.student_polynomial, "model.student")?,
            },
            "glm" => Family::Glm(self.glm.ok_or_else(|| missing("model.glm"))?),
            "linear_regression" => Family::LinearRegression { noise_std: self.noise_std.unwrap_or(0.0) },
            "tensor_pca" => Family::TensorPca {
                order: self.order.ok_or_else(|| missing("model.order"))?,
                snr: self.snr.unwrap_or(1.0),
                entries: self.entries.unwrap_or_default(),
            },
            "composite_tensor" => {
                let [p, q] = self.orders.ok_or_else(|| missing("model.orders"))?;
                Family::CompositeTensor {
                    orders: (p, q),
                    snr: self.snr.unwrap_or(1.0),
                    weight: self.weight.unwrap_or(1.0),
                    entries: self.entries.unwrap_or_default(),
                }
            }
            "gaussian_mixture" => Family::GaussianMixture { p: need(self.p, "model.p")? },
            "population" => Family::Population {
                coefficients: self.coefficients.clone().ok_or_else(|| missing("model.coefficients"))?,
            },
            other => return Err(CliError::Config(format!("model.family: unknown family \"{other}\""))),
        })
    }

    /// The block with defaults that [`ModelBlock::family`] applied written in.
    pub fn echo(&self) -> Self {
        let mut out = self.clone();
        out.family = Some(self.family_name().to_string());
        match self.family_name() {
            "linear_regression" => out.noise_std = Some(self.noise_std.unwrap_or(0.0)),
            "tensor_pca" => {
                out.snr = Some(self.snr.unwrap_or(1.0));
                out.entries = Some(self.entries.unwrap_or_default());
            }
            "composite_tensor" => {
                out.snr = Some(self.snr.unwrap_or(1.0));
                out.weight = Some(self.weight.unwrap_or(1.0));
                out.entries = Some(self.entries.unwrap_or_default());
            }
            _ => {}
        }
        out
    }
}

impl ExperimentBlock {
    pub fn budget_factor(&self) -> f64 {
        self.budget_factor.unwrap_or(DEFAULT_BUDGET_FACTOR)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_simulate_config_parses() {
        let cfg = RunConfig::from_toml_str(
            r#"
            command = "simulate"
            master_seed = 7
            [model]
            activation = "relu"
            [dynamics]
            n = 100
            delta = 0.5
            alpha = 3
            "#,
        )
        .unwrap();
        assert_eq!(cfg.command, Some(Command::Simulate));
        assert_eq!(cfg.dynamics.as_ref().unwrap().delta, Some(NumOrTheory::Value(0.5)));
        assert_eq!(cfg.model.unwrap().family().unwrap(), Family::Supervised { teacher: Activation::Relu, student: None });
    }

    #[test]
    fn misspelled_field_is_named() {
        let err = RunConfig::from_toml_str("[dynamics]\ndetla = 0.5\n").unwrap_err();
        assert!(err.to_string().contains("detla"), "{err}");
    }

    #[test]
    fn theory_keyword() {
        let cfg = RunConfig::from_toml_str("[dynamics]\ndelta = \"theory\"\nalpha = \"bogus\"\n").unwrap();
        let d = cfg.dynamics.unwrap();
        assert_eq!(d.delta.unwrap().value("dynamics.delta").unwrap(), None);
        assert!(d.alpha.unwrap().value("dynamics.alpha").is_err());
    }

    #[test]
    fn step_rules() {
        let cfg = RunConfig::from_toml_str(
            "[experiment]\ndelta = { coefficient = 0.01, exponent = -0.5 }\nalpha = [1.0, 2.0]\n",
        )
        .unwrap();
        let e = cfg.experiment.unwrap();
        assert_eq!(e.delta.unwrap().resolve("d").unwrap(), StepRule::Power { coefficient: 0.01, exponent: -0.5 });
        assert_eq!(e.alpha.unwrap().resolve("a", 20.0).unwrap(), BudgetRule::PerN(vec![1.0, 2.0]));
    }

    #[test]
    fn families_from_blocks() {
        let m = ModelBlock { family: Some("gaussian_mixture".into()), p: Some(0.7), ..Default::default() };
        assert_eq!(m.family().unwrap(), Family::GaussianMixture { p: 0.7 });
        let m = ModelBlock { family: Some("tensor_pca".into()), ..Default::default() };
        assert!(m.family().unwrap_err().to_string().contains("model.order"));
        let m = ModelBlock { polynomial: Some(vec![0.0, 1.0]), activation: Some("relu".into()), ..Default::default() };
        assert!(m.family().is_err());
    }

    #[test]
    fn round_trip_through_toml() {
        let cfg = RunConfig {
            command: Some(Command::Scan),
            master_seed: Some(3),
            experiment: Some(ExperimentBlock {
                n_grid: Some(vec![32, 64]),
                delta: Some(StepRuleConfig::Power { coefficient: 0.1, exponent: -0.5 }),
                ..Default::default()
            }),
            ..Default::default()
        };
        assert_eq!(RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }
}
