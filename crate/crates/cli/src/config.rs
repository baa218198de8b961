use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use frictid_core::gradient::GradientMethod;
use frictid_core::harness::{default_initials, ModelKind, ScenarioConfig};
use frictid_core::identifier::IdentifierConfig;
use frictid_core::model::MonopedParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Scenario keys that live in the `[model]` section instead.
const MODEL_KEYS: [&str; 3] = ["model", "base_mass", "monoped"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub base_mass: f64,
    pub monoped: MonopedParams,
}

impl Default for ModelSection {
    fn default() -> Self {
        let sc = ScenarioConfig::default();
        Self {
            kind: sc.model,
            base_mass: sc.base_mass,
            monoped: sc.monoped,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub initials: Vec<f64>,
    pub rho: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            initials: default_initials(),
            rho: vec![1e-6, 1e-3, 0.05, 1.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub trials: usize,
    pub methods: Vec<GradientMethod>,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            trials: 7,
            methods: GradientMethod::ALL_IDENTIFIERS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckSection {
    /// Central-difference step in mu.
    pub fd_step: f64,
    /// Relative error bound for the hard-contact gradient.
    pub tolerance: f64,
    /// Relative error bound for the smoothed gradient against the relaxed solution.
    pub smoothed_tolerance: f64,
    pub rho: Vec<f64>,
}

impl Default for GradcheckSection {
    fn default() -> Self {
        Self {
            fd_step: 1e-6,
            tolerance: 1e-4,
            smoothed_tolerance: 1e-3,
            rho: vec![0.05, 0.01],
        }
    }
}

/// Everything a run needs. Model and scenario sections are merged into one
/// [`ScenarioConfig`] on load.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub method: Option<GradientMethod>,
    pub out: Option<PathBuf>,
    pub model: ModelSection,
    pub scenario: ScenarioConfig,
    pub identifier: IdentifierConfig,
    pub sweep: SweepSection,
    pub bench: BenchSection,
    pub gradcheck: GradcheckSection,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub method: Option<GradientMethod>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text)?;
        if let Some(toml::Value::Table(sc)) = table.get("scenario") {
            if let Some(key) = MODEL_KEYS.iter().find(|k| sc.contains_key(**k)) {
                bail!("key `scenario.{key}` belongs in the [model] section");
            }
        }
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Applies overrides, copies the model section into the scenario and
    /// checks every section.
    pub fn resolve(mut self, overrides: &Overrides) -> Result<Self> {
        let method = overrides
            .method
            .or(self.method)
            .unwrap_or(self.identifier.gradient_method);
        self.method = Some(method);
        self.identifier.gradient_method = method;
        if let Some(seed) = overrides.seed.or(self.seed) {
            self.scenario.seed = seed;
            self.identifier.seed = seed;
        }
        self.seed = Some(self.scenario.seed);
        self.out = Some(
            overrides
                .out
                .clone()
                .or(self.out)
                .unwrap_or_else(|| PathBuf::from("out")),
        );
        self.scenario.model = self.model.kind;
        self.scenario.base_mass = self.model.base_mass;
        self.scenario.monoped = self.model.monoped.clone();

        self.scenario
            .validate()
            .map_err(|e| anyhow!("scenario: {e}"))?;
        self.scenario
            .build_model()
            .map_err(|e| anyhow!("model: {e}"))?;
        self.identifier
            .validate()
            .map_err(|e| anyhow!("identifier: {e}"))?;
        if self.bench.trials == 0 {
            bail!("bench.trials must be at least 1");
        }
        if self.sweep.initials.is_empty() || self.sweep.rho.is_empty() {
            bail!("sweep lists must not be empty");
        }
        let gc = &self.gradcheck;
        if !(gc.fd_step > 0.0 && gc.tolerance > 0.0 && gc.smoothed_tolerance > 0.0) {
            bail!("gradcheck step and tolerances must be positive");
        }
        Ok(self)
    }

    pub fn method(&self) -> GradientMethod {
        self.method.unwrap_or(self.identifier.gradient_method)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(self.scenario.seed)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Resolved configuration as TOML, loadable again with the same result.
    pub fn to_toml(&self) -> Result<String> {
        let mut table = toml::Table::try_from(self)?;
        if let Some(toml::Value::Table(sc)) = table.get_mut("scenario") {
            for key in MODEL_KEYS {
                sc.remove(key);
            }
        }
        Ok(toml::to_string(&table)?)
    }

    /// SHA-256 of the resolved configuration text, leaving out the output
    /// directory.
    pub fn hash(&self) -> Result<String> {
        let unplaced = Self {
            out: None,
            ..self.clone()
        };
        Ok(hex::encode(Sha256::digest(unplaced.to_toml()?.as_bytes())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ExperimentConfig::parse("")
            .unwrap()
            .resolve(&Overrides::default())
            .unwrap();
        assert_eq!(c.identifier.gamma_conf, 0.58);
        assert_eq!(c.method(), GradientMethod::Smoothed);
        assert_eq!(c.sweep.initials.len(), 20);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::parse("[identifier]\ngama_conf = 0.5\n").unwrap_err();
        assert!(format!("{err:#}").contains("gama_conf"), "{err:#}");
    }

    #[test]
    fn model_keys_stay_in_model_section() {
        let err = ExperimentConfig::parse("[scenario]\nbase_mass = 3.0\n").unwrap_err();
        assert!(err.to_string().contains("scenario.base_mass"));
    }

    #[test]
    fn echo_round_trips() {
        let text =
            "seed = 4\nmethod = \"rand1\"\n[model]\nbase_mass = 9.0\n[scenario]\nduration = 2.0\n\
                    [scenario.terrain]\nsegments = [{ start = 0.0, end = 2.0, mu = 0.19 }]\n";
        let c = ExperimentConfig::parse(text)
            .unwrap()
            .resolve(&Overrides::default())
            .unwrap();
        let again = ExperimentConfig::parse(&c.to_toml().unwrap())
            .unwrap()
            .resolve(&Overrides::default())
            .unwrap();
        assert_eq!(c, again);
        assert_eq!(c.hash().unwrap(), again.hash().unwrap());
        assert_eq!(again.scenario.base_mass, 9.0);
        assert_eq!(again.identifier.seed, 4);
    }

    #[test]
    fn flags_override_file() {
        let c = ExperimentConfig::parse("seed = 1\nmethod = \"nonsmooth\"\n")
            .unwrap()
            .resolve(&Overrides {
                seed: Some(9),
                method: Some(GradientMethod::RandZeroth),
                out: None,
            })
            .unwrap();
        assert_eq!(c.seed(), 9);
        assert_eq!(c.scenario.seed, 9);
        assert_eq!(c.method(), GradientMethod::RandZeroth);
        assert_eq!(c.identifier.gradient_method, GradientMethod::RandZeroth);
    }
}
