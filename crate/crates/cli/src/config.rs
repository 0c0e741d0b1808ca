//! Run configuration: one TOML file with a section per module. Keys missing
//! from the file keep their defaults, section by section.

use std::path::{Path, PathBuf};

use rtmsim_core::bioheat::SolverConfig;
use rtmsim_core::cohort::{CohortConfig, Group, SimulationSetup, SurrogateConfig};
use rtmsim_core::phantom::PhantomSpec;
use rtmsim_core::radiometry::RadiometryConfig;
use rtmsim_learn::{Algorithm, Hyperparameters};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Environment variable naming the config file used when `--config` is absent.
pub const CONFIG_ENV: &str = "RTMSIM_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub target_edge_m: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { target_edge_m: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Every patient goes through phantom, mesh, bioheat and radiometry.
    #[default]
    Simulation,
    /// Independent Gaussian features; for pipeline checks only.
    Gaussian,
}

impl std::str::FromStr for GeneratorKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simulation" => Ok(GeneratorKind::Simulation),
            "gaussian" => Ok(GeneratorKind::Gaussian),
            _ => Err(format!("unknown generator `{s}` (expected simulation or gaussian)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub kind: GeneratorKind,
    /// Class mean gap of the Gaussian generator, in feature standard deviations.
    pub separation: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            kind: GeneratorKind::Simulation,
            separation: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub repeats: usize,
    pub classifiers: Vec<Algorithm>,
    pub groups: Vec<Group>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            repeats: 10,
            classifiers: Algorithm::ALL.to_vec(),
            groups: Group::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Global seed. It replaces `phantom.seed`; the surrogate cohort uses `seed + 1`.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub phantom: PhantomSpec,
    pub mesh: MeshConfig,
    pub solver: SolverConfig,
    pub radiometry: RadiometryConfig,
    pub generator: GeneratorConfig,
    pub cohort: CohortConfig,
    pub surrogate: SurrogateConfig,
    pub learners: Hyperparameters,
    pub evaluation: EvaluationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let desk = SimulationSetup::desk();
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            phantom: desk.phantom,
            mesh: MeshConfig {
                target_edge_m: desk.mesh_edge_m,
            },
            solver: desk.solver,
            radiometry: desk.radiometry,
            generator: GeneratorConfig::default(),
            cohort: CohortConfig::default(),
            surrogate: SurrogateConfig::default(),
            learners: Hyperparameters::default(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

/// Overlays `over` onto `base`, recursing into tables.
fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_table() && v.is_table() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let file: toml::Value = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut merged = toml::Value::try_from(RunConfig::default()).map_err(|e| CliError::Config(e.to_string()))?;
        merge(&mut merged, file);
        let cfg: RunConfig = merged.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn resolve(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the effective configuration after flag overrides. The
    /// output directory is left out: it does not change any data.
    pub fn hash(&self) -> String {
        let cfg = RunConfig {
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        hex::encode(Sha256::digest(cfg.to_toml().as_bytes()))
    }

    pub fn phantom_spec(&self) -> PhantomSpec {
        PhantomSpec {
            seed: self.seed,
            ..self.phantom.clone()
        }
    }

    pub fn setup(&self) -> SimulationSetup {
        SimulationSetup {
            phantom: self.phantom_spec(),
            mesh_edge_m: self.mesh.target_edge_m,
            solver: self.solver.clone(),
            radiometry: self.radiometry.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        if !(self.mesh.target_edge_m > 0.0 && self.mesh.target_edge_m.is_finite()) {
            return Err(CliError::Config("mesh.target_edge_m must be positive".into()));
        }
        self.solver.validate().map_err(|e| cfg(&e))?;
        self.radiometry.validate().map_err(|e| cfg(&e))?;
        self.cohort.validate().map_err(|e| cfg(&e))?;
        if !(self.surrogate.noise_k >= 0.0 && self.surrogate.noise_k.is_finite()) {
            return Err(CliError::Config("surrogate.noise_k must be finite and nonnegative".into()));
        }
        if !self.generator.separation.is_finite() {
            return Err(CliError::Config("generator.separation must be finite".into()));
        }
        self.learners.validate().map_err(|e| cfg(&e))?;
        if self.evaluation.repeats == 0 {
            return Err(CliError::Config("evaluation.repeats must be at least 1".into()));
        }
        self.phantom_spec().validate().map_err(|e| CliError::InvalidSpec(e.to_string()))
    }
}
