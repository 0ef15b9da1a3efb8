use crate::error::{Error, Result};
use crate::inference::{
    ChainParams, DEFAULT_BETA, DEFAULT_PCN_STEPS, DEFAULT_PRIOR_FACTOR, DEFAULT_SWEEPS,
};
use crate::levelset::ThresholdSpec;
use crate::mesh::{Domain, Mesh, ObservationPlan, DEFAULT_SPACING};
use crate::prior::CovarianceSpec;
use serde::{Deserialize, Serialize};
use std::path::Path;

fn default_half_width() -> f64 {
    1.0
}

fn default_spacing() -> f64 {
    DEFAULT_SPACING
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default = "default_spacing")]
    pub mesh_spacing: f64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            half_width: default_half_width(),
            mesh_spacing: default_spacing(),
        }
    }
}

/// Observation times, either listed explicitly or as a uniform grid
/// step, 2*step, ..., count*step.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimesConfig {
    Explicit(Vec<f64>),
    Uniform { step: f64, count: usize },
}

impl TimesConfig {
    pub fn expand(&self) -> Result<Vec<f64>> {
        match self {
            TimesConfig::Explicit(v) => Ok(v.clone()),
            TimesConfig::Uniform { step, count } => {
                if !(*step > 0.0) || *count == 0 {
                    return Err(Error::Config(format!(
                        "uniform time grid needs a positive step and count, got step {step}, count {count}"
                    )));
                }
                Ok((1..=*count).map(|k| k as f64 * step).collect())
            }
        }
    }
}

fn default_times() -> TimesConfig {
    TimesConfig::Explicit(vec![1.0])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationConfig {
    pub sensors: usize,
    #[serde(default = "default_times")]
    pub times: TimesConfig,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSource {
    pub x: f64,
    pub y: f64,
    pub intensity: f64,
}

fn default_relative_level() -> f64 {
    0.01
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// delta: noise std is delta times the RMS of the clean signal
    /// (or delta times its l2 norm with literal_norm).
    #[serde(default = "default_relative_level")]
    pub relative_level: f64,
    #[serde(default)]
    pub literal_norm: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            relative_level: default_relative_level(),
            literal_norm: false,
        }
    }
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}

fn default_pcn_steps() -> usize {
    DEFAULT_PCN_STEPS
}

fn default_sweeps() -> usize {
    DEFAULT_SWEEPS
}

fn default_prior_factor() -> f64 {
    DEFAULT_PRIOR_FACTOR
}

fn default_thinning() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_pcn_steps")]
    pub pcn_steps: usize,
    #[serde(default = "default_sweeps")]
    pub sweeps: usize,
    #[serde(default = "default_prior_factor")]
    pub prior_factor: f64,
    #[serde(default = "default_thinning")]
    pub thinning: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            beta: default_beta(),
            pcn_steps: default_pcn_steps(),
            sweeps: default_sweeps(),
            prior_factor: default_prior_factor(),
            thinning: default_thinning(),
        }
    }
}

impl SamplerConfig {
    pub fn chain_params(&self) -> ChainParams {
        ChainParams {
            beta: self.beta,
            pcn_steps: self.pcn_steps,
            sweeps: self.sweeps,
            prior_factor: self.prior_factor,
            thinning: self.thinning,
        }
    }
}

fn default_modes() -> usize {
    crate::forward::DEFAULT_MODES
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardConfig {
    #[serde(default = "default_modes")]
    pub modes: usize,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        Self {
            modes: default_modes(),
        }
    }
}

/// Complete description of one reconstruction run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub domain: DomainConfig,
    pub observation: ObservationConfig,
    pub truth: Vec<TruthSource>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub prior: CovarianceSpec,
    #[serde(default)]
    pub levelset: ThresholdSpec,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub forward: ForwardConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = toml::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Config("config name must not be empty".into()));
        }
        if self
            .name
            .chars()
            .any(|c| !(c.is_ascii_alphanumeric() || c == '_' || c == '-'))
        {
            return Err(Error::Config(format!(
                "config name '{}' may only contain letters, digits, '_' and '-'",
                self.name
            )));
        }
        let domain = self.domain()?;
        let mesh = self.mesh()?;
        self.plan(&domain)?;
        self.prior.validate()?;
        self.levelset.validate()?;
        self.sampler.chain_params().validate()?;
        if self.forward.modes == 0 {
            return Err(Error::Config("forward.modes must be at least 1".into()));
        }
        if !(self.noise.relative_level >= 0.0) || !self.noise.relative_level.is_finite() {
            return Err(Error::Config(format!(
                "noise.relative_level must be a finite non-negative number, got {}",
                self.noise.relative_level
            )));
        }
        for (i, s) in self.truth.iter().enumerate() {
            if !s.intensity.is_finite() || s.intensity == 0.0 {
                return Err(Error::Config(format!(
                    "truth source {i} has intensity {}, expected nonzero finite",
                    s.intensity
                )));
            }
            if mesh.index_of(s.x, s.y).is_none() {
                return Err(Error::Config(format!(
                    "truth source {i} at ({}, {}) is not an interior mesh node",
                    s.x, s.y
                )));
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<Domain> {
        Domain::new(self.domain.half_width)
    }

    pub fn mesh(&self) -> Result<Mesh> {
        Mesh::build(self.domain()?, self.domain.mesh_spacing)
    }

    pub fn plan(&self, domain: &Domain) -> Result<ObservationPlan> {
        ObservationPlan::ring(
            domain,
            self.observation.sensors,
            self.observation.times.expand()?,
        )
    }
}
