//! Experiment configuration: a TOML file with an `[experiment]` section and
//! one section per model.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use portkey::{KernelKind, PortkeyBeta, DEFAULT_MAX_LOOPS};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Weibull,
    Correlation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub weibull: WeibullSection,
    #[serde(default)]
    pub correlation: CorrelationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub model: ModelKind,
    #[serde(with = "kernel_name")]
    pub kernel: KernelKind,
    pub betas: Vec<f64>,
    pub n_steps: usize,
    #[serde(default = "one")]
    pub n_replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_loops")]
    pub max_loops: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Write every `thin`-th step to the trace files. Summaries always use
    /// the full chain.
    #[serde(default = "one")]
    pub thin: usize,
    /// When false, wall times are written as zero so repeated runs are
    /// byte-identical.
    #[serde(default = "yes")]
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeibullSection {
    pub k: f64,
    pub gamma_shape: f64,
    pub gamma_rate: f64,
    pub proposal_sd: f64,
    pub initial_theta: f64,
}

impl Default for WeibullSection {
    fn default() -> Self {
        Self {
            k: 10.0,
            gamma_shape: 10.0,
            gamma_rate: 100.0,
            proposal_sd: 2.0,
            initial_theta: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrelationSection {
    /// CSV of observations, header row, one column per variable. Relative
    /// paths resolve against the config file's directory.
    pub data: Option<PathBuf>,
    pub standardize: bool,
    pub tau2: f64,
    pub a0: f64,
    pub b0: f64,
    pub proposal_sd_r: f64,
    pub proposal_sd_mu: f64,
    pub proposal_sd_sigma2: f64,
    pub initial_mu: f64,
    pub initial_sigma2: f64,
}

impl Default for CorrelationSection {
    fn default() -> Self {
        Self {
            data: None,
            standardize: true,
            tau2: 1.0,
            a0: 3.0,
            b0: 0.5,
            proposal_sd_r: 0.02,
            proposal_sd_mu: 0.3,
            proposal_sd_sigma2: 0.05,
            initial_mu: 0.0,
            initial_sigma2: 0.1,
        }
    }
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn default_max_loops() -> u64 {
    DEFAULT_MAX_LOOPS
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

mod kernel_name {
    use portkey::KernelKind;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(k: &KernelKind, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(k.as_str())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<KernelKind, D::Error> {
        let name = String::deserialize(d)?;
        name.parse().map_err(serde::de::Error::custom)
    }
}

fn positive(field: &str, v: f64) -> anyhow::Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        bail!("{field}: must be positive and finite, got {v}");
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file. A relative `correlation.data` path
    /// is resolved against the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg =
            Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))?;
        if let (Some(data), Some(dir)) = (&cfg.correlation.data, path.parent()) {
            if data.is_relative() {
                cfg.correlation.data = Some(dir.join(data));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let e = &self.experiment;
        if e.betas.is_empty() {
            bail!("experiment.betas: must list at least one value");
        }
        for (i, &b) in e.betas.iter().enumerate() {
            PortkeyBeta::new(b).map_err(|err| anyhow::anyhow!("experiment.betas[{i}]: {err}"))?;
        }
        if e.n_steps == 0 {
            bail!("experiment.n_steps: must be at least 1");
        }
        if e.n_replications == 0 {
            bail!("experiment.n_replications: must be at least 1");
        }
        if e.max_loops == 0 {
            bail!("experiment.max_loops: must be at least 1");
        }
        if e.thin == 0 {
            bail!("experiment.thin: must be at least 1");
        }
        match e.model {
            ModelKind::Weibull => {
                let w = &self.weibull;
                positive("weibull.k", w.k)?;
                positive("weibull.gamma_shape", w.gamma_shape)?;
                positive("weibull.gamma_rate", w.gamma_rate)?;
                positive("weibull.proposal_sd", w.proposal_sd)?;
                positive("weibull.initial_theta", w.initial_theta)?;
            }
            ModelKind::Correlation => {
                if !matches!(e.kernel, KernelKind::FlippedPortkey | KernelKind::TwoCoin) {
                    bail!("experiment.kernel: the correlation model supports flipped_portkey or two_coin, got {}", e.kernel);
                }
                let c = &self.correlation;
                if c.data.is_none() {
                    bail!("correlation.data: a data CSV is required for the correlation model");
                }
                positive("correlation.tau2", c.tau2)?;
                positive("correlation.a0", c.a0)?;
                positive("correlation.b0", c.b0)?;
                positive("correlation.proposal_sd_r", c.proposal_sd_r)?;
                positive("correlation.proposal_sd_mu", c.proposal_sd_mu)?;
                positive("correlation.proposal_sd_sigma2", c.proposal_sd_sigma2)?;
                positive("correlation.initial_sigma2", c.initial_sigma2)?;
                if !c.initial_mu.is_finite() {
                    bail!("correlation.initial_mu: must be finite");
                }
            }
        }
        Ok(())
    }
}
