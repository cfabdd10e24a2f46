//! Fully resolved run configuration. This is what a manifest stores and what
//! `rerun` executes, so every default is written out explicitly.

use blindeq::baselines::AdaptConfig;
use blindeq::experiment::{EqualizerKind, ExperimentSpec};
use blindeq::vae::{AdamConfig, TrainConfig};
use blindeq::{ChannelSpec, ComplexSeq, PaddingMode};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub name: String,
    /// `[re, im]` per tap.
    pub taps: Vec<[f64; 2]>,
    pub padding: String,
}

impl ChannelConfig {
    pub fn from_spec(name: &str, spec: &ChannelSpec) -> Self {
        Self {
            name: name.to_string(),
            taps: spec.taps.iter().map(|z| [z.re, z.im]).collect(),
            padding: spec.padding_mode.name().to_string(),
        }
    }

    pub fn to_spec(&self) -> Result<ChannelSpec, CliError> {
        let taps = ComplexSeq::from_complex(self.taps.iter().map(|&[r, i]| Complex64::new(r, i)));
        Ok(ChannelSpec::new(taps, 0.0, parse_padding(&self.padding)?)?)
    }
}

fn parse_padding(s: &str) -> Result<PaddingMode, CliError> {
    Ok(s.parse::<PaddingMode>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeConfig {
    pub subseq_len: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub max_updates: usize,
    pub patience_window: usize,
    pub monitor_every: usize,
    pub monitor_len: usize,
    pub rel_tol: f64,
    pub hhat_len: usize,
    pub padding: String,
    pub init_seed: u64,
    pub hhat_init_std: f64,
    pub decoder_init_std: f64,
}

impl VaeConfig {
    pub fn from_train(cfg: &TrainConfig) -> Self {
        Self {
            subseq_len: cfg.subseq_len,
            learning_rate: cfg.adam.learning_rate,
            adam_beta1: cfg.adam.beta1,
            adam_beta2: cfg.adam.beta2,
            adam_eps: cfg.adam.eps,
            max_updates: cfg.max_updates,
            patience_window: cfg.patience_window,
            monitor_every: cfg.monitor_every,
            monitor_len: cfg.monitor_len,
            rel_tol: cfg.rel_tol,
            hhat_len: cfg.hhat_len,
            padding: cfg.padding_mode.name().to_string(),
            init_seed: cfg.init_seed,
            hhat_init_std: cfg.hhat_init_std,
            decoder_init_std: cfg.decoder_init_std,
        }
    }

    pub fn to_train(&self) -> Result<TrainConfig, CliError> {
        let cfg = TrainConfig {
            subseq_len: self.subseq_len,
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                beta1: self.adam_beta1,
                beta2: self.adam_beta2,
                eps: self.adam_eps,
            },
            max_updates: self.max_updates,
            patience_window: self.patience_window,
            monitor_every: self.monitor_every,
            monitor_len: self.monitor_len,
            rel_tol: self.rel_tol,
            hhat_len: self.hhat_len,
            padding_mode: parse_padding(&self.padding)?,
            init_seed: self.init_seed,
            hhat_init_std: self.hhat_init_std,
            decoder_init_std: self.decoder_init_std,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptSettings {
    pub step_size: f64,
    pub passes: usize,
    pub taps: usize,
    pub normalize: bool,
    pub cma_r2: f64,
}

impl From<&AdaptConfig> for AdaptSettings {
    fn from(c: &AdaptConfig) -> Self {
        Self {
            step_size: c.step_size,
            passes: c.passes,
            taps: c.taps,
            normalize: c.normalize,
            cma_r2: c.cma_r2,
        }
    }
}

impl From<&AdaptSettings> for AdaptConfig {
    fn from(c: &AdaptSettings) -> Self {
        Self {
            step_size: c.step_size,
            passes: c.passes,
            taps: c.taps,
            normalize: c.normalize,
            cma_r2: c.cma_r2,
        }
    }
}

/// One sweep of the experiment; several arms share one CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmConfig {
    pub tag: String,
    pub snr_grid: Vec<f64>,
    pub train_len: usize,
    pub trials: usize,
    pub test_len: usize,
    pub equalizers: Vec<String>,
    pub base_seed: u64,
    pub vae: VaeConfig,
    pub cma: AdaptSettings,
    pub mmse: AdaptSettings,
}

impl ArmConfig {
    pub fn from_spec(spec: &ExperimentSpec) -> Self {
        Self {
            tag: spec.tag.clone(),
            snr_grid: spec.snr_grid.clone(),
            train_len: spec.train_len,
            trials: spec.trials,
            test_len: spec.test_len,
            equalizers: spec.equalizers.iter().map(|e| e.name().to_string()).collect(),
            base_seed: spec.base_seed,
            vae: VaeConfig::from_train(&spec.vae),
            cma: (&spec.cma).into(),
            mmse: (&spec.mmse).into(),
        }
    }

    pub fn to_spec(&self, channel: &ChannelConfig) -> Result<ExperimentSpec, CliError> {
        let equalizers = self
            .equalizers
            .iter()
            .map(|e| e.parse::<EqualizerKind>())
            .collect::<Result<Vec<_>, _>>()?;
        let mut spec = ExperimentSpec::new(channel.name.clone(), channel.to_spec()?, self.snr_grid.clone(), self.train_len);
        spec.trials = self.trials;
        spec.test_len = self.test_len;
        spec.equalizers = equalizers;
        spec.base_seed = self.base_seed;
        spec.vae = self.vae.to_train()?;
        spec.cma = (&self.cma).into();
        spec.mmse = (&self.mmse).into();
        spec.tag = self.tag.clone();
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub channel: ChannelConfig,
    pub arms: Vec<ArmConfig>,
    /// Fill the wall-time column. Such outputs are not byte-reproducible.
    pub timings: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualizeConfig {
    pub input: String,
    pub vae: VaeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub channel: ChannelConfig,
    pub snr_db: f64,
    pub train_len: usize,
    pub test_len: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    SerVsSnr(ExperimentConfig),
    SerVsTrain(ExperimentConfig),
    HhatRobustness(ExperimentConfig),
    Convergence(ExperimentConfig),
    Equalize(EqualizeConfig),
    Generate(GenerateConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub base_seed: u64,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub outputs: Vec<String>,
    pub config: RunConfig,
}
