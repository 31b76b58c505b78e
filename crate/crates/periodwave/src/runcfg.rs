//! Run configuration: defaults, flat dotted-key JSON config files, CLI
//! overrides, and the reproducibility manifest every run writes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::estimator::{Activation, EstimatorConfig, MelEncoderConfig};
use crate::mel::MelConfig;
use crate::sampler::{OdeMethod, SamplerConfig};
use crate::train::TrainConfig;

pub const DEVICE_ENV: &str = "PERIODWAVE_DEVICE";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub mel: MelConfig,
    pub estimator: EstimatorConfig,
    pub mel_encoder: MelEncoderConfig,
    pub train: TrainConfig,
    pub sampler: SamplerConfig,
    /// Training wav file or directory of wav files.
    pub data: Option<PathBuf>,
    /// None = full-band model; Some(k) = wavelet band k in 0..4.
    pub band: Option<usize>,
    /// Opaque compute-device identifier, recorded for reproducibility.
    pub device: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1234,
            mel: MelConfig::default(),
            estimator: EstimatorConfig::full_band(),
            mel_encoder: MelEncoderConfig::full_band(),
            train: TrainConfig::default(),
            sampler: SamplerConfig::default(),
            data: None,
            band: None,
            device: std::env::var(DEVICE_ENV).unwrap_or_else(|_| "cpu".into()),
        }
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::Config(format!("{key}: expected a number")))
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::Config(format!("{key}: expected a non-negative integer")))
}

fn as_u64(key: &str, v: &Value) -> Result<u64> {
    v.as_u64()
        .ok_or_else(|| Error::Config(format!("{key}: expected a non-negative integer")))
}

fn as_bool(key: &str, v: &Value) -> Result<bool> {
    v.as_bool()
        .ok_or_else(|| Error::Config(format!("{key}: expected a boolean")))
}

fn as_str<'v>(key: &str, v: &'v Value) -> Result<&'v str> {
    v.as_str()
        .ok_or_else(|| Error::Config(format!("{key}: expected a string")))
}

fn as_usize_vec(key: &str, v: &Value) -> Result<Vec<usize>> {
    v.as_array()
        .and_then(|a| a.iter().map(|x| x.as_u64().map(|u| u as usize)).collect())
        .ok_or_else(|| Error::Config(format!("{key}: expected an array of integers")))
}

impl RunConfig {
    /// Load a flat dotted-key JSON object, e.g. {"train.lr": 2e-4}.
    pub fn from_file(path: impl AsRef<Path>) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        cfg.apply_file(path)?;
        Ok(cfg)
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let map = value
            .as_object()
            .ok_or_else(|| Error::Config(format!("{}: expected a JSON object", path.display())))?;
        // presets first so explicit keys override them regardless of order
        if let Some(v) = map.get("estimator.preset") {
            self.apply("estimator.preset", v)?;
        }
        for (k, v) in map {
            if k != "estimator.preset" {
                self.apply(k, v)?;
            }
        }
        Ok(())
    }

    /// Apply one dotted key. Unknown keys are errors.
    pub fn apply(&mut self, key: &str, v: &Value) -> Result<()> {
        match key {
            "seed" => self.seed = as_u64(key, v)?,
            "device" => self.device = as_str(key, v)?.to_string(),
            "band" => {
                self.band = Some(as_usize(key, v)?);
            }
            "data.train" => self.data = Some(PathBuf::from(as_str(key, v)?)),

            "mel.fft_size" => self.mel.fft_size = as_usize(key, v)?,
            "mel.hop_size" => self.mel.hop_size = as_usize(key, v)?,
            "mel.win_size" => self.mel.win_size = as_usize(key, v)?,
            "mel.n_mels" => {
                self.mel.n_mels = as_usize(key, v)?;
                self.mel_encoder.n_mels = self.mel.n_mels;
            }
            "mel.fmin" => self.mel.fmin = as_f64(key, v)?,
            "mel.fmax" => self.mel.fmax = as_f64(key, v)?,
            "mel.sample_rate" => self.mel.sample_rate = as_u64(key, v)? as u32,
            "mel.log_floor" => self.mel.log_floor = as_f64(key, v)?,

            "estimator.preset" => match as_str(key, v)? {
                "full-band" => self.estimator = EstimatorConfig::full_band(),
                s if s.starts_with("multi-band:") => {
                    let k: usize = s["multi-band:".len()..]
                        .parse()
                        .map_err(|_| Error::Config(format!("bad preset {s}")))?;
                    self.estimator = EstimatorConfig::multi_band(k);
                    self.band = Some(k);
                }
                "tiny" => {
                    self.estimator = EstimatorConfig::tiny(vec![1, 2, 3], 0, false);
                    self.mel_encoder =
                        MelEncoderConfig::tiny(vec![1, 2, 3], self.mel.n_mels, 32);
                }
                other => return Err(Error::Config(format!("unknown estimator preset {other}"))),
            },
            "estimator.periods" => {
                self.estimator.periods = as_usize_vec(key, v)?;
                self.mel_encoder.period_strides = self.estimator.periods.clone();
            }
            "estimator.down_ratios" => self.estimator.down_ratios = as_usize_vec(key, v)?,
            "estimator.up_ratios" => self.estimator.up_ratios = as_usize_vec(key, v)?,
            "estimator.dblock_dims" => self.estimator.dblock_dims = as_usize_vec(key, v)?,
            "estimator.mblock_dim" => self.estimator.mblock_dim = as_usize(key, v)?,
            "estimator.ublock_dims" => self.estimator.ublock_dims = as_usize_vec(key, v)?,
            "estimator.res_kernel" => self.estimator.res_kernel = as_usize(key, v)?,
            "estimator.res_dilations" => self.estimator.res_dilations = as_usize_vec(key, v)?,
            "estimator.final_res_kernel" => self.estimator.final_res_kernel = as_usize(key, v)?,
            "estimator.final_res_dilations" => {
                self.estimator.final_res_dilations = as_usize_vec(key, v)?
            }
            "estimator.time_embed_dim" => self.estimator.time_embed_dim = as_usize(key, v)?,
            "estimator.period_embed_dim" => self.estimator.period_embed_dim = as_usize(key, v)?,
            "estimator.mlp_dims" => self.estimator.mlp_dims = as_usize_vec(key, v)?,
            "estimator.activation" => {
                self.estimator.activation = match as_str(key, v)? {
                    "silu" => Activation::Silu,
                    "gelu" => Activation::Gelu,
                    "leaky_relu" => Activation::LeakyRelu,
                    other => return Err(Error::Config(format!("unknown activation {other}"))),
                }
            }
            "estimator.multiband" => self.estimator.multiband = as_bool(key, v)?,
            "estimator.cond_channels" => self.estimator.cond_channels = as_usize(key, v)?,

            "mel_encoder.mel_embed_dim" => self.mel_encoder.mel_embed_dim = as_usize(key, v)?,
            "mel_encoder.n_blocks_stage1" => self.mel_encoder.n_blocks_stage1 = as_usize(key, v)?,
            "mel_encoder.hidden_dim_stage1" => {
                self.mel_encoder.hidden_dim_stage1 = as_usize(key, v)?
            }
            "mel_encoder.drop_path" => self.mel_encoder.drop_path = as_f64(key, v)?,
            "mel_encoder.upsample_ratio" => self.mel_encoder.upsample_ratio = as_usize(key, v)?,
            "mel_encoder.upsample_dim" => self.mel_encoder.upsample_dim = as_usize(key, v)?,
            "mel_encoder.n_blocks_stage2" => self.mel_encoder.n_blocks_stage2 = as_usize(key, v)?,
            "mel_encoder.hidden_dim_stage2" => {
                self.mel_encoder.hidden_dim_stage2 = as_usize(key, v)?
            }
            "mel_encoder.out_dim" => self.mel_encoder.out_dim = as_usize(key, v)?,

            "train.lr" => self.train.lr = as_f64(key, v)?,
            "train.batch_size" => self.train.batch_size = as_usize(key, v)?,
            "train.segment" => self.train.segment = as_usize(key, v)?,
            "train.sigma_min" => self.train.sigma_min = as_f64(key, v)?,
            "train.max_steps" => self.train.max_steps = as_u64(key, v)?,
            "train.noise_scale" => self.train.noise_scale = as_f64(key, v)?,
            "train.weight_decay" => self.train.weight_decay = as_f64(key, v)?,
            "train.grad_clip" => self.train.grad_clip = as_f64(key, v)?,

            "sampler.method" => self.sampler.method = as_str(key, v)?.parse::<OdeMethod>()?,
            "sampler.steps" => self.sampler.steps = as_usize(key, v)?,
            "sampler.tau" => self.sampler.temperature = as_f64(key, v)?,
            "sampler.noise_scale" => self.sampler.noise_scale = as_f64(key, v)?,
            "sampler.freeu_alpha" => {
                self.sampler.freeu.skip_scale = as_f64(key, v)?;
                self.sampler.freeu.enabled = true;
            }
            "sampler.freeu_beta" => {
                self.sampler.freeu.backbone_scale = as_f64(key, v)?;
                self.sampler.freeu.enabled = true;
            }
            "sampler.band_steps" => {
                let steps = as_usize_vec(key, v)?;
                self.sampler.per_band_steps = Some(band_array(key, &steps)?);
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown config key {other}; see the documented key list"
                )))
            }
        }
        Ok(())
    }
}

pub fn band_array(key: &str, steps: &[usize]) -> Result<[usize; 4]> {
    if steps.len() != 4 {
        return Err(Error::Config(format!("{key}: expected exactly 4 entries")));
    }
    Ok([steps[0], steps[1], steps[2], steps[3]])
}

/// Reproducibility record written next to every run's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub command: String,
    pub seed: u64,
    pub device: String,
    pub code_version: String,
    pub code_hash: String,
    pub config: &'a RunConfig,
}

pub fn code_version_hash() -> (String, String) {
    let version = format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
    let hash = format!("{:016x}", crate::estimator::fnv1a64(version.as_bytes()));
    (version, hash)
}

pub fn write_run_manifest(
    path: impl AsRef<Path>,
    command: &str,
    cfg: &RunConfig,
) -> Result<()> {
    let (code_version, code_hash) = code_version_hash();
    let manifest = RunManifest {
        command: command.to_string(),
        seed: cfg.seed,
        device: cfg.device.clone(),
        code_version,
        code_hash,
        config: cfg,
    };
    let path = path.as_ref();
    std::fs::write(
        path,
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Msg(e.to_string()))?,
    )
    .map_err(|e| Error::io(path, e))
}
