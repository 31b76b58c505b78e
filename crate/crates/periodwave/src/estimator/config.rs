//! Estimator and Mel-encoder hyperparameter records.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Silu,
    Gelu,
    LeakyRelu,
}

/// Inference-time rescaling of skip (alpha) and backbone (beta) features at
/// every decoder skip junction. (1, 1) is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeUParams {
    pub skip_scale: f64,
    pub backbone_scale: f64,
    pub enabled: bool,
}

impl Default for FreeUParams {
    fn default() -> Self {
        FreeUParams {
            skip_scale: 1.0,
            backbone_scale: 1.0,
            enabled: false,
        }
    }
}

impl FreeUParams {
    /// The grid-searched operating point (s_w 0.9, b_w 1.1).
    pub fn tuned() -> Self {
        FreeUParams {
            skip_scale: 0.9,
            backbone_scale: 1.1,
            enabled: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.skip_scale <= 0.0 || self.backbone_scale <= 0.0 {
            return Err(Error::Config("freeu scales must be > 0".into()));
        }
        Ok(())
    }
}

/// Architecture of the period-conditional vector-field estimator.
///
/// `down_ratios[0]` is the (ratio-1) input stage; each following entry is the
/// time-axis stride into the next encoder stage, the last one entering the
/// middle block. `dblock_dims` + `mblock_dim` are the stage widths; the
/// decoder mirrors them through `ublock_dims` / `up_ratios`. In the
/// multi-band variant the first encoder stride is replaced by a Haar
/// analysis step (and the last decoder stride by its synthesis inverse),
/// halving time and doubling channels losslessly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub periods: Vec<usize>,
    pub down_ratios: Vec<usize>,
    pub up_ratios: Vec<usize>,
    pub dblock_dims: Vec<usize>,
    pub mblock_dim: usize,
    pub ublock_dims: Vec<usize>,
    pub res_kernel: usize,
    pub res_dilations: Vec<usize>,
    pub final_res_kernel: usize,
    pub final_res_dilations: Vec<usize>,
    pub time_embed_dim: usize,
    pub period_embed_dim: usize,
    pub mlp_dims: Vec<usize>,
    pub activation: Activation,
    pub multiband: bool,
    /// Extra input channels carrying already-generated lower bands.
    pub cond_channels: usize,
}

impl EstimatorConfig {
    /// Full-band defaults.
    pub fn full_band() -> Self {
        EstimatorConfig {
            periods: vec![1, 2, 3, 5, 7],
            down_ratios: vec![1, 4, 4, 4],
            up_ratios: vec![4, 4, 4],
            dblock_dims: vec![32, 64, 128],
            mblock_dim: 512,
            ublock_dims: vec![128, 64, 32],
            res_kernel: 3,
            res_dilations: vec![1, 2],
            final_res_kernel: 3,
            final_res_dilations: vec![1, 2, 4],
            time_embed_dim: 256,
            period_embed_dim: 256,
            mlp_dims: vec![512, 2048, 512],
            activation: Activation::Silu,
            multiband: false,
            cond_channels: 0,
        }
    }

    /// Per-band estimator for band `k` (0..4): the first stride is replaced
    /// by the Haar analysis step and band k sees k lower-band channels.
    pub fn multi_band(band: usize) -> Self {
        EstimatorConfig {
            periods: vec![1, 2, 3, 5, 7],
            down_ratios: vec![1, 1, 4, 4],
            up_ratios: vec![4, 4, 1],
            dblock_dims: vec![32, 128, 512],
            mblock_dim: 512,
            ublock_dims: vec![512, 128, 32],
            res_kernel: 3,
            res_dilations: vec![1, 2],
            final_res_kernel: 3,
            final_res_dilations: vec![1, 2, 4],
            time_embed_dim: 256,
            period_embed_dim: 256,
            mlp_dims: vec![512, 2048, 512],
            activation: Activation::Silu,
            multiband: true,
            cond_channels: band,
        }
    }

    /// A small config for tests and toy training; full stride layout,
    /// reduced widths.
    pub fn tiny(periods: Vec<usize>, cond_channels: usize, multiband: bool) -> Self {
        EstimatorConfig {
            periods,
            down_ratios: if multiband {
                vec![1, 1, 4, 4]
            } else {
                vec![1, 4, 4, 4]
            },
            up_ratios: if multiband {
                vec![4, 4, 1]
            } else {
                vec![4, 4, 4]
            },
            dblock_dims: vec![4, 8, 16],
            mblock_dim: 32,
            ublock_dims: vec![16, 8, 4],
            res_kernel: 3,
            res_dilations: vec![1, 2],
            final_res_kernel: 3,
            final_res_dilations: vec![1, 2, 4],
            time_embed_dim: 32,
            period_embed_dim: 32,
            mlp_dims: vec![64, 128, 64],
            activation: Activation::Silu,
            multiband,
            cond_channels,
        }
    }

    /// Stage widths including the middle block.
    pub fn chain(&self) -> Vec<usize> {
        let mut c = self.dblock_dims.clone();
        c.push(self.mblock_dim);
        c
    }

    /// Total time-axis reduction from input to middle block.
    pub fn height_reduction(&self) -> usize {
        let conv: usize = self.down_ratios.iter().product();
        if self.multiband {
            conv * 2
        } else {
            conv
        }
    }

    /// Periodify alignment for period p.
    pub fn align(&self, p: usize) -> usize {
        p * self.height_reduction()
    }

    pub fn input_channels(&self) -> usize {
        1 + self.cond_channels
    }

    pub fn validate(&self) -> Result<()> {
        if self.periods.is_empty() {
            return Err(Error::Config("need at least one period".into()));
        }
        if self.periods.iter().any(|&p| p == 0) {
            return Err(Error::Config("periods must be >= 1".into()));
        }
        if self.down_ratios.len() != self.dblock_dims.len() + 1 {
            return Err(Error::Config(format!(
                "len(down_ratios) = {} must be len(dblock_dims) + 1 = {}",
                self.down_ratios.len(),
                self.dblock_dims.len() + 1
            )));
        }
        if self.down_ratios[0] != 1 {
            return Err(Error::Config("down_ratios[0] (input stage) must be 1".into()));
        }
        if self.up_ratios.len() != self.ublock_dims.len()
            || self.up_ratios.len() != self.dblock_dims.len()
        {
            return Err(Error::Config(
                "up_ratios, ublock_dims and dblock_dims must have equal length".into(),
            ));
        }
        let down: usize = self.down_ratios.iter().product();
        let up: usize = self.up_ratios.iter().product();
        let up_total = if self.multiband { up * 2 } else { up };
        if down * (if self.multiband { 2 } else { 1 }) != up_total {
            return Err(Error::Config(format!(
                "down product {down} and up product {up} do not restore the input length"
            )));
        }
        // skip junctions add encoder and decoder features elementwise
        let chain = self.chain();
        let n = self.dblock_dims.len();
        for i in 0..n {
            if self.ublock_dims[i] != chain[n - 1 - i] {
                return Err(Error::Config(format!(
                    "ublock_dims[{i}] = {} must match encoder stage dim {}",
                    self.ublock_dims[i],
                    chain[n - 1 - i]
                )));
            }
        }
        for (i, &r) in self.up_ratios.iter().enumerate() {
            if r != 1 && r % 2 != 0 {
                return Err(Error::Config(format!("up_ratios[{i}] = {r} must be 1 or even")));
            }
        }
        if self.res_dilations.is_empty() || self.final_res_dilations.is_empty() {
            return Err(Error::Config("dilations must be non-empty".into()));
        }
        if self.mlp_dims.len() != 3 {
            return Err(Error::Config("mlp_dims must have 3 entries".into()));
        }
        if self.period_embed_dim != self.time_embed_dim {
            return Err(Error::Config(
                "period and time embedding dims must match (they are summed)".into(),
            ));
        }
        Ok(())
    }
}

/// ConvNeXt-V2 Mel encoder configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelEncoderConfig {
    pub n_mels: usize,
    pub mel_embed_dim: usize,
    pub n_blocks_stage1: usize,
    pub hidden_dim_stage1: usize,
    pub drop_path: f64,
    pub upsample_ratio: usize,
    pub upsample_dim: usize,
    pub n_blocks_stage2: usize,
    pub hidden_dim_stage2: usize,
    pub period_strides: Vec<usize>,
    pub out_dim: usize,
}

impl MelEncoderConfig {
    pub fn full_band() -> Self {
        MelEncoderConfig {
            n_mels: 100,
            mel_embed_dim: 512,
            n_blocks_stage1: 8,
            hidden_dim_stage1: 1536,
            drop_path: 0.1,
            upsample_ratio: 4,
            upsample_dim: 256,
            n_blocks_stage2: 4,
            hidden_dim_stage2: 1024,
            period_strides: vec![1, 2, 3, 5, 7],
            out_dim: 512,
        }
    }

    pub fn tiny(periods: Vec<usize>, n_mels: usize, out_dim: usize) -> Self {
        MelEncoderConfig {
            n_mels,
            mel_embed_dim: 32,
            n_blocks_stage1: 2,
            hidden_dim_stage1: 64,
            drop_path: 0.0,
            upsample_ratio: 4,
            upsample_dim: 16,
            n_blocks_stage2: 1,
            hidden_dim_stage2: 32,
            period_strides: periods,
            out_dim,
        }
    }

    pub fn validate(&self, est: &EstimatorConfig) -> Result<()> {
        if self.period_strides != est.periods {
            return Err(Error::Config(
                "mel encoder period_strides must equal estimator periods".into(),
            ));
        }
        if self.upsample_ratio == 0 || self.upsample_ratio % 2 != 0 {
            return Err(Error::Config("upsample_ratio must be even".into()));
        }
        if !(0.0..1.0).contains(&self.drop_path) {
            return Err(Error::Config("drop_path must be in [0, 1)".into()));
        }
        if self.n_mels == 0 || self.out_dim == 0 {
            return Err(Error::Config("n_mels and out_dim must be > 0".into()));
        }
        Ok(())
    }
}
