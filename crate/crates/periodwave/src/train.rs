//! Flow-matching training: batch assembly, the update step, and the JSONL
//! training log.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::error::{Error, Result};
use crate::estimator::{mels_to_tensor, Estimator, FreeUParams};
use crate::flow::{self, PriorSpec};
use crate::mel::{self, MelConfig, MelSpec, PriorTrack};
use crate::nn::{ops, Session, Tensor};
use crate::rng::Rng;
use crate::wavelet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub segment: usize,
    pub sigma_min: f64,
    pub max_steps: u64,
    pub noise_scale: f64,
    pub betas: (f64, f64),
    pub weight_decay: f64,
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 5e-4,
            batch_size: 128,
            segment: 32_768,
            sigma_min: flow::SIGMA_MIN,
            max_steps: 1_000_000,
            noise_scale: flow::NOISE_SCALE,
            betas: (0.9, 0.999),
            weight_decay: 0.01,
            grad_clip: 1000.0,
        }
    }
}

impl TrainConfig {
    /// Per-band training uses the lower published learning rate.
    pub fn band_default() -> Self {
        TrainConfig {
            lr: 2e-4,
            batch_size: 64,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lr <= 0.0 {
            return Err(Error::Config("lr must be > 0".into()));
        }
        if self.segment == 0 || self.segment % 256 != 0 {
            return Err(Error::Config("segment must be a positive multiple of 256".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be > 0".into()));
        }
        if self.noise_scale <= 0.0 {
            return Err(Error::Config("noise_scale must be > 0".into()));
        }
        Ok(())
    }
}

/// One training example: regression target plus conditioning.
#[derive(Debug, Clone)]
pub struct TrainItem {
    /// x1 for this model: the raw segment, or one wavelet band of it.
    pub target: Vec<f64>,
    /// Ground-truth lower bands fed as conditioning channels (multi-band).
    pub lower_bands: Vec<Vec<f64>>,
    pub mel: MelSpec,
    pub prior: PriorTrack,
    /// Samples per mel frame at the target's rate.
    pub hop: usize,
}

impl TrainItem {
    /// Full-band item from a fixed-length segment.
    pub fn full_band(segment: &Waveform, mel_cfg: &MelConfig) -> Result<TrainItem> {
        let mel = mel::mel_spectrogram(segment, mel_cfg)?;
        let prior = mel::full_band_prior(&mel)?;
        Ok(TrainItem {
            target: segment.samples.clone(),
            lower_bands: Vec::new(),
            mel,
            prior,
            hop: mel_cfg.hop_size,
        })
    }

    /// Band-k item: target is wavelet band k, conditioned on ground-truth
    /// lower bands and the band-k energy prior.
    pub fn band(segment: &Waveform, k: usize, mel_cfg: &MelConfig) -> Result<TrainItem> {
        if k >= 4 {
            return Err(Error::Config(format!("band {k} out of range")));
        }
        if segment.len() % 4 != 0 {
            return Err(Error::Shape("segment length must be divisible by 4".into()));
        }
        let mel = mel::mel_spectrogram(segment, mel_cfg)?;
        let prior = mel::band_prior(&mel, k)?;
        let bands = wavelet::packet_split(&segment.samples)?;
        Ok(TrainItem {
            target: bands.bands[k].clone(),
            lower_bands: bands.bands[..k].to_vec(),
            mel,
            prior,
            hop: mel_cfg.hop_size / 4,
        })
    }
}

/// Estimator parameters plus AdamW moments.
pub struct TrainState {
    pub est: Estimator,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl TrainState {
    pub fn new(est: Estimator) -> TrainState {
        let m = (0..est.store.len())
            .map(|i| Tensor::zeros(est.store.tensor(i).shape().to_vec()))
            .collect();
        let v = (0..est.store.len())
            .map(|i| Tensor::zeros(est.store.tensor(i).shape().to_vec()))
            .collect();
        TrainState { est, m, v }
    }

    pub fn step(&self) -> u64 {
        self.est.step
    }

    /// One optimization step on a batch. Samples t ~ U[0,1] and a prior draw
    /// per item, regresses the field onto the OT target, applies one
    /// decoupled-weight-decay adaptive update. Deterministic given the rng.
    pub fn train_step(
        &mut self,
        batch: &[TrainItem],
        cfg: &TrainConfig,
        rng: &mut Rng,
    ) -> Result<f64> {
        cfg.validate()?;
        if batch.is_empty() {
            return Err(Error::Config("empty batch".into()));
        }
        let l = batch[0].target.len();
        let cond_channels = self.est.cfg.cond_channels;
        for item in batch {
            if item.target.len() != l {
                return Err(Error::Shape("batch targets must share one length".into()));
            }
            if item.lower_bands.len() != cond_channels {
                return Err(Error::Shape(format!(
                    "item carries {} lower bands, model wants {cond_channels}",
                    item.lower_bands.len()
                )));
            }
        }
        let bs = batch.len();
        let cin = self.est.cfg.input_channels();

        // per-item draws
        let mut ts = Vec::with_capacity(bs);
        let mut x_data = vec![0.0; bs * cin * l];
        let mut u_data = vec![0.0; bs * l];
        for (bi, item) in batch.iter().enumerate() {
            let t = rng.uniform();
            ts.push(t);
            let std = mel::prior_to_sample_std(&item.prior, item.hop, l)?;
            let spec = PriorSpec::new(std, cfg.noise_scale, 1.0)?;
            let x0 = flow::sample_prior(&spec, l, rng)?;
            let x_t = flow::ot_path(&x0, &item.target, t, cfg.sigma_min)?;
            let u = flow::ot_target(&x0, &item.target, cfg.sigma_min)?;
            x_data[bi * cin * l..bi * cin * l + l].copy_from_slice(&x_t);
            for (ci, band) in item.lower_bands.iter().enumerate() {
                x_data[(bi * cin + 1 + ci) * l..(bi * cin + 2 + ci) * l].copy_from_slice(band);
            }
            u_data[bi * l..(bi + 1) * l].copy_from_slice(&u);
        }
        let x = Tensor::new(vec![bs, cin, l], x_data);
        let u = Tensor::new(vec![bs, 1, l], u_data);
        let mels: Vec<&MelSpec> = batch.iter().map(|i| &i.mel).collect();
        let mel_t = mels_to_tensor(&mels)?;

        let mut sess = Session::new(&self.est.store, true);
        let cond = self.est.mel_encode_on(&mut sess, &mel_t, Some(rng))?;
        let v_pred = self
            .est
            .field_on(&mut sess, &x, &ts, &cond, &FreeUParams::default(), None)?;
        let loss = ops::mse_against(&mut sess.tape, &v_pred, &u);
        let loss_val = loss.t.item();
        if !loss_val.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss {loss_val} at step {} (batch of {bs}, len {l})",
                self.est.step
            )));
        }
        let grads = sess.grads(&loss);
        drop(sess);

        // global-norm clip
        let mut norm_sq = 0.0;
        for g in grads.iter().flatten() {
            for &v in g.data() {
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "gradient at step {}",
                        self.est.step
                    )));
                }
                norm_sq += v * v;
            }
        }
        let norm = norm_sq.sqrt();
        let clip_scale = if norm > cfg.grad_clip {
            cfg.grad_clip / norm
        } else {
            1.0
        };

        let t_step = self.est.step + 1;
        let (b1, b2) = cfg.betas;
        let bc1 = 1.0 - b1.powi(t_step as i32);
        let bc2 = 1.0 - b2.powi(t_step as i32);
        for (i, grad) in grads.iter().enumerate() {
            let Some(grad) = grad else { continue };
            let p = self.est.store.tensor_mut(i).data_mut();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for j in 0..p.len() {
                let g = grad.data()[j] * clip_scale;
                p[j] -= cfg.lr * cfg.weight_decay * p[j];
                m[j] = b1 * m[j] + (1.0 - b1) * g;
                v[j] = b2 * v[j] + (1.0 - b2) * g * g;
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                p[j] -= cfg.lr * mhat / (vhat.sqrt() + 1e-8);
            }
        }
        self.est.step = t_step;
        Ok(loss_val)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrainLogRecord {
    pub step: u64,
    pub loss: f64,
    pub lr: f64,
    pub wall_ms: f64,
}

/// Newline-delimited JSON training log.
pub struct TrainLogger {
    file: std::fs::File,
}

impl TrainLogger {
    pub fn create(path: impl AsRef<Path>) -> Result<TrainLogger> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(TrainLogger { file })
    }

    pub fn log(&mut self, rec: &TrainLogRecord) -> Result<()> {
        let line = serde_json::to_string(rec).map_err(|e| Error::Msg(e.to_string()))?;
        writeln!(self.file, "{line}").map_err(|e| Error::Msg(e.to_string()))
    }
}

/// Cut a random segment (with zero-pad past the end) for training.
pub fn random_segment(w: &Waveform, segment: usize, rng: &mut Rng) -> Result<Waveform> {
    if w.len() <= segment {
        return crate::audio::segment(w, 0, segment);
    }
    let start = rng.below(w.len() - segment);
    crate::audio::segment(w, start, segment)
}
