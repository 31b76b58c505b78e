//! Checkpoint directory format: a JSON manifest plus one raw little-endian
//! f32 file per named parameter. Save -> load -> save reproduces the files
//! byte for byte.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{config::EstimatorConfig, config::MelEncoderConfig, Estimator};
use crate::error::{Error, Result};
use crate::mel::MelConfig;
use crate::nn::Tensor;

#[derive(Debug, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub seed: u64,
    pub step: u64,
    /// 0 = full-band model, 1..=4 = wavelet band index + 1.
    pub band: usize,
    pub estimator: EstimatorConfig,
    pub mel_encoder: MelEncoderConfig,
    pub mel: MelConfig,
    pub params: Vec<ParamEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub file: String,
    pub fnv1a64: String,
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn tensor_bytes(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(t.numel() * 4);
    for &v in t.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Write the estimator and its mel frontend config into `dir`.
pub fn save_checkpoint(
    est: &Estimator,
    mel: &MelConfig,
    band: usize,
    dir: impl AsRef<Path>,
) -> Result<()> {
    let dir = dir.as_ref();
    let params_dir = dir.join("params");
    std::fs::create_dir_all(&params_dir).map_err(|e| Error::io(&params_dir, e))?;
    let mut entries = Vec::with_capacity(est.store.len());
    for (name, tensor) in est.store.iter() {
        let bytes = tensor_bytes(tensor);
        let file = format!("params/{name}.bin");
        let path = dir.join(&file);
        std::fs::File::create(&path)
            .and_then(|mut f| f.write_all(&bytes))
            .map_err(|e| Error::io(&path, e))?;
        entries.push(ParamEntry {
            name: name.to_string(),
            shape: tensor.shape().to_vec(),
            dtype: "f32".into(),
            file,
            fnv1a64: format!("{:016x}", fnv1a64(&bytes)),
        });
    }
    let manifest = CheckpointManifest {
        format: "periodwave-checkpoint-v1".into(),
        seed: est.seed,
        step: est.step,
        band,
        estimator: est.cfg.clone(),
        mel_encoder: est.mel_cfg.clone(),
        mel: mel.clone(),
        params: entries,
    };
    let path = dir.join("manifest.json");
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Msg(e.to_string()))?,
    )
    .map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// Load an estimator (plus its mel frontend config and band id) from `dir`.
pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<(Estimator, MelConfig, usize)> {
    let dir = dir.as_ref();
    let manifest_path = dir.join("manifest.json");
    let manifest: CheckpointManifest = serde_json::from_str(
        &std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?,
    )
    .map_err(|e| Error::Checkpoint(format!("{}: {e}", manifest_path.display())))?;
    if manifest.format != "periodwave-checkpoint-v1" {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint format {}",
            manifest.format
        )));
    }
    let mut est = Estimator::init(
        manifest.estimator.clone(),
        manifest.mel_encoder.clone(),
        manifest.seed,
    )?;
    est.step = manifest.step;
    if manifest.params.len() != est.store.len() {
        return Err(Error::Checkpoint(format!(
            "parameter count mismatch: manifest {} vs model {}",
            manifest.params.len(),
            est.store.len()
        )));
    }
    for entry in &manifest.params {
        let idx = est.store.by_name(&entry.name).ok_or_else(|| {
            Error::Checkpoint(format!("unknown parameter {} in manifest", entry.name))
        })?;
        if entry.dtype != "f32" {
            return Err(Error::Checkpoint(format!(
                "{}: unsupported dtype {}",
                entry.name, entry.dtype
            )));
        }
        let path = dir.join(&entry.file);
        let mut bytes = Vec::new();
        std::fs::File::open(&path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(&path, e))?;
        let expect: usize = entry.shape.iter().product::<usize>() * 4;
        if bytes.len() != expect {
            return Err(Error::Checkpoint(format!(
                "{}: {} bytes on disk, manifest shape implies {expect}",
                entry.name,
                bytes.len()
            )));
        }
        let hash = format!("{:016x}", fnv1a64(&bytes));
        if hash != entry.fnv1a64 {
            return Err(Error::Checkpoint(format!(
                "{}: content hash mismatch ({hash} vs {})",
                entry.name, entry.fnv1a64
            )));
        }
        if est.store.tensor(idx).shape() != entry.shape.as_slice() {
            return Err(Error::Checkpoint(format!(
                "{}: shape mismatch {:?} vs {:?}",
                entry.name,
                entry.shape,
                est.store.tensor(idx).shape()
            )));
        }
        let data: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        *est.store.tensor_mut(idx) = Tensor::new(entry.shape.clone(), data);
    }
    Ok((est, manifest.mel, manifest.band))
}
