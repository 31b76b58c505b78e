//! Log-mel spectrograms and the energy-based data-dependent prior.
//!
//! The frontend mirrors the BigVGAN-style recipe: centered frames over a
//! reflect-padded signal, Hann window, magnitude STFT, Slaney-scale mel
//! filterbank, natural-log compression with a 1e-5 floor. Padding is chosen
//! so the frame count is exactly ceil(T / hop) for any input length.

use std::io::{Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::error::{Error, Result};
use crate::periodify::reflect_pad_to;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelConfig {
    pub fft_size: usize,
    pub hop_size: usize,
    pub win_size: usize,
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub sample_rate: u32,
    pub log_floor: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        MelConfig {
            fft_size: 1024,
            hop_size: 256,
            win_size: 1024,
            n_mels: 100,
            fmin: 0.0,
            fmax: 12_000.0,
            sample_rate: 24_000,
            log_floor: 1e-5,
        }
    }
}

impl MelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.win_size > self.fft_size {
            return Err(Error::Config("win_size must be <= fft_size".into()));
        }
        if self.hop_size > self.win_size || self.hop_size == 0 {
            return Err(Error::Config("need 0 < hop_size <= win_size".into()));
        }
        if !(0.0 <= self.fmin && self.fmin < self.fmax) {
            return Err(Error::Config("need 0 <= fmin < fmax".into()));
        }
        if self.fmax > self.sample_rate as f64 / 2.0 {
            return Err(Error::Config("fmax must be <= sample_rate/2".into()));
        }
        if (self.win_size - self.hop_size) % 2 != 0 {
            return Err(Error::Config("win_size - hop_size must be even".into()));
        }
        if self.log_floor <= 0.0 {
            return Err(Error::Config("log_floor must be > 0".into()));
        }
        Ok(())
    }
}

/// Frame-major log-mel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpec {
    /// frames * n_mels values, frame-major.
    pub values: Vec<f64>,
    pub frames: usize,
    pub config: MelConfig,
}

impl MelSpec {
    pub fn n_mels(&self) -> usize {
        self.config.n_mels
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.values[t * self.config.n_mels..(t + 1) * self.config.n_mels]
    }
}

/// Slaney mel scale: linear below 1 kHz, logarithmic above.
pub fn hz_to_mel(f: f64) -> f64 {
    let f_sp = 200.0 / 3.0;
    let min_log_hz = 1000.0;
    let min_log_mel = min_log_hz / f_sp;
    let logstep = (6.4f64).ln() / 27.0;
    if f < min_log_hz {
        f / f_sp
    } else {
        min_log_mel + (f / min_log_hz).ln() / logstep
    }
}

pub fn mel_to_hz(m: f64) -> f64 {
    let f_sp = 200.0 / 3.0;
    let min_log_hz = 1000.0;
    let min_log_mel = min_log_hz / f_sp;
    let logstep = (6.4f64).ln() / 27.0;
    if m < min_log_mel {
        m * f_sp
    } else {
        min_log_hz * ((m - min_log_mel) * logstep).exp()
    }
}

/// Triangular mel filterbank with Slaney area normalization.
/// Returns n_mels rows of fft_size/2 + 1 weights.
pub fn mel_filterbank(cfg: &MelConfig) -> Vec<Vec<f64>> {
    let n_bins = cfg.fft_size / 2 + 1;
    let mel_lo = hz_to_mel(cfg.fmin);
    let mel_hi = hz_to_mel(cfg.fmax);
    let band_edges: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    let bin_hz: Vec<f64> = (0..n_bins)
        .map(|k| k as f64 * cfg.sample_rate as f64 / cfg.fft_size as f64)
        .collect();
    let mut weights = vec![vec![0.0; n_bins]; cfg.n_mels];
    for (m, row) in weights.iter_mut().enumerate() {
        let (f0, f1, f2) = (band_edges[m], band_edges[m + 1], band_edges[m + 2]);
        let enorm = 2.0 / (f2 - f0);
        for (k, w) in row.iter_mut().enumerate() {
            let lower = (bin_hz[k] - f0) / (f1 - f0);
            let upper = (f2 - bin_hz[k]) / (f2 - f1);
            *w = lower.min(upper).max(0.0) * enorm;
        }
    }
    weights
}

fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / n as f64).cos()))
        .collect()
}

/// Magnitude STFT over the padded signal. Returns frames of fft/2 + 1 bins.
fn magnitude_stft(padded: &[f64], cfg: &MelConfig, frames: usize) -> Vec<Vec<f64>> {
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(cfg.fft_size);
    let window = hann_window(cfg.win_size);
    let n_bins = cfg.fft_size / 2 + 1;
    let offset = (cfg.fft_size - cfg.win_size) / 2;
    let mut out = Vec::with_capacity(frames);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];
    for t in 0..frames {
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        let start = t * cfg.hop_size;
        for i in 0..cfg.win_size {
            buf[offset + i] = Complex::new(padded[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        out.push(buf[..n_bins].iter().map(|c| c.norm()).collect());
    }
    out
}

/// Compute the log-mel spectrogram of a waveform.
///
/// The signal is reflect-extended to the next hop multiple and then
/// reflect-padded by (win - hop)/2 on both sides, which yields exactly
/// ceil(T / hop) frames.
pub fn mel_spectrogram(w: &Waveform, cfg: &MelConfig) -> Result<MelSpec> {
    cfg.validate()?;
    if w.sample_rate != cfg.sample_rate {
        return Err(Error::Config(format!(
            "waveform rate {} != mel config rate {}",
            w.sample_rate, cfg.sample_rate
        )));
    }
    if w.len() < cfg.win_size {
        return Err(Error::Shape(format!(
            "signal of {} samples is shorter than one window ({})",
            w.len(),
            cfg.win_size
        )));
    }
    let frames = w.len().div_ceil(cfg.hop_size);
    let aligned = reflect_pad_to(&w.samples, frames * cfg.hop_size);
    let side = (cfg.win_size - cfg.hop_size) / 2;
    let mut padded = Vec::with_capacity(aligned.len() + 2 * side);
    // reflect pad on both sides, no repeated edge sample
    for i in (1..=side).rev() {
        padded.push(aligned[i]);
    }
    padded.extend_from_slice(&aligned);
    for i in 0..side {
        padded.push(aligned[aligned.len() - 2 - i]);
    }
    let spec = magnitude_stft(&padded, cfg, frames);
    let fb = mel_filterbank(cfg);
    let mut values = Vec::with_capacity(frames * cfg.n_mels);
    for frame in &spec {
        for row in &fb {
            let mut acc = 0.0;
            for (w, s) in row.iter().zip(frame) {
                acc += w * s;
            }
            values.push(acc.max(cfg.log_floor).ln());
        }
    }
    Ok(MelSpec {
        values,
        frames,
        config: cfg.clone(),
    })
}

/// Per-frame normalized energy, the diagonal std of the data-dependent prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorTrack {
    pub frame_std: Vec<f64>,
    /// 0 = full-band, 1..=4 = wavelet band index + 1.
    pub band_id: usize,
    pub energy_min: f64,
    pub energy_max: f64,
}

pub const STD_FLOOR: f64 = 0.1;

/// Energy constants and mel-bin ranges for the full-band prior.
pub const FULL_BAND_ENERGY: (f64, f64) = (0.031622782, 9.124346);

/// Per-band (lo, hi) mel-bin ranges and (min, max) energies for the
/// four-band variant; ranges overlap by one or two bins.
pub const BAND_BINS: [(usize, usize); 4] = [(0, 61), (60, 81), (80, 93), (91, 100)];
pub const BAND_ENERGY: [(f64, f64); 4] = [
    (0.024698181, 8.756637),
    (0.014491379, 4.242267),
    (0.011401756, 3.1011465),
    (0.031622782, 2.3407087),
];

/// Average exp(mel) over the bin range, normalize into [std_floor, 1].
pub fn energy_prior(
    mel: &MelSpec,
    band_bins: (usize, usize),
    band_id: usize,
    e_min: f64,
    e_max: f64,
    std_floor: f64,
) -> Result<PriorTrack> {
    let (lo, hi) = band_bins;
    if !(lo < hi && hi <= mel.n_mels()) {
        return Err(Error::Config(format!(
            "band bins [{lo},{hi}) out of range for {} mels",
            mel.n_mels()
        )));
    }
    if e_max <= e_min {
        return Err(Error::Config("energy max must exceed min".into()));
    }
    let width = (hi - lo) as f64;
    let frame_std = (0..mel.frames)
        .map(|t| {
            let e: f64 = mel.frame(t)[lo..hi].iter().map(|v| v.exp()).sum::<f64>() / width;
            ((e - e_min) / (e_max - e_min)).clamp(std_floor, 1.0)
        })
        .collect();
    Ok(PriorTrack {
        frame_std,
        band_id,
        energy_min: e_min,
        energy_max: e_max,
    })
}

/// Full-band prior with the standard constants.
pub fn full_band_prior(mel: &MelSpec) -> Result<PriorTrack> {
    energy_prior(
        mel,
        (0, mel.n_mels()),
        0,
        FULL_BAND_ENERGY.0,
        FULL_BAND_ENERGY.1,
        STD_FLOOR,
    )
}

/// Prior for wavelet band `k` (0..4) with the standard constants.
pub fn band_prior(mel: &MelSpec, k: usize) -> Result<PriorTrack> {
    if k >= 4 {
        return Err(Error::Config(format!("band index {k} out of range")));
    }
    energy_prior(
        mel,
        BAND_BINS[k],
        k + 1,
        BAND_ENERGY[k].0,
        BAND_ENERGY[k].1,
        STD_FLOOR,
    )
}

/// Expand the frame-rate std to sample rate: each frame repeated `hop` times.
pub fn prior_to_sample_std(p: &PriorTrack, hop: usize, target_len: usize) -> Result<Vec<f64>> {
    if p.frame_std.is_empty() {
        return Err(Error::Shape("empty prior track".into()));
    }
    if target_len > p.frame_std.len() * hop {
        return Err(Error::Shape(format!(
            "target {target_len} exceeds {} frames x hop {hop}",
            p.frame_std.len()
        )));
    }
    let mut out = Vec::with_capacity(target_len);
    'outer: for &s in &p.frame_std {
        for _ in 0..hop {
            if out.len() == target_len {
                break 'outer;
            }
            out.push(s);
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct MelSidecar {
    frames: usize,
    n_mels: usize,
    config: MelConfig,
}

/// Persist a mel matrix as flat little-endian f32 plus a JSON sidecar.
pub fn save_mel(mel: &MelSpec, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(mel.values.len() * 4);
    for &v in &mel.values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| Error::io(path, e))?;
    let sidecar = MelSidecar {
        frames: mel.frames,
        n_mels: mel.config.n_mels,
        config: mel.config.clone(),
    };
    let sidecar_path = sidecar_path(path);
    std::fs::write(
        &sidecar_path,
        serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Msg(e.to_string()))?,
    )
    .map_err(|e| Error::io(&sidecar_path, e))?;
    Ok(())
}

pub fn load_mel(path: impl AsRef<Path>) -> Result<MelSpec> {
    let path = path.as_ref();
    let sidecar_path = sidecar_path(path);
    let sidecar: MelSidecar = serde_json::from_str(
        &std::fs::read_to_string(&sidecar_path).map_err(|e| Error::io(&sidecar_path, e))?,
    )
    .map_err(|e| Error::Msg(format!("{}: {e}", sidecar_path.display())))?;
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let expect = sidecar.frames * sidecar.n_mels * 4;
    if bytes.len() != expect {
        return Err(Error::Shape(format!(
            "{}: {} bytes, sidecar says {expect}",
            path.display(),
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(MelSpec {
        values,
        frames: sidecar.frames,
        config: sidecar.config,
    })
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    os.into()
}
