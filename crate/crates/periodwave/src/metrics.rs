//! Multi-resolution STFT distance and synthesis speed measurement.

use std::time::Instant;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::error::{Error, Result};

/// (fft, hop, win) triples. Defaults follow the common open-source
/// multi-resolution STFT loss configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MstftConfig {
    pub resolutions: Vec<(usize, usize, usize)>,
    pub mag_floor: f64,
}

impl Default for MstftConfig {
    fn default() -> Self {
        MstftConfig {
            resolutions: vec![(1024, 120, 600), (2048, 240, 1200), (512, 50, 240)],
            mag_floor: 1e-7,
        }
    }
}

impl MstftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resolutions.is_empty() {
            return Err(Error::Config("need at least one resolution".into()));
        }
        for &(fft, hop, win) in &self.resolutions {
            if win > fft || hop == 0 || win == 0 {
                return Err(Error::Config(format!(
                    "bad resolution ({fft},{hop},{win}): need win <= fft and hop > 0"
                )));
            }
        }
        Ok(())
    }
}

/// Centered magnitude STFT (reflect padding of fft/2 on both sides).
fn magnitude_stft(x: &[f64], fft_size: usize, hop: usize, win: usize) -> Vec<Vec<f64>> {
    let pad = fft_size / 2;
    let n = x.len();
    let reflect = |i: isize| -> f64 {
        let n = n as isize;
        let mut j = i;
        if n == 1 {
            return x[0];
        }
        let period = 2 * (n - 1);
        j = j.rem_euclid(period);
        if j >= n {
            j = period - j;
        }
        x[j as usize]
    };
    let padded_len = n + 2 * pad;
    let frames = if padded_len >= fft_size {
        (padded_len - fft_size) / hop + 1
    } else {
        0
    };
    let window: Vec<f64> = (0..win)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / win as f64).cos()))
        .collect();
    let offset = (fft_size - win) / 2;
    let mut planner = FftPlanner::<f64>::new();
    let plan = planner.plan_fft_forward(fft_size);
    let n_bins = fft_size / 2 + 1;
    let mut out = Vec::with_capacity(frames);
    let mut buf = vec![Complex::new(0.0, 0.0); fft_size];
    for f in 0..frames {
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        let start = f * hop;
        for i in 0..win {
            let src = start as isize + (offset + i) as isize - pad as isize;
            buf[offset + i] = Complex::new(reflect(src) * window[i], 0.0);
        }
        plan.process(&mut buf);
        out.push(buf[..n_bins].iter().map(|c| c.norm()).collect());
    }
    out
}

/// Per-resolution (spectral convergence, log-magnitude L1) terms.
pub fn mstft_terms(
    reference: &Waveform,
    generated: &Waveform,
    cfg: &MstftConfig,
) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    if reference.len() != generated.len() {
        return Err(Error::Shape(format!(
            "length mismatch: {} vs {}",
            reference.len(),
            generated.len()
        )));
    }
    if reference.sample_rate != generated.sample_rate {
        return Err(Error::Config("sample rate mismatch".into()));
    }
    if reference.is_empty() {
        return Err(Error::Shape("empty signals".into()));
    }
    let mut terms = Vec::with_capacity(cfg.resolutions.len());
    for &(fft, hop, win) in &cfg.resolutions {
        let sr = magnitude_stft(&reference.samples, fft, hop, win);
        let sg = magnitude_stft(&generated.samples, fft, hop, win);
        let mut num = 0.0;
        let mut den = 0.0;
        let mut log_l1 = 0.0;
        let mut count = 0usize;
        for (fr, fg) in sr.iter().zip(&sg) {
            for (&a, &b) in fr.iter().zip(fg) {
                num += (a - b) * (a - b);
                den += a * a;
                log_l1 += (a.max(cfg.mag_floor).ln() - b.max(cfg.mag_floor).ln()).abs();
                count += 1;
            }
        }
        let sc = num.sqrt() / den.sqrt().max(1e-12);
        let lm = log_l1 / count.max(1) as f64;
        terms.push((sc, lm));
    }
    Ok(terms)
}

/// Sum over resolutions of spectral convergence + log-magnitude L1,
/// averaged over the resolution count.
pub fn mstft_distance(reference: &Waveform, generated: &Waveform, cfg: &MstftConfig) -> Result<f64> {
    let terms = mstft_terms(reference, generated, cfg)?;
    let total: f64 = terms.iter().map(|(sc, lm)| sc + lm).sum();
    Ok(total / terms.len() as f64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpeedReport {
    /// Audio seconds generated per wall second.
    pub realtime_factor: f64,
    pub wall_ms_per_clip: f64,
    pub reps: usize,
}

/// Median wall time over `reps` runs after one warmup.
pub fn bench_speed(mut synth: impl FnMut() -> Result<Waveform>, reps: usize) -> Result<SpeedReport> {
    if reps < 3 {
        return Err(Error::Config("bench_speed needs reps >= 3".into()));
    }
    let warm = synth()?;
    let clip_secs = warm.duration_secs();
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        let _ = synth()?;
        times.push(start.elapsed().as_secs_f64());
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = times[times.len() / 2];
    Ok(SpeedReport {
        realtime_factor: clip_secs / median.max(1e-12),
        wall_ms_per_clip: median * 1e3,
        reps,
    })
}
