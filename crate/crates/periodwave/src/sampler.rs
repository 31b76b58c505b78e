//! Fixed-step ODE integration of the learned field and the synthesis
//! pipelines (single-band and hierarchical multi-band).

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::error::{Error, Result};
use crate::estimator::{Estimator, FreeUParams, PeriodExec};
use crate::flow::{self, PriorSpec};
use crate::mel::{self, MelSpec, PriorTrack};
use crate::metrics::{mstft_distance, MstftConfig};
use crate::rng::Rng;
use crate::wavelet::{packet_merge, BandComponents};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OdeMethod {
    Euler,
    Midpoint,
    Rk4,
}

impl std::str::FromStr for OdeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<OdeMethod> {
        match s.to_ascii_lowercase().as_str() {
            "euler" => Ok(OdeMethod::Euler),
            "midpoint" => Ok(OdeMethod::Midpoint),
            "rk4" => Ok(OdeMethod::Rk4),
            other => Err(Error::Config(format!(
                "unknown ODE method {other} (want euler|midpoint|rk4)"
            ))),
        }
    }
}

impl std::fmt::Display for OdeMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OdeMethod::Euler => write!(f, "euler"),
            OdeMethod::Midpoint => write!(f, "midpoint"),
            OdeMethod::Rk4 => write!(f, "rk4"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub method: OdeMethod,
    pub steps: usize,
    pub temperature: f64,
    pub noise_scale: f64,
    pub freeu: FreeUParams,
    pub per_band_steps: Option<[usize; 4]>,
    /// Optional per-band temperature override for the multi-band sampler.
    pub per_band_temperature: Option<[f64; 4]>,
    #[serde(skip)]
    pub exec: Option<PeriodExec>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            method: OdeMethod::Midpoint,
            steps: 16,
            temperature: flow::TEMPERATURE,
            noise_scale: flow::NOISE_SCALE,
            freeu: FreeUParams::default(),
            per_band_steps: None,
            per_band_temperature: None,
            exec: None,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if self.temperature < 0.0 {
            return Err(Error::Config("temperature must be >= 0".into()));
        }
        if let Some(steps) = &self.per_band_steps {
            if steps.iter().any(|&s| s == 0) {
                return Err(Error::Config("per-band steps must all be >= 1".into()));
            }
        }
        self.freeu.validate()
    }

    fn exec(&self) -> PeriodExec {
        self.exec.unwrap_or(PeriodExec::Batched)
    }
}

/// Integrate dx/dt = field(t, x) from t=0 to t=1 on a uniform grid.
pub fn integrate(
    mut field: impl FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    x0: &[f64],
    method: OdeMethod,
    steps: usize,
) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::Config("steps must be >= 1".into()));
    }
    if method == OdeMethod::Rk4 {
        // the 4th stage of the last step evaluates the field at t = 1 exactly
        eprintln!("note: rk4 evaluates the field at t=1; early-step estimates there are weak");
    }
    let h = 1.0 / steps as f64;
    let mut x = x0.to_vec();
    for k in 0..steps {
        let t = k as f64 * h;
        match method {
            OdeMethod::Euler => {
                let d = field(t, &x)?;
                axpy(&mut x, h, &d);
            }
            OdeMethod::Midpoint => {
                let k1 = field(t, &x)?;
                let mut xm = x.clone();
                axpy(&mut xm, 0.5 * h, &k1);
                let k2 = field(t + 0.5 * h, &xm)?;
                axpy(&mut x, h, &k2);
            }
            OdeMethod::Rk4 => {
                let k1 = field(t, &x)?;
                let mut x2 = x.clone();
                axpy(&mut x2, 0.5 * h, &k1);
                let k2 = field(t + 0.5 * h, &x2)?;
                let mut x3 = x.clone();
                axpy(&mut x3, 0.5 * h, &k2);
                let k3 = field(t + 0.5 * h, &x3)?;
                let mut x4 = x.clone();
                axpy(&mut x4, h, &k3);
                let k4 = field((t + h).min(1.0), &x4)?;
                for i in 0..x.len() {
                    x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "integration state after step {k} ({method}, {steps} steps)"
            )));
        }
    }
    Ok(x)
}

fn axpy(x: &mut [f64], a: f64, d: &[f64]) {
    debug_assert_eq!(x.len(), d.len());
    for (xi, &di) in x.iter_mut().zip(d) {
        *xi += a * di;
    }
}

fn prior_draw(
    prior: &PriorTrack,
    hop: usize,
    len: usize,
    noise_scale: f64,
    temperature: f64,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let std = mel::prior_to_sample_std(prior, hop, len)?;
    let spec = PriorSpec::new(std, noise_scale, temperature)?;
    flow::sample_prior(&spec, len, rng)
}

/// Mel-conditional synthesis with the single (full-band) estimator.
pub fn synthesize(
    est: &Estimator,
    mel: &MelSpec,
    prior: &PriorTrack,
    cfg: &SamplerConfig,
    rng: &mut Rng,
) -> Result<Waveform> {
    cfg.validate()?;
    if est.cfg.cond_channels != 0 || est.cfg.multiband {
        return Err(Error::Config(
            "synthesize wants a full-band estimator; use synthesize_mb for band models".into(),
        ));
    }
    if prior.frame_std.len() != mel.frames {
        return Err(Error::Shape("prior frames != mel frames".into()));
    }
    let hop = mel.config.hop_size;
    let len = mel.frames * hop;
    let x0 = prior_draw(prior, hop, len, cfg.noise_scale, cfg.temperature, rng)?;
    let cond = est.mel_encode(mel)?;
    let exec = cfg.exec();
    let x1 = integrate(
        |t, x| est.vector_field(x, &[], t, &cond, &cfg.freeu, exec),
        &x0,
        cfg.method,
        cfg.steps,
    )?;
    Waveform::new(x1, mel.config.sample_rate)
}

/// Hierarchical multi-band synthesis: bands are generated low to high, each
/// conditioned on the bands already generated, then merged losslessly.
pub fn synthesize_mb(
    band_estimators: &[Estimator; 4],
    mel: &MelSpec,
    band_priors: &[PriorTrack; 4],
    cfg: &SamplerConfig,
    rng: &mut Rng,
) -> Result<Waveform> {
    cfg.validate()?;
    let steps = cfg
        .per_band_steps
        .ok_or_else(|| Error::Config("multi-band synthesis needs per_band_steps".into()))?;
    for (k, est) in band_estimators.iter().enumerate() {
        if !est.cfg.multiband || est.cfg.cond_channels != k {
            return Err(Error::Config(format!(
                "band {k} estimator must be multiband with {k} conditioning channels"
            )));
        }
    }
    let hop = mel.config.hop_size;
    let band_hop = hop / 4;
    let band_len = mel.frames * band_hop;
    let exec = cfg.exec();

    let mut bands: Vec<Vec<f64>> = Vec::with_capacity(4);
    for (k, est) in band_estimators.iter().enumerate() {
        if band_priors[k].frame_std.len() != mel.frames {
            return Err(Error::Shape(format!("band {k} prior frames != mel frames")));
        }
        let tau = cfg
            .per_band_temperature
            .map(|t| t[k])
            .unwrap_or(cfg.temperature);
        let x0 = prior_draw(&band_priors[k], band_hop, band_len, cfg.noise_scale, tau, rng)?;
        let cond = est.mel_encode(mel)?;
        let lower = bands.clone();
        let xk = integrate(
            |t, x| est.vector_field(x, &lower, t, &cond, &cfg.freeu, exec),
            &x0,
            cfg.method,
            steps[k],
        )?;
        bands.push(xk);
    }
    let comps = BandComponents {
        bands: [
            bands[0].clone(),
            bands[1].clone(),
            bands[2].clone(),
            bands[3].clone(),
        ],
    };
    Waveform::new(packet_merge(&comps)?, mel.config.sample_rate)
}

/// One row of the ODE-method sweep.
#[derive(Debug, Clone, Serialize)]
pub struct BenchOdeRow {
    pub method: String,
    pub steps: usize,
    pub wall_ms: f64,
    pub mstft: f64,
}

/// Sweep integrators and step counts against a 256-step midpoint reference.
/// The prior draw is shared across all rows so differences are purely the
/// integrator's.
pub fn bench_ode(
    est: &Estimator,
    mel: &MelSpec,
    prior: &PriorTrack,
    methods: &[OdeMethod],
    steps_list: &[usize],
    cfg: &SamplerConfig,
    rng: &mut Rng,
) -> Result<Vec<BenchOdeRow>> {
    cfg.validate()?;
    let hop = mel.config.hop_size;
    let len = mel.frames * hop;
    let x0 = prior_draw(prior, hop, len, cfg.noise_scale, cfg.temperature, rng)?;
    let cond = est.mel_encode(mel)?;
    let exec = cfg.exec();
    let field = |t: f64, x: &[f64]| est.vector_field(x, &[], t, &cond, &cfg.freeu, exec);

    let reference = integrate(field, &x0, OdeMethod::Midpoint, 256)?;
    let ref_wav = Waveform::new(reference, mel.config.sample_rate)?;
    let mcfg = MstftConfig::default();

    let mut rows = Vec::new();
    for &method in methods {
        for &steps in steps_list {
            let start = Instant::now();
            let x1 = integrate(field, &x0, method, steps)?;
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            let wav = Waveform::new(x1, mel.config.sample_rate)?;
            let mstft = mstft_distance(&ref_wav, &wav, &mcfg)?;
            rows.push(BenchOdeRow {
                method: method.to_string(),
                steps,
                wall_ms,
                mstft,
            });
        }
    }
    Ok(rows)
}
