//! The four-band variant end to end: train one tiny estimator per wavelet
//! band (each conditioned on the ground-truth lower bands), then run
//! hierarchical synthesis low band first with an adaptive step schedule.
//!
//!     cargo run --release --example multiband [steps-per-band]

use periodwave::audio::Waveform;
use periodwave::estimator::{Estimator, EstimatorConfig, MelEncoderConfig};
use periodwave::mel::{band_prior, mel_spectrogram, MelConfig};
use periodwave::rng::Rng;
use periodwave::sampler::{synthesize_mb, SamplerConfig};
use periodwave::train::{random_segment, TrainConfig, TrainItem, TrainState};
use periodwave::wavelet::packet_split;

fn toy_clip() -> Waveform {
    let rate = 24_000u32;
    let samples = (0..rate as usize)
        .map(|i| {
            let t = i as f64 / rate as f64;
            0.4 * (std::f64::consts::TAU * 220.0 * t).sin()
                + 0.2 * (std::f64::consts::TAU * 3500.0 * t).sin()
                + 0.1 * (std::f64::consts::TAU * 7000.0 * t).sin()
                + 0.05 * (std::f64::consts::TAU * 10_000.0 * t).sin()
        })
        .collect();
    Waveform::new(samples, rate).unwrap()
}

fn main() -> periodwave::Result<()> {
    let steps: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(150);
    let periods = vec![1usize, 2, 3];
    let mel_cfg = MelConfig::default();
    let clip = toy_clip();
    let tcfg = TrainConfig {
        lr: 2e-4,
        batch_size: 1,
        segment: 8192,
        ..TrainConfig::default()
    };

    let mut estimators = Vec::with_capacity(4);
    for k in 0..4 {
        let est = Estimator::init(
            EstimatorConfig::tiny(periods.clone(), k, true),
            MelEncoderConfig::tiny(periods.clone(), mel_cfg.n_mels, 32),
            100 + k as u64,
        )?;
        let mut state = TrainState::new(est);
        let mut rng = Rng::seed_from(k as u64);
        let mut last = 0.0;
        for _ in 0..steps {
            let seg = random_segment(&clip, tcfg.segment, &mut rng)?;
            let item = TrainItem::band(&seg, k, &mel_cfg)?;
            last = state.train_step(&[item], &tcfg, &mut rng)?;
        }
        println!("band {k}: trained {steps} steps, final loss {last:.5}");
        estimators.push(state.est);
    }
    let ests: [Estimator; 4] = estimators.try_into().ok().unwrap();

    let mel = mel_spectrogram(&clip, &mel_cfg)?;
    let priors = [
        band_prior(&mel, 0)?,
        band_prior(&mel, 1)?,
        band_prior(&mel, 2)?,
        band_prior(&mel, 3)?,
    ];
    let cfg = SamplerConfig {
        per_band_steps: Some([16, 8, 4, 4]),
        ..SamplerConfig::default()
    };
    let mut rng = Rng::seed_from(9);
    let wav = synthesize_mb(&ests, &mel, &priors, &cfg, &mut rng)?;
    println!("synthesized {} samples with schedule {:?}", wav.len(), cfg.per_band_steps.unwrap());

    let mut padded = wav.samples.clone();
    padded.resize(padded.len().div_ceil(4) * 4, 0.0);
    let bands = packet_split(&padded)?;
    for (k, e) in bands.band_energies().iter().enumerate() {
        println!("output band {k} energy: {e:.4}");
    }
    Ok(())
}
