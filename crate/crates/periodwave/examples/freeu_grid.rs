//! Grid search over the skip/backbone rescaling at inference time: train a
//! tiny model briefly, then score a small (alpha, beta) grid by M-STFT
//! against the training clip.
//!
//!     cargo run --release --example freeu_grid [train-steps]

use periodwave::audio::Waveform;
use periodwave::estimator::{Estimator, EstimatorConfig, FreeUParams, MelEncoderConfig};
use periodwave::mel::{full_band_prior, mel_spectrogram, MelConfig};
use periodwave::metrics::{mstft_distance, MstftConfig};
use periodwave::rng::Rng;
use periodwave::sampler::{synthesize, SamplerConfig};
use periodwave::train::{random_segment, TrainConfig, TrainItem, TrainState};

fn toy_clip() -> Waveform {
    let rate = 24_000u32;
    let samples = (0..rate as usize)
        .map(|i| {
            let t = i as f64 / rate as f64;
            0.5 * (std::f64::consts::TAU * 220.0 * t).sin()
                + 0.15 * (std::f64::consts::TAU * 4400.0 * t).sin()
        })
        .collect();
    Waveform::new(samples, rate).unwrap()
}

fn main() -> periodwave::Result<()> {
    let steps: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(400);
    let periods = vec![1usize, 2, 3];
    let mel_cfg = MelConfig::default();
    let est = Estimator::init(
        EstimatorConfig::tiny(periods.clone(), 0, false),
        MelEncoderConfig::tiny(periods, mel_cfg.n_mels, 32),
        42,
    )?;
    let clip = toy_clip();
    let tcfg = TrainConfig {
        batch_size: 1,
        segment: 8192,
        ..TrainConfig::default()
    };
    let mut state = TrainState::new(est);
    let mut rng = Rng::seed_from(7);
    for _ in 0..steps {
        let seg = random_segment(&clip, tcfg.segment, &mut rng)?;
        let item = TrainItem::full_band(&seg, &mel_cfg)?;
        state.train_step(&[item], &tcfg, &mut rng)?;
    }

    let mel = mel_spectrogram(&clip, &mel_cfg)?;
    let prior = full_band_prior(&mel)?;
    let mcfg = MstftConfig::default();
    println!("{:>5} {:>5} {:>8}", "alpha", "beta", "mstft");
    for (alpha, beta) in [
        (1.0, 1.0),
        (0.95, 1.05),
        (0.9, 1.1),
        (0.85, 1.15),
        (0.8, 1.2),
    ] {
        let cfg = SamplerConfig {
            temperature: 0.0,
            freeu: FreeUParams {
                skip_scale: alpha,
                backbone_scale: beta,
                enabled: true,
            },
            ..SamplerConfig::default()
        };
        let mut srng = Rng::seed_from(99);
        let mut wav = synthesize(&state.est, &mel, &prior, &cfg, &mut srng)?;
        wav.samples.truncate(clip.len());
        let d = mstft_distance(&clip, &wav, &mcfg)?;
        println!("{alpha:>5.2} {beta:>5.2} {d:>8.4}");
    }
    Ok(())
}
