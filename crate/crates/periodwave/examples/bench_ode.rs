//! Integrator sweep: train a tiny model briefly, then compare Euler,
//! midpoint and RK4 at several step counts against a 256-step midpoint
//! reference rendering. Prints method,steps,wall_ms,mstft as CSV.
//!
//!     cargo run --release --example bench_ode [train-steps]

use periodwave::audio::Waveform;
use periodwave::estimator::{Estimator, EstimatorConfig, MelEncoderConfig};
use periodwave::mel::{full_band_prior, mel_spectrogram, MelConfig};
use periodwave::rng::Rng;
use periodwave::sampler::{bench_ode, OdeMethod, SamplerConfig};
use periodwave::train::{random_segment, TrainConfig, TrainItem, TrainState};

fn toy_clip() -> Waveform {
    let rate = 24_000u32;
    let samples = (0..8192)
        .map(|i| {
            let t = i as f64 / rate as f64;
            0.5 * (std::f64::consts::TAU * 220.0 * t).sin()
        })
        .collect();
    Waveform::new(samples, rate).unwrap()
}

fn main() -> periodwave::Result<()> {
    let steps: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(200);
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
    let cfg = SamplerConfig::default();
    let mut srng = Rng::seed_from(11);
    let rows = bench_ode(
        &state.est,
        &mel,
        &prior,
        &[OdeMethod::Euler, OdeMethod::Midpoint, OdeMethod::Rk4],
        &[1, 2, 4, 8, 16],
        &cfg,
        &mut srng,
    )?;
    println!("method,steps,wall_ms,mstft");
    for r in rows {
        println!("{},{},{:.2},{:.5}", r.method, r.steps, r.wall_ms, r.mstft);
    }
    Ok(())
}
