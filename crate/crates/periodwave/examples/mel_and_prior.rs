//! Mel frontend and the energy-based data-dependent prior: compute a
//! log-mel spectrogram, derive the per-frame prior std (full-band and
//! band-wise), and persist the mel in the exchange format.
//!
//!     cargo run --release --example mel_and_prior [input.wav]

use periodwave::audio::{load_wav, Waveform};
use periodwave::mel::{band_prior, full_band_prior, mel_spectrogram, save_mel, MelConfig};

fn spoken_ish_clip() -> Waveform {
    let rate = 24_000u32;
    let samples = (0..rate as usize)
        .map(|i| {
            let t = i as f64 / rate as f64;
            let voiced = (std::f64::consts::TAU * 180.0 * t).sin()
                + 0.4 * (std::f64::consts::TAU * 360.0 * t).sin();
            let breath = 0.05 * (std::f64::consts::TAU * 6100.0 * t).sin();
            let gate = if (t * 2.5).fract() < 0.6 { 1.0 } else { 0.05 };
            0.5 * gate * (voiced + breath)
        })
        .collect();
    Waveform::new(samples, rate).unwrap()
}

fn main() -> periodwave::Result<()> {
    let wav = match std::env::args().nth(1) {
        Some(path) => load_wav(path)?,
        None => spoken_ish_clip(),
    };
    let cfg = MelConfig::default();
    let mel = mel_spectrogram(&wav, &cfg)?;
    println!(
        "mel: {} frames x {} bins (hop {}, fft {})",
        mel.frames, cfg.n_mels, cfg.hop_size, cfg.fft_size
    );

    let prior = full_band_prior(&mel)?;
    let mean_std = prior.frame_std.iter().sum::<f64>() / prior.frame_std.len() as f64;
    println!("full-band prior: mean frame std {mean_std:.3}");
    for k in 0..4 {
        let p = band_prior(&mel, k)?;
        let m = p.frame_std.iter().sum::<f64>() / p.frame_std.len() as f64;
        println!("band {k} prior: mean frame std {m:.3}");
    }

    let out = std::env::temp_dir().join("example_clip.mel");
    save_mel(&mel, &out)?;
    println!("wrote {} (+ .json sidecar)", out.display());
    Ok(())
}
