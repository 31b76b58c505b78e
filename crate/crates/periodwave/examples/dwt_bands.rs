//! Wavelet-packet analysis and synthesis: split a signal into four
//! frequency bands, report per-band energy, and verify the lossless
//! reconstruction.
//!
//!     cargo run --release --example dwt_bands [input.wav]
//!
//! Without an argument a synthetic sweep is used.

use periodwave::audio::{load_wav, Waveform};
use periodwave::wavelet::{packet_merge, packet_split};

fn synthetic_sweep() -> Waveform {
    let rate = 24_000u32;
    let n = 48_000;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / rate as f64;
            // linear chirp from 100 Hz to 11 kHz
            let f = 100.0 + (11_000.0 - 100.0) * t / 2.0;
            0.7 * (std::f64::consts::TAU * f * t).sin()
        })
        .collect();
    Waveform::new(samples, rate).unwrap()
}

fn main() -> periodwave::Result<()> {
    let arg = std::env::args().nth(1);
    let wav = match &arg {
        Some(path) => load_wav(path)?,
        None => synthetic_sweep(),
    };
    let mut samples = wav.samples.clone();
    samples.resize(wav.len().div_ceil(4) * 4, 0.0);

    let bands = packet_split(&samples)?;
    let nyquist = wav.sample_rate as f64 / 2.0;
    println!("input: {} samples at {} Hz", wav.len(), wav.sample_rate);
    for (k, e) in bands.band_energies().iter().enumerate() {
        println!(
            "band {k} ({:5.0}-{:5.0} Hz): energy {e:.3}",
            nyquist * k as f64 / 4.0,
            nyquist * (k + 1) as f64 / 4.0
        );
    }

    let recon = packet_merge(&bands)?;
    let max_err = samples
        .iter()
        .zip(&recon)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("max reconstruction error: {max_err:.3e}");
    assert!(max_err < 1e-6);
    Ok(())
}
