//! Mel-conditional synthesis from a saved checkpoint.
//!
//!     cargo run --release --example synthesize -- <checkpoint-dir> <input.wav> [out.wav]
//!
//! The input's mel spectrogram is the conditioning; its waveform is not
//! otherwise used. Checkpoints come from `periodwave train` or the
//! `overfit_tiny`/`multiband` examples.

use periodwave::audio::{load_wav, save_wav, WavEncoding};
use periodwave::estimator::load_checkpoint;
use periodwave::mel::{full_band_prior, mel_spectrogram};
use periodwave::rng::Rng;
use periodwave::sampler::{synthesize, SamplerConfig};

fn main() -> periodwave::Result<()> {
    let mut args = std::env::args().skip(1);
    let ckpt = args.next().expect("usage: synthesize <ckpt-dir> <input.wav> [out.wav]");
    let input = args.next().expect("usage: synthesize <ckpt-dir> <input.wav> [out.wav]");
    let out = args.next().unwrap_or_else(|| "synthesized.wav".into());

    let (est, mel_cfg, band) = load_checkpoint(&ckpt)?;
    assert_eq!(band, 0, "full-band checkpoint required");
    let source = load_wav(&input)?;
    let mel = mel_spectrogram(&source, &mel_cfg)?;
    let prior = full_band_prior(&mel)?;

    let cfg = SamplerConfig::default();
    let mut rng = Rng::seed_from(1234);
    let mut wav = synthesize(&est, &mel, &prior, &cfg, &mut rng)?;
    wav.samples.truncate(source.len());
    save_wav(&wav, &out, WavEncoding::Float32)?;
    println!(
        "synthesized {} samples with {} {}-step sampling -> {out}",
        wav.len(),
        cfg.method,
        cfg.steps
    );
    Ok(())
}
