//! Waveform container and WAV file I/O.
//!
//! Mono RIFF/WAVE only, 16-bit PCM or 32-bit float. No resampling.

use std::path::Path;

use crate::error::{Error, Result};

/// A mono waveform: float samples nominally in [-1, 1] plus a sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

/// Encoding used by [`save_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    /// 16-bit signed PCM. Out-of-range samples saturate.
    Pcm16,
    /// 32-bit IEEE float, exact round-trip.
    Float32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Config("sample_rate must be > 0".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("waveform contains NaN/Inf".into()));
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Read a mono WAV file. 16-bit PCM samples are scaled by 1/32768.
pub fn load_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path)
        .map_err(|e| Error::Wav(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Wav(format!(
            "{}: expected mono, found {} channels",
            path.display(),
            spec.channels
        )));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Wav(format!("{}: {e}", path.display())))?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Wav(format!("{}: {e}", path.display())))?,
        (fmt, bits) => {
            return Err(Error::Wav(format!(
                "{}: unsupported encoding {fmt:?}/{bits}-bit (want 16-bit PCM or 32-bit float)",
                path.display()
            )))
        }
    };
    Waveform::new(samples, spec.sample_rate)
}

/// Write a mono WAV file. Returns the number of samples that saturated
/// (always 0 for float encoding).
pub fn save_wav(w: &Waveform, path: impl AsRef<Path>, encoding: WavEncoding) -> Result<usize> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => hound::SampleFormat::Int,
            WavEncoding::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::create(path, spec)
        .map_err(|e| Error::Wav(format!("{}: {e}", path.display())))?;
    let mut clipped = 0usize;
    match encoding {
        WavEncoding::Pcm16 => {
            for &s in &w.samples {
                let scaled = s * 32768.0;
                let v = if scaled > i16::MAX as f64 {
                    clipped += 1;
                    i16::MAX
                } else if scaled < i16::MIN as f64 {
                    clipped += 1;
                    i16::MIN
                } else {
                    scaled.round() as i16
                };
                writer
                    .write_sample(v)
                    .map_err(|e| Error::Wav(format!("{}: {e}", path.display())))?;
            }
        }
        WavEncoding::Float32 => {
            for &s in &w.samples {
                writer
                    .write_sample(s as f32)
                    .map_err(|e| Error::Wav(format!("{}: {e}", path.display())))?;
            }
        }
    }
    writer
        .finalize()
        .map_err(|e| Error::Wav(format!("{}: {e}", path.display())))?;
    if clipped > 0 {
        eprintln!(
            "warning: {} samples saturated while writing {}",
            clipped,
            path.display()
        );
    }
    Ok(clipped)
}

/// Extract `length` samples starting at `start`, zero-padding past the end.
pub fn segment(w: &Waveform, start: usize, length: usize) -> Result<Waveform> {
    if length == 0 {
        return Err(Error::Config("segment length must be > 0".into()));
    }
    let mut out = vec![0.0; length];
    if start < w.samples.len() {
        let avail = (w.samples.len() - start).min(length);
        out[..avail].copy_from_slice(&w.samples[start..start + avail]);
    }
    Waveform::new(out, w.sample_rate)
}
