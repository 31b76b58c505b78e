//! Conditional flow-matching waveform generation with a period-aware UNet
//! vector-field estimator.
//!
//! The model regresses a time-dependent vector field along the straight
//! optimal-transport path from an energy-scaled Gaussian prior to the
//! waveform, conditioned on a mel spectrogram through a ConvNeXt-V2 encoder.
//! Sampling integrates the learned field with fixed-step ODE methods. A
//! lossless wavelet-packet split enables the hierarchical four-band variant.
//!
//! Start with the runnable programs in `examples/`:
//!
//! - `dwt_bands` — wavelet-packet analysis/synthesis of a wav file
//! - `mel_and_prior` — mel frontend and the energy-based prior
//! - `ode_orders` — integrator convergence study
//! - `overfit_tiny` — end-to-end training demo on a synthetic clip
//! - `synthesize` — mel-conditional generation from a checkpoint
//! - `multiband` — training and hierarchical synthesis of the 4-band variant
//! - `freeu_grid` / `bench_ode` — inference-quality sweeps
//!
//! The same capabilities are exposed by the `periodwave` binary
//! (`train`, `synth`, `synth-mb`, `dwt`, `eval`, `bench-ode`, `bench-speed`).

pub mod audio;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod flow;
pub mod mel;
pub mod metrics;
pub mod nn;
pub mod periodify;
pub mod rng;
pub mod runcfg;
pub mod sampler;
pub mod train;
pub mod wavelet;

pub use error::{Error, Result};
