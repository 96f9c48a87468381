//! Multi-channel speech separation by mask-based beamforming.
//!
//! The pipeline: a dilated-convolution estimator emits complex ratio
//! filters for speech and noise, those drive spatial covariance
//! estimates, and beamforming weights come either from the classical
//! utterance-level MVDR solution (optionally multi-tap) or from two
//! recurrent networks that replace the matrix inversion and PCA with
//! learned, frame-wise estimates. Everything trains end-to-end against a
//! time-domain scale-invariant SNR objective on synthetic
//! microphone-array scenes.
//!
//! ## Capabilities by module
//!
//! - [`signal`] — STFT/iSTFT and multi-channel WAV I/O (16 kHz, Hann).
//! - [`linalg`] — dense complex Hermitian operations: loaded inversion,
//!   solves, power-iteration principal eigenvectors.
//! - [`features`] — LPS, IPD and directional features for the estimator.
//! - [`masking`] — complex ratio masks/filters and covariance estimation.
//! - [`beamformer`] — MVDR, multi-tap MVDR and frame-wise weight
//!   composition from estimated statistics.
//! - [`neural`] — reverse-mode autodiff, GRU networks and the
//!   dilated-conv filter estimator, plus checkpointing.
//! - [`simulate`] — synthetic array scenes with ground truth and a
//!   JSON-lines manifest.
//! - [`metrics`] — Si-SNR, SNR, projection SDR and report aggregation.
//! - [`train`] — configs, Adam, differentiable pipeline graphs and the
//!   training loop behind the CLI.
//!
//! ## Runnable examples
//!
//! One example per capability lives in `examples/`:
//!
//! ```bash
//! cargo run --release --example stft_roundtrip
//! cargo run --release --example simulate_scene
//! cargo run --release --example features_probe
//! cargo run --release --example classical_mvdr
//! cargo run --release --example multitap_mvdr
//! cargo run --release --example gradient_check
//! cargo run --release --example gru_inversion
//! cargo run --release --example train_toy
//! ```
//!
//! The `beamsep` binary exposes the same machinery as a small CLI with
//! `simulate`, `train`, `infer` and `eval` subcommands.

pub mod beamformer;
pub mod error;
pub mod features;
pub mod linalg;
pub mod masking;
pub mod metrics;
pub mod neural;
pub mod signal;
pub mod simulate;
pub mod train;

pub use error::{Error, Result};
