//! Multi-speaker direction-of-arrival estimation for uniform linear arrays.
//!
//! The crate covers the whole pipeline: room acoustics simulation, synthesis of
//! noise-based training data with per-subband time-frequency randomization, a
//! small convolutional network engine operating on STFT phase maps, block-level
//! DOA decisions, the SRP-PHAT and broadband MUSIC baselines, and an evaluation
//! harness.

// `!(x > 0.0)` checks reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acoustics;
pub mod baselines;
pub mod dataset;
pub mod estimator;
pub mod eval;
pub mod nnet;
pub mod rng;
pub mod signal;

mod error;

pub use error::{Error, Result};

pub use acoustics::{ArrayGeometry, Rir, RirBank, RoomConfig, SourcePlacement};
pub use dataset::{Dataset, DatasetRecord, DoaGrid, LabelVector, PhaseMap};
pub use estimator::{BlockEstimate, PosteriorVector};
pub use nnet::{ModelSpec, Network};
pub use signal::{MultichannelSignal, Spectrogram, StftParams, WindowKind};

/// Complex sample type used by all spectral code.
pub type Complex = num_complex::Complex64;

/// Default speed of sound in m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;
