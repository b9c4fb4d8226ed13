//! Smooth-signal denoising of successive altimetric waveforms.
//!
//! Blocks of K gates × M signals are denoised by coordinate-descent MAP
//! estimation under a squared-exponential prior across signals and gamma
//! Markov chains over the per-gate noise and signal variances. The crate also
//! simulates Brown-model echoes with multilook speckle, retracks them by least
//! squares, and provides a truncated-SVD reference filter.

pub mod baselines;
pub mod bench;
pub mod block;
pub mod cli;
pub mod error;
pub mod gmrf;
pub mod io_util;
pub mod kernels;
pub mod manifest;
pub mod metrics;
pub mod signal_model;
pub mod simulator;
pub mod solver;

pub use block::SignalBlock;
pub use error::{Error, Result};
pub use signal_model::{BrownConstants, BrownParams, Waveform};
pub use solver::{denoise, denoise_stream, SolverConfig, SolverState};
