//! Simulation laboratory for nonlinear equalization of DP-16QAM over long-haul fiber.
//!
//! The chain is split into the same stages a coherent link has:
//!
//! - [`txdsp`]: PRBS data, Gray-mapped 16-QAM, RRC pulse shaping.
//! - [`channel`]: split-step Fourier propagation (Manakov), EDFA/ASE, WDM neighbours.
//! - [`rxdsp`]: CD compensation, matched filtering, data-aided alignment, DBP.
//! - [`nnequalizer`]: MLP, biLSTM and CRNN equalizers with hand-written backprop and Adam.
//! - [`hyperopt`]: Gaussian-process Bayesian optimisation of equalizer hyperparameters.
//! - [`eval`]: BER / Q-factor, launch-power sweeps and published reference curves.
//! - [`cli`]: configuration and the command-line driver.

pub mod channel;
pub mod cli;
pub mod error;
pub mod eval;
pub mod hyperopt;
pub mod io;
pub mod nnequalizer;
pub mod rxdsp;
pub mod seed;
pub mod spectral;
pub mod txdsp;

pub use error::{Error, Result};
pub use num_complex::Complex64;
