//! Time-domain channel estimation for wideband mmWave MIMO-OFDM that
//! exploits the block sparsity of the tap-by-antenna channel matrix.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`channel`]: sample a sparse multipath channel `H` (`N_cp × N_BS`).
//! 2. [`pilot`]: transmit pilots over a beam codebook, add noise, and
//!    decouple the beams into `Z = A·H + N`.
//! 3. [`solver`]: recover `H` by greedy block pursuit ([`solver::tdcebs`]),
//!    per-column OMP, or plain least squares.
//! 4. [`eval`]: score estimates by NMSE and by the BER of a QPSK link, over
//!    seeded Monte-Carlo sweeps.
//!
//! [`oracle`] holds a deliberately literal stacked-vector implementation of
//! the block pursuit used to cross-check [`solver`] on small problems.

pub mod channel;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod oracle;
pub mod pilot;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use num_complex::Complex64;
