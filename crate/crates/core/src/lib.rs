//! Blind equalization of QPSK over unknown FIR channels.
//!
//! The [`vae`] module learns a channel estimate and a small convolutional
//! equalizer jointly by maximizing a closed-form evidence lower bound.
//! [`baselines`] holds the constant-modulus and supervised LMS reference
//! equalizers, and [`eval`] runs seeded multi-trial SER experiments.

pub mod baselines;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod rng;
pub mod signal;
pub mod textio;
pub mod vae;

pub use error::{Error, Result};
pub use signal::{ChannelSpec, ComplexSeq, Dataset, PaddingMode};
