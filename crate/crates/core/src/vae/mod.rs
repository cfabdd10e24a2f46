//! Variational-autoencoder blind equalizer.

pub mod adam;
pub mod decoder;
pub mod elbo;
pub mod grad;
pub mod train;

pub use adam::{Adam, AdamConfig};
pub use decoder::{
    complex_conv1d, decoder_forward, detect_symbols, ComplexFilter, DecoderParams,
    SymbolPosteriors, CONV1_LEN, CONV2_LEN, EPS_Q,
};
pub use elbo::{entropy_term, kl_term_a, loss, negative_elbo, residual_term_c, LossBreakdown, EPS_C};
pub use grad::{loss_gradients, Gradients};
pub use train::{train, TrainConfig, TrainOutcome, TrainReport, VaeModel};
