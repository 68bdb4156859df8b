//! Multimodal co-learning with modality dropout.
//!
//! Two sequence models (a bidirectional early-fusion LSTM classifier and a
//! Memory Fusion Network regressor) are built on a small reverse-mode autodiff
//! engine, trained with whole-modality dropout, and compared against
//! unimodally trained counterparts on language-only test data.

pub mod autograd;
mod codec;
pub mod data;
pub mod error;
pub mod experiments;
pub mod modality_dropout;
pub mod models;
pub mod rng;
pub mod training;

pub use autograd::{Tape, Tensor, Var};
pub use error::{Error, FormatError, Result};
