//! Heart-murmur classification from paired audio representations.
//!
//! Feature vectors (cepstral coefficients computed here, or codec embeddings
//! produced elsewhere and stored as `.fvec` files) feed either a
//! single-branch classifier or a two-branch cross-attention model whose head
//! weights are learned by a bandit.

pub mod checkpoint;
pub mod dsp;
pub mod error;
pub mod fusion;
pub mod io;
pub mod models;
pub mod nn;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
