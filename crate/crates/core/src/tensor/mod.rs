//! Dense tensors, reverse-mode differentiation and the Adam optimizer.

mod adam;
mod array;
mod kernels;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use array::Tensor;
pub use kernels::softmax_in_place;
pub use tape::{Tape, Var};
