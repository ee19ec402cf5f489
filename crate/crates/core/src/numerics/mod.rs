//! Dense `f32` tensors, a reverse-mode gradient tape, batch normalization
//! and the Adam optimizer.

mod adam;
mod batch_norm;
mod params;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use batch_norm::{BatchMoments, BatchNormStats, NormMode};
pub use params::{NamedTensor, ParamStore};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

pub(crate) use tape::sigmoid;
