//! GIN encoder with swappable input and output heads, and the view learner
//! that scores edges for learned dropping.

mod config;
mod gin;
mod heads;
mod layers;
mod model;
mod view;

pub use config::{EncoderConfig, Readout};
pub use gin::GinStack;
pub use heads::{InputHead, InputKind, OutputHead, OutputKind};
pub use model::{build_model, BoundModel, Embeddings, ForwardOutput, Model, Trainable};
pub use view::{BoundView, ViewLearner};
