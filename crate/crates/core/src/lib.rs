//! Topology-only contrastive pre-training for GIN graph encoders.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: tensors, reverse-mode differentiation, Adam.
//! * [`graphs`]: graph model, batching, generators, samplers, metrics.
//! * [`encoder`]: GIN encoder with swappable input and output heads, and the
//!   edge-scoring view learner.
//! * [`pretrain`]: contrastive loss, augmentations and the two pre-training
//!   loops.
//! * [`transfer`]: fine-tuning and evaluation harness.
//! * [`analysis`]: PCA of embeddings and correlation with graph metrics.
//! * [`checkpoint`] and [`config`]: persistence and experiment description.

pub mod analysis;
pub mod checkpoint;
pub mod config;
pub mod encoder;
pub mod error;
pub mod graphs;
pub mod numerics;
pub mod pretrain;
pub mod rng;
pub mod transfer;

pub use error::{Error, Result};
