//! Contrastive pre-training on featureless corpora: random-augmentation
//! views and adversarially learned edge dropping.

mod augment;
mod config;
mod log;
mod loss;
mod trainer;

pub use augment::{
    concrete_edge_weights, concrete_weights_with_noise, logistic_noise, random_edge_drop, random_node_drop, NOISE_GUARD,
};
pub use config::{Method, PretrainConfig};
pub use log::{EpochRecord, TrainLog};
pub use loss::{drop_ratio, nt_xent, NORM_EPS};
pub use trainer::{
    pretrain, pretraining_model, train_adgcl, train_graphcl, AdgclTrainer, GraphclTrainer, Pretrained, ViewStep,
};
