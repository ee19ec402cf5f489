//! Graph data model, batching, synthetic generators, exploration samplers,
//! ego networks, metrics and the JSON Lines corpus format.

mod batch;
mod ego;
pub mod generators;
mod graph;
pub mod io;
mod metrics;
mod sampling;

pub use batch::{batch_graphs, GraphBatch};
pub use ego::{ego_network, ego_network_with_adjacency, EgoNet};
pub use generators::{
    community_with, er_with, generate_community, generate_corpus, generate_er, generate_tree, tree_with,
    CommunityParams, ErParams, SyntheticKind, TreeParams,
};
pub use graph::Graph;
pub use metrics::{graph_metrics, MetricRecord};
pub use sampling::{explore_sample, Explorer, Sampler};
