//! Fine-tuning and evaluation: graph-level tasks with optional feature
//! heads, node classification and edge prediction on ego networks, linear
//! probes, metrics and run statistics.

mod edge_task;
mod experiment;
mod graph_task;
mod harness;
mod metrics;
mod node_task;
mod probe;
mod task;

pub use edge_task::{
    edge_accuracy, edge_prediction_experiment, edge_prediction_run, edge_split, EdgeRun, EdgeSplit, EDGE_HOPS,
    EDGE_SPLIT_FRACTION,
};
pub use experiment::run_task;
pub use graph_task::{
    finetune_graph_task, fit_graph_model, graph_split, predict_graphs, run_seed, score_graph_model, TargetScale,
};
pub use harness::ModelSource;
pub use metrics::{
    accuracy, auroc, mean, rmse, sample_variance, sweep_heuristic, welch_test, Direction, Metric, WelchTest,
};
pub use node_task::{
    node_classification_experiment, node_classification_run, node_ego_networks, NodeRun, NODE_FANOUT, NODE_HOPS,
    NODE_TRAIN_FRACTION,
};
pub use probe::{linear_probe, logistic_fit, ridge_fit, LinearModel, ProbeTask, PROBE_TRAIN_FRACTION, RIDGE_ALPHA};
pub use task::{
    canonical_hash, compare, encoder_hash, write_comparisons_csv, Comparison, FinetuneConfig, Level, RunResult,
    TaskKind, TaskSpec,
};
