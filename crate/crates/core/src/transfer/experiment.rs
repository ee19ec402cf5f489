use crate::error::{Error, Result};
use crate::graphs::Graph;

use super::edge_task::edge_prediction_experiment;
use super::graph_task::finetune_graph_task;
use super::harness::ModelSource;
use super::node_task::node_classification_experiment;
use super::task::{FinetuneConfig, Level, RunResult, TaskSpec};

/// Runs `task` on `graphs`. Graph-level tasks use the whole list; node and
/// edge tasks expect a single large graph.
pub fn run_task(
    source: ModelSource,
    dataset: &str,
    graphs: &[Graph],
    task: &TaskSpec,
    cfg: &FinetuneConfig,
) -> Result<RunResult> {
    match task.level {
        Level::Graph => finetune_graph_task(source, dataset, graphs, task, cfg),
        Level::Node | Level::Edge => {
            let [g] = graphs else {
                return Err(Error::Contract(format!(
                    "{:?}-level tasks need exactly one graph, {dataset} holds {}",
                    task.level,
                    graphs.len()
                )));
            };
            if task.level == Level::Node {
                node_classification_experiment(source, dataset, g, task, cfg)
            } else {
                edge_prediction_experiment(source, dataset, g, task, cfg)
            }
        }
    }
}
