use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::encoder::{BoundModel, Model, OutputKind, Trainable};
use crate::error::{Error, Result};
use crate::graphs::{batch_graphs, ego_network_with_adjacency, Graph, GraphBatch};
use crate::numerics::{BatchMoments, NormMode, Tape, Var};
use crate::rng::{derive_seed, seeded};

use super::graph_task::run_seed;
use super::harness::{cross_entropy, prepare_model, Learner, ModelSource};
use super::metrics::accuracy;
use super::task::{canonical_hash, FinetuneConfig, Level, RunResult, TaskKind, TaskSpec};

pub const NODE_HOPS: usize = 3;
pub const NODE_FANOUT: usize = 5;
pub const NODE_TRAIN_FRACTION: f64 = 0.2;

/// One node-classification run.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeRun {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Predicted class of each test node, in `test` order.
    pub predictions: Vec<usize>,
    pub accuracy: f64,
}

/// Capped ego network of every node, without labels. Center is row 0.
pub fn node_ego_networks(g: &Graph, seed: u64) -> Result<Vec<Graph>> {
    let adj = g.adjacency();
    let mut rng = seeded(seed);
    (0..g.node_count())
        .map(|v| {
            let mut ego = ego_network_with_adjacency(g, &adj, v, NODE_HOPS, Some(NODE_FANOUT), &mut rng)?.graph;
            ego.clear_node_labels();
            Ok(ego)
        })
        .collect()
}

fn center_logits(
    model: &Model,
    tape: &mut Tape,
    bound: &BoundModel,
    batch: &GraphBatch,
    mode: NormMode,
) -> Result<(Var, Vec<BatchMoments>)> {
    let out = model.forward(tape, bound, batch, None, mode)?;
    let centers = tape.gather_rows(out.nodes, &batch.node_offset()[..batch.num_graphs()])?;
    Ok((model.apply_output(tape, bound, centers)?, out.moments))
}

fn labels_of(g: &Graph, classes: usize) -> Result<&[usize]> {
    let labels = g
        .node_labels()
        .ok_or_else(|| Error::Contract("node classification needs node labels".into()))?;
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Contract(format!("label {bad} outside {classes} classes")));
    }
    Ok(labels)
}

/// Trains on a 20% node split and predicts the rest. Training only reads the
/// labels of training nodes; ego networks carry no labels.
pub fn node_classification_run(
    source: &ModelSource,
    g: &Graph,
    task: &TaskSpec,
    cfg: &FinetuneConfig,
    seed: u64,
) -> Result<NodeRun> {
    let TaskKind::Multiclass { classes } = task.kind else {
        return Err(Error::Contract("node classification needs a multiclass task".into()));
    };
    let labels = labels_of(g, classes)?;
    let n = g.node_count();
    let train_count = ((n as f64 * NODE_TRAIN_FRACTION).round() as usize).max(1);
    if train_count >= n {
        return Err(Error::Contract(format!("{n} nodes are too few for a node split")));
    }
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(&mut seeded(derive_seed(seed, 0)));
    let test = nodes.split_off(train_count);
    let train = nodes;

    let egos = node_ego_networks(g, derive_seed(seed, 4))?;
    let features: Option<Vec<&Graph>> = task.with_features.then(|| egos.iter().collect());
    let model = prepare_model(source, features.as_deref(), OutputKind::NodeClass { classes }, seed)?;
    let mut learner = Learner::new(model, cfg);
    let mut rng = seeded(derive_seed(seed, 3));
    let mut order = train.clone();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = batch_graphs(&chunk.iter().map(|&v| egos[v].clone()).collect::<Vec<_>>())?;
            let y: Vec<usize> = chunk.iter().map(|&v| labels[v]).collect();
            learner.step(|model, tape, bound, mode| {
                let (logits, moments) = center_logits(model, tape, bound, &batch, mode)?;
                Ok((cross_entropy(tape, logits, &y)?, moments))
            })?;
        }
    }

    let model = learner.model;
    let mut predictions = Vec::with_capacity(test.len());
    for chunk in test.chunks(256) {
        let batch = batch_graphs(&chunk.iter().map(|&v| egos[v].clone()).collect::<Vec<_>>())?;
        let mut tape = Tape::new();
        let bound = model.bind(&mut tape, Trainable::NONE);
        let (logits, _) = center_logits(&model, &mut tape, &bound, &batch, NormMode::Inference)?;
        let logits = tape.value(logits);
        predictions.extend((0..logits.rows()).map(|r| {
            let row = logits.row(r);
            (0..row.len()).fold(0, |best, c| if row[c] > row[best] { c } else { best })
        }));
    }
    let truth: Vec<usize> = test.iter().map(|&v| labels[v]).collect();
    let accuracy = accuracy(&predictions, &truth)?;
    Ok(NodeRun {
        train,
        test,
        predictions,
        accuracy,
    })
}

pub fn node_classification_experiment(
    source: ModelSource,
    dataset: &str,
    g: &Graph,
    task: &TaskSpec,
    cfg: &FinetuneConfig,
) -> Result<RunResult> {
    task.validate()?;
    cfg.validate()?;
    if task.level != Level::Node {
        return Err(Error::Contract("node classification needs a node-level task".into()));
    }
    let scores = (0..cfg.runs)
        .into_par_iter()
        .map(|r| node_classification_run(&source, g, task, cfg, run_seed(cfg, r)).map(|run| run.accuracy))
        .collect::<Result<Vec<f64>>>()?;
    let hash = canonical_hash(&(dataset, task, cfg, source.encoder_config()));
    Ok(RunResult::new(
        dataset,
        *task,
        scores,
        hash,
        source.encoder_hash(),
        source.id()?,
    ))
}
