use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;

use crate::encoder::{BoundModel, Model, OutputKind, Trainable};
use crate::error::{Error, Result};
use crate::graphs::{batch_graphs, ego_network_with_adjacency, Graph};
use crate::numerics::{BatchMoments, NormMode, Tape, Var};
use crate::rng::{derive_seed, seeded, Rng};

use super::graph_task::run_seed;
use super::harness::{logistic_loss, prepare_model, Learner, ModelSource};
use super::metrics::accuracy;
use super::task::{canonical_hash, FinetuneConfig, Level, RunResult, TaskSpec};

pub const EDGE_HOPS: usize = 2;
pub const EDGE_SPLIT_FRACTION: f64 = 0.05;

/// Held-out positive edges, sampled non-edges, and the graph the encoder
/// sees. Pairs are `(u, v)` with `u < v`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeSplit {
    /// The source graph minus both positive sets.
    pub residual: Graph,
    pub train_pos: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub train_neg: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
}

fn canonical((u, v): (usize, usize)) -> (usize, usize) {
    (u.min(v), u.max(v))
}

/// Splits 5% of edges as training positives and 5% as test positives,
/// removes both from the graph and draws as many uniform non-edges.
pub fn edge_split(g: &Graph, rng: &mut Rng) -> Result<EdgeSplit> {
    let m = g.edge_count();
    let k = (m as f64 * EDGE_SPLIT_FRACTION).round() as usize;
    let n = g.node_count();
    let non_edges = n * n.saturating_sub(1) / 2 - m;
    if k == 0 || non_edges < 2 * k {
        return Err(Error::Contract(format!(
            "graph with {n} nodes and {m} edges is too small for edge splits"
        )));
    }
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(rng);
    let edges = g.edges();
    let test_pos: Vec<_> = idx[..k].iter().map(|&i| canonical(edges[i])).collect();
    let train_pos: Vec<_> = idx[k..2 * k].iter().map(|&i| canonical(edges[i])).collect();
    let mut rest = idx[2 * k..].to_vec();
    rest.sort_unstable();
    let residual = g.with_edge_subset(&rest);

    let existing: HashSet<(usize, usize)> = edges.iter().map(|&e| canonical(e)).collect();
    let mut drawn = HashSet::new();
    let mut negatives = Vec::with_capacity(2 * k);
    while negatives.len() < 2 * k {
        let pair = canonical((rng.gen_range(0..n), rng.gen_range(0..n)));
        if pair.0 != pair.1 && !existing.contains(&pair) && drawn.insert(pair) {
            negatives.push(pair);
        }
    }
    let train_neg = negatives.split_off(k);
    Ok(EdgeSplit {
        residual,
        train_pos,
        test_pos,
        train_neg,
        test_neg: negatives,
    })
}

/// Two-hop ego networks of the residual graph, built on demand.
struct EgoCache<'a> {
    graph: &'a Graph,
    adj: Vec<Vec<usize>>,
    nets: HashMap<usize, Graph>,
    rng: Rng,
}

impl<'a> EgoCache<'a> {
    fn new(graph: &'a Graph) -> Self {
        Self {
            graph,
            adj: graph.adjacency(),
            nets: HashMap::new(),
            // uncapped expansion never draws
            rng: seeded(0),
        }
    }

    fn get(&mut self, v: usize) -> Result<Graph> {
        if let Some(g) = self.nets.get(&v) {
            return Ok(g.clone());
        }
        let mut ego = ego_network_with_adjacency(self.graph, &self.adj, v, EDGE_HOPS, None, &mut self.rng)?.graph;
        ego.clear_node_labels();
        self.nets.insert(v, ego.clone());
        Ok(ego)
    }

    /// Ego networks of every endpoint, interleaved `u0, v0, u1, v1, …`.
    fn pairs(&mut self, pairs: &[(usize, usize)]) -> Result<Vec<Graph>> {
        let mut out = Vec::with_capacity(2 * pairs.len());
        for &(u, v) in pairs {
            out.push(self.get(u)?);
            out.push(self.get(v)?);
        }
        Ok(out)
    }
}

fn pair_logits(
    model: &Model,
    tape: &mut Tape,
    bound: &BoundModel,
    egos: &[Graph],
    mode: NormMode,
) -> Result<(Var, Vec<BatchMoments>)> {
    let batch = batch_graphs(egos)?;
    let out = model.forward(tape, bound, &batch, None, mode)?;
    let offsets = batch.node_offset();
    let first: Vec<usize> = (0..egos.len()).step_by(2).map(|i| offsets[i]).collect();
    let second: Vec<usize> = (1..egos.len()).step_by(2).map(|i| offsets[i]).collect();
    let hu = tape.gather_rows(out.nodes, &first)?;
    let hv = tape.gather_rows(out.nodes, &second)?;
    let pair = tape.concat_cols(hu, hv)?;
    Ok((model.apply_output(tape, bound, pair)?, out.moments))
}

/// One edge-prediction run: its split and test accuracy at σ(score) > ½.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeRun {
    pub split: EdgeSplit,
    pub accuracy: f64,
}

/// Logits of `pairs` with running normalization statistics.
fn score_pairs(model: &Model, cache: &mut EgoCache, pairs: &[(usize, usize)]) -> Result<Vec<f32>> {
    let mut scores = Vec::with_capacity(pairs.len());
    for chunk in pairs.chunks(128) {
        let egos = cache.pairs(chunk)?;
        let mut tape = Tape::new();
        let bound = model.bind(&mut tape, Trainable::NONE);
        let (logits, _) = pair_logits(model, &mut tape, &bound, &egos, NormMode::Inference)?;
        scores.extend_from_slice(tape.value(logits).data());
    }
    Ok(scores)
}

pub fn edge_prediction_run(
    source: &ModelSource,
    g: &Graph,
    task: &TaskSpec,
    cfg: &FinetuneConfig,
    seed: u64,
) -> Result<EdgeRun> {
    let split = edge_split(g, &mut seeded(derive_seed(seed, 0)))?;
    let features = task.with_features.then(|| vec![&split.residual]);
    let model = prepare_model(source, features.as_deref(), OutputKind::EdgePair, seed)?;
    let mut cache = EgoCache::new(&split.residual);

    let mut train: Vec<((usize, usize), f32)> = split.train_pos.iter().map(|&p| (p, 1.0)).collect();
    train.extend(split.train_neg.iter().map(|&p| (p, 0.0)));
    let mut learner = Learner::new(model, cfg);
    let mut rng = seeded(derive_seed(seed, 3));
    for _ in 0..cfg.epochs {
        train.shuffle(&mut rng);
        for chunk in train.chunks(cfg.batch_size) {
            let pairs: Vec<_> = chunk.iter().map(|&(p, _)| p).collect();
            let labels: Vec<f32> = chunk.iter().map(|&(_, y)| y).collect();
            let egos = cache.pairs(&pairs)?;
            learner.step(|model, tape, bound, mode| {
                let (logits, moments) = pair_logits(model, tape, bound, &egos, mode)?;
                Ok((logistic_loss(tape, logits, &labels)?, moments))
            })?;
        }
    }

    let model = learner.model;
    let accuracy = evaluate_pairs(&model, &mut cache, &split)?;
    Ok(EdgeRun { split, accuracy })
}

fn evaluate_pairs(model: &Model, cache: &mut EgoCache, split: &EdgeSplit) -> Result<f64> {
    let mut pairs = split.test_pos.clone();
    pairs.extend_from_slice(&split.test_neg);
    let truth: Vec<usize> = (0..pairs.len())
        .map(|i| usize::from(i < split.test_pos.len()))
        .collect();
    let predicted: Vec<usize> = score_pairs(model, cache, &pairs)?
        .into_iter()
        .map(|s| usize::from(s > 0.0))
        .collect();
    accuracy(&predicted, &truth)
}

/// Test accuracy of an already-trained edge model on `split`.
pub fn edge_accuracy(model: &Model, split: &EdgeSplit) -> Result<f64> {
    evaluate_pairs(model, &mut EgoCache::new(&split.residual), split)
}

pub fn edge_prediction_experiment(
    source: ModelSource,
    dataset: &str,
    g: &Graph,
    task: &TaskSpec,
    cfg: &FinetuneConfig,
) -> Result<RunResult> {
    task.validate()?;
    cfg.validate()?;
    if task.level != Level::Edge {
        return Err(Error::Contract("edge prediction needs an edge-level task".into()));
    }
    let scores = (0..cfg.runs)
        .into_par_iter()
        .map(|r| edge_prediction_run(&source, g, task, cfg, run_seed(cfg, r)).map(|run| run.accuracy))
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
