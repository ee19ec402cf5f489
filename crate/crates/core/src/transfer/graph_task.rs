use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::encoder::{Model, OutputKind};
use crate::error::{Error, Result};
use crate::graphs::{batch_graphs, Graph};
use crate::numerics::NormMode;
use crate::rng::{derive_seed, seeded};

use super::harness::{logistic_loss, prepare_model, squared_loss, Learner, ModelSource};
use super::metrics::{auroc, rmse};
use super::task::{canonical_hash, FinetuneConfig, RunResult, TaskKind, TaskSpec};

/// Affine map between raw targets and the standardized values the model is
/// trained on. Statistics are over the whole dataset's targets, so every
/// run and every compared model shares one scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TargetScale {
    pub mean: f64,
    pub std: f64,
}

impl TargetScale {
    pub fn identity() -> Self {
        Self { mean: 0.0, std: 1.0 }
    }

    /// Population statistics; a constant target keeps unit scale.
    pub fn fit(targets: &[f64]) -> Self {
        let n = targets.len().max(1) as f64;
        let mean = targets.iter().sum::<f64>() / n;
        let var = targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
        let std = if var > 0.0 { var.sqrt() } else { 1.0 };
        Self { mean, std }
    }

    pub fn forward(&self, y: f64) -> f64 {
        (y - self.mean) / self.std
    }

    pub fn inverse(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

pub(crate) fn targets(graphs: &[Graph]) -> Result<Vec<f64>> {
    graphs
        .iter()
        .enumerate()
        .map(|(i, g)| {
            g.target()
                .map(f64::from)
                .ok_or_else(|| Error::Contract(format!("graph {i} has no target")))
        })
        .collect()
}

/// Deterministic shuffled split into (train, test) indices.
pub fn graph_split(count: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let train = (count as f64 * train_fraction).round() as usize;
    if train == 0 || train >= count {
        return Err(Error::Contract(format!(
            "a {train_fraction} split of {count} graphs leaves an empty side"
        )));
    }
    let mut idx: Vec<usize> = (0..count).collect();
    idx.shuffle(&mut seeded(seed));
    let test = idx.split_off(train);
    Ok((idx, test))
}

/// Raw-scale predictions (regression) or logits (binary) of a graph-task
/// model for `idx`, with running normalization statistics.
pub fn predict_graphs(
    model: &Model,
    graphs: &[Graph],
    idx: &[usize],
    scale: TargetScale,
    kind: TaskKind,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(idx.len());
    for chunk in idx.chunks(256) {
        let batch = batch_graphs(&chunk.iter().map(|&i| graphs[i].clone()).collect::<Vec<_>>())?;
        let z = model
            .embed(&batch, NormMode::Inference)?
            .output
            .ok_or_else(|| Error::HeadMismatch("graph task needs a graph-level output head".into()))?;
        out.extend(z.data().iter().map(|&v| match kind {
            TaskKind::Regression => scale.inverse(v as f64),
            _ => v as f64,
        }));
    }
    Ok(out)
}

/// Metric of `model` on `idx`: RMSE in target units, or AUROC.
pub fn score_graph_model(
    model: &Model,
    graphs: &[Graph],
    idx: &[usize],
    scale: TargetScale,
    task: &TaskSpec,
) -> Result<f64> {
    let y = targets(graphs)?;
    let pred = predict_graphs(model, graphs, idx, scale, task.kind)?;
    let truth: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    match task.kind {
        TaskKind::Regression => rmse(&pred, &truth),
        _ => auroc(&pred, &truth.iter().map(|&t| t > 0.5).collect::<Vec<_>>()),
    }
}

/// Trains `model` on `train` for `cfg.epochs`.
pub fn fit_graph_model(
    model: Model,
    graphs: &[Graph],
    train: &[usize],
    scale: TargetScale,
    task: &TaskSpec,
    cfg: &FinetuneConfig,
    seed: u64,
) -> Result<Model> {
    let y = targets(graphs)?;
    let mut learner = Learner::new(model, cfg);
    let mut rng = seeded(seed);
    let mut order = train.to_vec();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = batch_graphs(&chunk.iter().map(|&i| graphs[i].clone()).collect::<Vec<_>>())?;
            let labels: Vec<f32> = chunk
                .iter()
                .map(|&i| match task.kind {
                    TaskKind::Regression => scale.forward(y[i]) as f32,
                    _ => f32::from(u8::from(y[i] > 0.5)),
                })
                .collect();
            learner.step(|model, tape, bound, mode| {
                let out = model.forward(tape, bound, &batch, None, mode)?;
                let pred = out.output.expect("graph task head is graph-level");
                let loss = match task.kind {
                    TaskKind::Regression => squared_loss(tape, pred, &labels)?,
                    _ => logistic_loss(tape, pred, &labels)?,
                };
                Ok((loss, out.moments))
            })?;
        }
    }
    Ok(learner.model)
}

/// Seed of run `r`; shared by every source so compared runs see identical
/// splits and shuffles.
pub fn run_seed(cfg: &FinetuneConfig, r: usize) -> u64 {
    derive_seed(cfg.seed, r as u64)
}

/// Fine-tunes `cfg.runs` copies of the source on a graph-level task and
/// scores each on its held-out split.
pub fn finetune_graph_task(
    source: ModelSource,
    dataset: &str,
    graphs: &[Graph],
    task: &TaskSpec,
    cfg: &FinetuneConfig,
) -> Result<RunResult> {
    task.validate()?;
    cfg.validate()?;
    if !matches!(task.level, super::task::Level::Graph) {
        return Err(Error::Contract("finetune_graph_task needs a graph-level task".into()));
    }
    let y = targets(graphs)?;
    let scale = match task.kind {
        TaskKind::Regression => TargetScale::fit(&y),
        _ => TargetScale::identity(),
    };
    let refs: Vec<&Graph> = graphs.iter().collect();
    let features = task.with_features.then_some(refs.as_slice());
    let scores = (0..cfg.runs)
        .into_par_iter()
        .map(|r| {
            let seed = run_seed(cfg, r);
            let (train, test) = graph_split(graphs.len(), cfg.train_fraction, derive_seed(seed, 0))?;
            let model = prepare_model(&source, features, OutputKind::GraphTask, seed)?;
            let model = fit_graph_model(model, graphs, &train, scale, task, cfg, derive_seed(seed, 3))?;
            score_graph_model(&model, graphs, &test, scale, task)
        })
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
