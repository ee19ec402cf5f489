use std::time::Instant;

use rand::seq::SliceRandom;

use crate::encoder::{EncoderConfig, InputKind, Model, OutputKind, Trainable, ViewLearner};
use crate::error::{Error, Result};
use crate::graphs::{batch_graphs, Graph, GraphBatch};
use crate::numerics::{sigmoid, AdamConfig, AdamState, NormMode, Tape, Var};
use crate::rng::{derive_seed, seeded, Rng};

use super::augment::{concrete_edge_weights, random_edge_drop, random_node_drop};
use super::log::{composition, EpochRecord, TrainLog};
use super::loss::{drop_ratio, nt_xent};
use super::{Method, PretrainConfig};

/// Result of a pre-training run.
#[derive(Clone, Debug)]
pub struct Pretrained {
    pub model: Model,
    /// The trained view learner, for learned augmentations.
    pub view: Option<ViewLearner>,
    pub log: TrainLog,
}

/// Statistics of one view-learner update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViewStep {
    /// `−nt_xent + λ_reg · drop_ratio`.
    pub loss: f32,
    pub contrastive: f32,
    pub drop_ratio: f32,
    /// Mean `σ(logit)` over the batch's edges; NaN without edges.
    pub keep_prob: f32,
}

/// Fresh encoder with a constant input head and projection output head.
pub fn pretraining_model(encoder: &EncoderConfig, seed: u64) -> Result<Model> {
    Model::new(
        encoder,
        InputKind::Constant,
        OutputKind::Projection {
            dim: encoder.projection_dim,
        },
        derive_seed(seed, 0),
    )
}

fn projection(output: Option<Var>) -> Result<Var> {
    output.ok_or_else(|| Error::HeadMismatch("contrastive training needs a graph-level output head".into()))
}

/// Alternating adversarial trainer: a view-learner step on
/// `−nt_xent + λ_reg·drop_ratio`, then an encoder step on `nt_xent`, each
/// touching only its own parameters.
#[derive(Clone, Debug)]
pub struct AdgclTrainer {
    config: PretrainConfig,
    model: Model,
    view: ViewLearner,
    model_opt: AdamState,
    view_opt: AdamState,
    rng: Rng,
}

impl AdgclTrainer {
    pub fn new(encoder: &EncoderConfig, config: &PretrainConfig) -> Result<Self> {
        config.validate()?;
        let model = pretraining_model(encoder, config.seed)?;
        let view = ViewLearner::new(encoder, derive_seed(config.seed, 1))?;
        Ok(Self::from_parts(model, view, config))
    }

    pub fn from_parts(model: Model, view: ViewLearner, config: &PretrainConfig) -> Self {
        let model_opt = AdamState::new(
            AdamConfig::with_lr(config.lr_encoder),
            model.param_tensors(Trainable::ALL),
        );
        let view_opt = AdamState::new(AdamConfig::with_lr(config.lr_view), view.param_tensors());
        Self {
            config: config.clone(),
            model,
            view,
            model_opt,
            view_opt,
            rng: seeded(derive_seed(config.seed, 2)),
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn view(&self) -> &ViewLearner {
        &self.view
    }

    pub fn into_parts(self) -> (Model, ViewLearner) {
        (self.model, self.view)
    }

    pub(crate) fn rng(&mut self) -> &mut Rng {
        &mut self.rng
    }

    /// Updates the view learner only.
    pub fn view_step(&mut self, batch: &GraphBatch) -> Result<ViewStep> {
        let mut tape = Tape::new();
        let enc = self.model.bind(&mut tape, Trainable::NONE);
        let vb = self.view.bind(&mut tape, true);
        let (logits, moments) = self.view.logits(&mut tape, &vb, batch, NormMode::Training)?;
        let keep_prob = mean_sigmoid(tape.value(logits).data());
        let w = concrete_edge_weights(
            &mut tape,
            logits,
            batch,
            self.config.concrete_temperature,
            &mut self.rng,
        )?;
        let plain = self.model.forward(&mut tape, &enc, batch, None, NormMode::Training)?;
        let dropped = self
            .model
            .forward(&mut tape, &enc, batch, Some(w), NormMode::Training)?;
        let contrastive = nt_xent(
            &mut tape,
            projection(plain.output)?,
            projection(dropped.output)?,
            self.config.temperature,
        )?;
        let ratio = drop_ratio(&mut tape, w, batch)?;
        let adversarial = tape.scale(contrastive, -1.0);
        let penalty = tape.scale(ratio, self.config.reg_weight);
        let loss = tape.add(adversarial, penalty)?;
        let grads = tape.backward(loss)?;
        let g = self.view.grads(&vb, &grads);
        self.view_opt.step(&mut self.view.params_mut(), &g)?;
        self.view.record_moments(&moments);
        Ok(ViewStep {
            loss: tape.value(loss).item(),
            contrastive: tape.value(contrastive).item(),
            drop_ratio: tape.value(ratio).item(),
            keep_prob,
        })
    }

    /// Updates the encoder (input head, stack and projection) only, with
    /// fresh edge-weight noise. Returns the contrastive loss.
    pub fn encoder_step(&mut self, batch: &GraphBatch) -> Result<f32> {
        let mut tape = Tape::new();
        let enc = self.model.bind(&mut tape, Trainable::ALL);
        let vb = self.view.bind(&mut tape, false);
        let (logits, _) = self.view.logits(&mut tape, &vb, batch, NormMode::Training)?;
        let w = concrete_edge_weights(
            &mut tape,
            logits,
            batch,
            self.config.concrete_temperature,
            &mut self.rng,
        )?;
        let plain = self.model.forward(&mut tape, &enc, batch, None, NormMode::Training)?;
        let dropped = self
            .model
            .forward(&mut tape, &enc, batch, Some(w), NormMode::Training)?;
        let loss = nt_xent(
            &mut tape,
            projection(plain.output)?,
            projection(dropped.output)?,
            self.config.temperature,
        )?;
        let grads = tape.backward(loss)?;
        let g = self.model.grads(&enc, &grads);
        self.model_opt.step(&mut self.model.params_mut(Trainable::ALL), &g)?;
        self.model.record_moments(&plain.moments);
        self.model.record_moments(&dropped.moments);
        Ok(tape.value(loss).item())
    }
}

fn mean_sigmoid(logits: &[f32]) -> f32 {
    if logits.is_empty() {
        return f32::NAN;
    }
    logits.iter().map(|&l| sigmoid(l) as f64).sum::<f64>() as f32 / logits.len() as f32
}

/// Featureless copies for pre-training.
fn strip(corpus: &[Graph]) -> Result<Vec<Graph>> {
    if corpus.len() < 2 {
        return Err(Error::Contract(format!(
            "pre-training needs at least 2 graphs, got {}",
            corpus.len()
        )));
    }
    Ok(corpus
        .iter()
        .map(|g| {
            let mut g = g.clone();
            g.clear_features();
            g.clear_node_labels();
            g
        })
        .collect())
}

/// Shuffled index batches. A trailing single graph joins the previous batch
/// so every batch has negatives.
pub(crate) fn epoch_batches(count: usize, batch_size: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(rng);
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() == 1) {
        let tail = batches.pop().expect("non-empty");
        batches.last_mut().expect("non-empty").extend(tail);
    }
    batches
}

fn gather(graphs: &[Graph], idx: &[usize]) -> Vec<Graph> {
    idx.iter().map(|&i| graphs[i].clone()).collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

pub fn train_adgcl(corpus: &[Graph], encoder: &EncoderConfig, config: &PretrainConfig) -> Result<Pretrained> {
    let graphs = strip(corpus)?;
    let mut trainer = AdgclTrainer::new(encoder, config)?;
    let mut log = TrainLog {
        seed: config.seed,
        composition: composition(corpus),
        epochs: Vec::new(),
    };
    for epoch in 0..config.epochs {
        let start = Instant::now();
        let mut losses = Vec::new();
        let mut keeps = Vec::new();
        for idx in epoch_batches(graphs.len(), config.batch_size, trainer.rng()) {
            let batch = batch_graphs(&gather(&graphs, &idx))?;
            let view = trainer.view_step(&batch)?;
            if view.keep_prob.is_finite() {
                keeps.push(view.keep_prob as f64);
            }
            losses.push(trainer.encoder_step(&batch)? as f64);
        }
        log.epochs.push(EpochRecord {
            epoch,
            loss: mean(&losses),
            keep_prob: (!keeps.is_empty()).then(|| mean(&keeps)),
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let (model, view) = trainer.into_parts();
    Ok(Pretrained {
        model,
        view: Some(view),
        log,
    })
}

/// Trainer for random-augmentation contrastive learning: two independently
/// augmented views of every graph, one Adam step per batch.
#[derive(Clone, Debug)]
pub struct GraphclTrainer {
    config: PretrainConfig,
    model: Model,
    opt: AdamState,
    rng: Rng,
}

impl GraphclTrainer {
    pub fn new(encoder: &EncoderConfig, config: &PretrainConfig) -> Result<Self> {
        config.validate()?;
        let model = pretraining_model(encoder, config.seed)?;
        let opt = AdamState::new(
            AdamConfig::with_lr(config.lr_encoder),
            model.param_tensors(Trainable::ALL),
        );
        Ok(Self {
            config: config.clone(),
            model,
            opt,
            rng: seeded(derive_seed(config.seed, 2)),
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    fn augment(&mut self, g: &Graph) -> Result<Graph> {
        match self.config.method {
            Method::GraphclNode => random_node_drop(g, self.config.drop_prob, &mut self.rng),
            _ => random_edge_drop(g, self.config.drop_prob, &mut self.rng),
        }
    }

    /// Contrastive loss of the current model on two fresh views of `graphs`,
    /// without updating anything.
    pub fn loss(&mut self, graphs: &[Graph]) -> Result<f32> {
        self.run(graphs, false)
    }

    /// One update on `graphs`; returns the loss before the update.
    pub fn step(&mut self, graphs: &[Graph]) -> Result<f32> {
        self.run(graphs, true)
    }

    fn run(&mut self, graphs: &[Graph], update: bool) -> Result<f32> {
        let first: Vec<Graph> = graphs.iter().map(|g| self.augment(g)).collect::<Result<_>>()?;
        let second: Vec<Graph> = graphs.iter().map(|g| self.augment(g)).collect::<Result<_>>()?;
        let (a, b) = (batch_graphs(&first)?, batch_graphs(&second)?);
        let mut tape = Tape::new();
        let trainable = if update { Trainable::ALL } else { Trainable::NONE };
        let bound = self.model.bind(&mut tape, trainable);
        let za = self.model.forward(&mut tape, &bound, &a, None, NormMode::Training)?;
        let zb = self.model.forward(&mut tape, &bound, &b, None, NormMode::Training)?;
        let loss = nt_xent(
            &mut tape,
            projection(za.output)?,
            projection(zb.output)?,
            self.config.temperature,
        )?;
        if update {
            let grads = tape.backward(loss)?;
            let g = self.model.grads(&bound, &grads);
            self.opt.step(&mut self.model.params_mut(Trainable::ALL), &g)?;
            self.model.record_moments(&za.moments);
            self.model.record_moments(&zb.moments);
        }
        Ok(tape.value(loss).item())
    }
}

pub fn train_graphcl(corpus: &[Graph], encoder: &EncoderConfig, config: &PretrainConfig) -> Result<Pretrained> {
    let graphs = strip(corpus)?;
    let mut trainer = GraphclTrainer::new(encoder, config)?;
    let mut log = TrainLog {
        seed: config.seed,
        composition: composition(corpus),
        epochs: Vec::new(),
    };
    for epoch in 0..config.epochs {
        let start = Instant::now();
        let mut losses = Vec::new();
        for idx in epoch_batches(graphs.len(), config.batch_size, &mut trainer.rng) {
            losses.push(trainer.step(&gather(&graphs, &idx))? as f64);
        }
        log.epochs.push(EpochRecord {
            epoch,
            loss: mean(&losses),
            keep_prob: None,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(Pretrained {
        model: trainer.into_model(),
        view: None,
        log,
    })
}

/// Dispatches on `config.method`.
pub fn pretrain(corpus: &[Graph], encoder: &EncoderConfig, config: &PretrainConfig) -> Result<Pretrained> {
    match config.method {
        Method::Adgcl => train_adgcl(corpus, encoder, config),
        Method::GraphclEdge | Method::GraphclNode => train_graphcl(corpus, encoder, config),
    }
}
