use crate::checkpoint::Checkpoint;
use crate::encoder::{BoundModel, EncoderConfig, InputHead, InputKind, Model, OutputHead, OutputKind, Trainable};
use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::numerics::{AdamConfig, AdamState, BatchMoments, NormMode, Tape, Var};
use crate::rng::{derive_seed, seeded};

use super::task::{encoder_hash, FinetuneConfig};

/// Where the encoder of each run comes from.
#[derive(Clone, Copy, Debug)]
pub enum ModelSource<'a> {
    Pretrained(&'a Checkpoint),
    /// Random initialization with this architecture: the baseline.
    Fresh(&'a EncoderConfig),
}

impl ModelSource<'_> {
    pub fn encoder_config(&self) -> &EncoderConfig {
        match self {
            ModelSource::Pretrained(c) => c.model.config(),
            ModelSource::Fresh(c) => c,
        }
    }

    pub fn encoder_hash(&self) -> String {
        encoder_hash(self.encoder_config())
    }

    /// Checkpoint id, or `none`.
    pub fn id(&self) -> Result<String> {
        match self {
            ModelSource::Pretrained(c) => c.id(),
            ModelSource::Fresh(_) => Ok("none".into()),
        }
    }

    pub(crate) fn instantiate(&self, seed: u64) -> Result<Model> {
        match self {
            ModelSource::Pretrained(c) => Ok(c.model.clone()),
            ModelSource::Fresh(config) => Model::new(config, InputKind::Constant, OutputKind::None, seed),
        }
    }
}

/// Input-head kind matching the features every graph carries.
pub(crate) fn feature_kind(graphs: &[&Graph]) -> Result<InputKind> {
    let node_dim = graphs
        .iter()
        .map(|g| g.node_feats().map(|f| f.cols()))
        .reduce(|a, b| if a == b { a } else { None })
        .flatten()
        .ok_or_else(|| Error::HeadMismatch("feature head needs node features of one width on every graph".into()))?;
    let edge_dim = graphs
        .iter()
        .map(|g| g.edge_feats().map(|f| f.cols()))
        .reduce(|a, b| if a == b { a } else { None })
        .flatten();
    Ok(InputKind::FeatureMlp { node_dim, edge_dim })
}

/// Model for run `run`: source weights, the task's output head and, with
/// features, a fresh feature input head.
pub(crate) fn prepare_model(
    source: &ModelSource,
    feature_graphs: Option<&[&Graph]>,
    output: OutputKind,
    run_seed: u64,
) -> Result<Model> {
    let mut model = source.instantiate(derive_seed(run_seed, 1))?;
    let hidden = model.gin().hidden();
    let mut rng = seeded(derive_seed(run_seed, 2));
    match feature_graphs {
        Some(graphs) => {
            let kind = feature_kind(graphs)?;
            model.swap_input_head(InputHead::new(kind, hidden, &mut rng)?)?;
        }
        None => {
            if *model.input_head().kind() != InputKind::Constant {
                model.swap_input_head(InputHead::new(InputKind::Constant, hidden, &mut rng)?)?;
            }
        }
    }
    model.swap_output_head(OutputHead::new(output, hidden, &mut rng)?)?;
    Ok(model)
}

/// A model with its optimizer. A frozen encoder keeps the stack's weights
/// and running statistics fixed and normalizes with them.
pub(crate) struct Learner {
    pub model: Model,
    opt: AdamState,
    trainable: Trainable,
    pub mode: NormMode,
}

impl Learner {
    pub fn new(model: Model, cfg: &FinetuneConfig) -> Self {
        let trainable = if cfg.freeze_encoder {
            Trainable::HEADS
        } else {
            Trainable::ALL
        };
        let opt = AdamState::new(AdamConfig::with_lr(cfg.lr), model.param_tensors(trainable));
        Self {
            model,
            opt,
            trainable,
            mode: if cfg.freeze_encoder {
                NormMode::Inference
            } else {
                NormMode::Training
            },
        }
    }

    /// One optimizer step on the loss built by `loss`, which returns the loss
    /// and the moments of each forward pass it made.
    pub fn step(
        &mut self,
        loss: impl FnOnce(&Model, &mut Tape, &BoundModel, NormMode) -> Result<(Var, Vec<BatchMoments>)>,
    ) -> Result<f32> {
        let mut tape = Tape::new();
        let bound = self.model.bind(&mut tape, self.trainable);
        let (l, moments) = loss(&self.model, &mut tape, &bound, self.mode)?;
        let grads = tape.backward(l)?;
        let g = self.model.grads(&bound, &grads);
        self.opt.step(&mut self.model.params_mut(self.trainable), &g)?;
        if self.mode == NormMode::Training {
            self.model.record_moments(&moments);
        }
        Ok(tape.value(l).item())
    }
}

/// Mean binary cross-entropy on logits: `softplus(s) − y·s`.
pub(crate) fn logistic_loss(tape: &mut Tape, logits: Var, labels: &[f32]) -> Result<Var> {
    let shape = tape.shape(logits).to_vec();
    let y = tape.constant(crate::numerics::Tensor::new(shape, labels.to_vec())?);
    let sp = tape.softplus(logits);
    let ys = tape.mul(y, logits)?;
    let l = tape.sub(sp, ys)?;
    Ok(tape.mean(l))
}

/// Mean squared error.
pub(crate) fn squared_loss(tape: &mut Tape, pred: Var, target: &[f32]) -> Result<Var> {
    let shape = tape.shape(pred).to_vec();
    let y = tape.constant(crate::numerics::Tensor::new(shape, target.to_vec())?);
    let d = tape.sub(pred, y)?;
    let sq = tape.mul(d, d)?;
    Ok(tape.mean(sq))
}

/// Mean softmax cross-entropy of `logits` rows against class indices.
pub(crate) fn cross_entropy(tape: &mut Tape, logits: Var, classes: &[usize]) -> Result<Var> {
    let lp = tape.log_softmax_rows(logits);
    let picked = tape.pick_per_row(lp, classes)?;
    let m = tape.mean(picked);
    Ok(tape.scale(m, -1.0))
}
