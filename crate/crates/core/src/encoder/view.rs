use crate::error::Result;
use crate::graphs::GraphBatch;
use crate::numerics::{BatchMoments, Gradients, NamedTensor, NormMode, ParamStore, Tape, Tensor, Var};
use crate::rng::{seeded, Rng};

use super::heads::load_into;
use super::layers::Mlp;
use super::{EncoderConfig, GinStack, InputHead, InputKind};

/// Edge-scoring network for learned augmentations: a constant input head, a
/// GIN stack with its own parameters, and a two-layer scorer on
/// `[h_u; h_v]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewLearner {
    input: InputHead,
    gin: GinStack,
    scorer: Mlp,
    scorer_params: ParamStore,
}

#[derive(Clone, Debug)]
pub struct BoundView {
    input: Vec<Var>,
    gin: Vec<Var>,
    scorer: Vec<Var>,
    trainable: bool,
}

impl ViewLearner {
    pub fn new(config: &EncoderConfig, seed: u64) -> Result<Self> {
        Self::with_rng(config, &mut seeded(seed))
    }

    pub fn with_rng(config: &EncoderConfig, rng: &mut Rng) -> Result<Self> {
        let h = config.hidden_dim;
        let input = InputHead::new(InputKind::Constant, h, rng)?;
        let gin = GinStack::new(config, rng)?;
        let mut scorer_params = ParamStore::new();
        let scorer = Mlp::new(&mut scorer_params, "scorer", &[2 * h, h, 1], rng);
        Ok(Self {
            input,
            gin,
            scorer,
            scorer_params,
        })
    }

    pub fn gin(&self) -> &GinStack {
        &self.gin
    }

    pub fn gin_mut(&mut self) -> &mut GinStack {
        &mut self.gin
    }

    fn stores(&self) -> [&ParamStore; 3] {
        [self.input.params(), self.gin.params(), &self.scorer_params]
    }

    pub fn named_params(&self) -> impl Iterator<Item = &NamedTensor> {
        self.stores().into_iter().flat_map(ParamStore::iter)
    }

    pub fn parameter_count(&self) -> usize {
        self.stores().iter().map(|s| s.scalar_count()).sum()
    }

    pub fn param_tensors(&self) -> Vec<&Tensor> {
        self.stores().into_iter().flat_map(ParamStore::tensors).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = self.input.params_mut().tensors_mut().collect();
        out.extend(self.gin.params_mut().tensors_mut());
        out.extend(self.scorer_params.tensors_mut());
        out
    }

    pub fn load_params(&mut self, loaded: &[NamedTensor]) -> Result<()> {
        let (a, b) = (self.input.params().len(), self.gin.params().len());
        if loaded.len() != a + b + self.scorer_params.len() {
            return Err(crate::Error::Checkpoint(format!(
                "view learner has {} parameter arrays, found {}",
                a + b + self.scorer_params.len(),
                loaded.len()
            )));
        }
        load_into(self.input.params_mut(), &loaded[..a], "view input head")?;
        load_into(self.gin.params_mut(), &loaded[a..a + b], "view encoder")?;
        load_into(&mut self.scorer_params, &loaded[a + b..], "view scorer")
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> BoundView {
        BoundView {
            input: self.input.params().bind(tape, trainable),
            gin: self.gin.params().bind(tape, trainable),
            scorer: self.scorer_params.bind(tape, trainable),
            trainable,
        }
    }

    /// Gradients ordered like [`params_mut`](Self::params_mut). Empty when
    /// the view was bound untracked.
    pub fn grads(&self, bound: &BoundView, grads: &Gradients) -> Vec<Tensor> {
        if !bound.trainable {
            return Vec::new();
        }
        let mut out = self.input.params().collect_grads(&bound.input, grads);
        out.extend(self.gin.params().collect_grads(&bound.gin, grads));
        out.extend(self.scorer_params.collect_grads(&bound.scorer, grads));
        out
    }

    /// One logit per directed edge, length `M`. The two orientations of an
    /// undirected edge receive the mean of their raw scores.
    pub fn logits(
        &self,
        tape: &mut Tape,
        bound: &BoundView,
        batch: &GraphBatch,
        mode: NormMode,
    ) -> Result<(Var, Vec<BatchMoments>)> {
        let (h0, _) = self.input.apply(tape, &bound.input, batch)?;
        let (h, moments) = self.gin.apply(tape, &bound.gin, batch, h0, None, None, mode)?;
        let hu = tape.gather_rows(h, batch.edge_src())?;
        let hv = tape.gather_rows(h, batch.edge_dst())?;
        let pair = tape.concat_cols(hu, hv)?;
        let raw = self.scorer.apply(tape, &bound.scorer, pair)?;
        let raw = tape.reshape(raw, &[batch.total_edges()])?;
        let reversed = tape.gather_rows(raw, &batch.reverse_edge_index())?;
        let both = tape.add(raw, reversed)?;
        Ok((tape.scale(both, 0.5), moments))
    }

    pub fn record_moments(&mut self, moments: &[BatchMoments]) {
        self.gin.record_moments(moments);
    }
}
