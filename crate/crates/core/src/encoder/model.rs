use crate::error::{Error, Result};
use crate::graphs::GraphBatch;
use crate::numerics::{BatchMoments, Gradients, NamedTensor, NormMode, ParamStore, Tape, Tensor, Var};
use crate::rng::{seeded, Rng};

use super::heads::load_into;
use super::{EncoderConfig, GinStack, InputHead, InputKind, OutputHead, OutputKind, Readout};

/// Which parameter groups receive gradients when a model is bound to a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Trainable {
    pub input: bool,
    pub encoder: bool,
    pub output: bool,
}

impl Trainable {
    pub const ALL: Trainable = Trainable {
        input: true,
        encoder: true,
        output: true,
    };
    pub const NONE: Trainable = Trainable {
        input: false,
        encoder: false,
        output: false,
    };
    /// Everything except the GIN stack.
    pub const HEADS: Trainable = Trainable {
        input: true,
        encoder: false,
        output: true,
    };
}

/// Tape handles of every model parameter, in store order.
#[derive(Clone, Debug)]
pub struct BoundModel {
    input: Vec<Var>,
    gin: Vec<Var>,
    output: Vec<Var>,
    trainable: Trainable,
}

/// Tape handles produced by one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardOutput {
    /// `N×h` node embeddings after the last GIN layer.
    pub nodes: Var,
    /// `B×h` readout.
    pub graphs: Var,
    /// Output head applied to the readout, for graph-level heads.
    pub output: Option<Var>,
    /// Batch moments of each normalization layer (training mode only).
    pub moments: Vec<BatchMoments>,
}

/// Plain-value results of [`Model::embed`].
#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    pub nodes: Tensor,
    pub graphs: Tensor,
    pub output: Option<Tensor>,
}

/// Input head, GIN stack and output head.
///
/// Parameters are enumerated input head first, then the stack, then the
/// output head; within each part in construction order.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: EncoderConfig,
    input: InputHead,
    gin: GinStack,
    output: OutputHead,
}

/// A model with a projection head of `config.projection_dim`.
pub fn build_model(config: &EncoderConfig, input: InputKind, seed: u64) -> Result<Model> {
    Model::new(
        config,
        input,
        OutputKind::Projection {
            dim: config.projection_dim,
        },
        seed,
    )
}

impl Model {
    /// Initializes all parts from one stream seeded by `seed`.
    pub fn new(config: &EncoderConfig, input: InputKind, output: OutputKind, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded(seed);
        Self::with_rng(config, input, output, &mut rng)
    }

    pub fn with_rng(config: &EncoderConfig, input: InputKind, output: OutputKind, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let input = InputHead::new(input, config.hidden_dim, rng)?;
        let gin = GinStack::new(config, rng)?;
        let output = OutputHead::new(output, config.hidden_dim, rng)?;
        Ok(Self {
            config: config.clone(),
            input,
            gin,
            output,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn input_head(&self) -> &InputHead {
        &self.input
    }

    pub fn output_head(&self) -> &OutputHead {
        &self.output
    }

    pub fn output_head_mut(&mut self) -> &mut OutputHead {
        &mut self.output
    }

    pub fn gin(&self) -> &GinStack {
        &self.gin
    }

    pub fn gin_mut(&mut self) -> &mut GinStack {
        &mut self.gin
    }

    /// Replaces the input head and returns the previous one. The GIN stack
    /// and output head are untouched.
    pub fn swap_input_head(&mut self, head: InputHead) -> Result<InputHead> {
        if head.hidden() != self.config.hidden_dim {
            return Err(Error::HeadMismatch(format!(
                "input head produces width {}, encoder expects {}",
                head.hidden(),
                self.config.hidden_dim
            )));
        }
        Ok(std::mem::replace(&mut self.input, head))
    }

    /// Replaces the output head and returns the previous one.
    pub fn swap_output_head(&mut self, head: OutputHead) -> Result<OutputHead> {
        if head.hidden() != self.config.hidden_dim {
            return Err(Error::HeadMismatch(format!(
                "output head consumes width {}, encoder produces {}",
                head.hidden(),
                self.config.hidden_dim
            )));
        }
        Ok(std::mem::replace(&mut self.output, head))
    }

    fn stores(&self) -> [&ParamStore; 3] {
        [self.input.params(), self.gin.params(), self.output.params()]
    }

    /// Every parameter with its name, in enumeration order.
    pub fn named_params(&self) -> impl Iterator<Item = &NamedTensor> {
        self.stores().into_iter().flat_map(ParamStore::iter)
    }

    pub fn parameter_count(&self) -> usize {
        self.stores().iter().map(|s| s.scalar_count()).sum()
    }

    /// Overwrites every parameter from `loaded`, which must list the same
    /// names and shapes in enumeration order.
    pub fn load_params(&mut self, loaded: &[NamedTensor]) -> Result<()> {
        let (a, b) = (self.input.params().len(), self.gin.params().len());
        if loaded.len() != a + b + self.output.params().len() {
            return Err(Error::Checkpoint(format!(
                "model has {} parameter arrays, found {}",
                a + b + self.output.params().len(),
                loaded.len()
            )));
        }
        load_into(self.input.params_mut(), &loaded[..a], "input head")?;
        load_into(self.gin.params_mut(), &loaded[a..a + b], "encoder")?;
        load_into(self.output.params_mut(), &loaded[a + b..], "output head")
    }

    /// Tensors of the groups selected by `which`, in enumeration order.
    pub fn param_tensors(&self, which: Trainable) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for (on, store) in [which.input, which.encoder, which.output]
            .into_iter()
            .zip(self.stores())
        {
            if on {
                out.extend(store.tensors());
            }
        }
        out
    }

    /// Mutable view matching [`param_tensors`](Self::param_tensors).
    pub fn params_mut(&mut self, which: Trainable) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        if which.input {
            out.extend(self.input.params_mut().tensors_mut());
        }
        if which.encoder {
            out.extend(self.gin.params_mut().tensors_mut());
        }
        if which.output {
            out.extend(self.output.params_mut().tensors_mut());
        }
        out
    }

    /// Places all parameters on `tape`; groups in `trainable` are tracked.
    pub fn bind(&self, tape: &mut Tape, trainable: Trainable) -> BoundModel {
        BoundModel {
            input: self.input.params().bind(tape, trainable.input),
            gin: self.gin.params().bind(tape, trainable.encoder),
            output: self.output.params().bind(tape, trainable.output),
            trainable,
        }
    }

    /// Gradients of the tracked groups, ordered like
    /// [`params_mut`](Self::params_mut) with the bound mask.
    pub fn grads(&self, bound: &BoundModel, grads: &Gradients) -> Vec<Tensor> {
        let mut out = Vec::new();
        let t = bound.trainable;
        if t.input {
            out.extend(self.input.params().collect_grads(&bound.input, grads));
        }
        if t.encoder {
            out.extend(self.gin.params().collect_grads(&bound.gin, grads));
        }
        if t.output {
            out.extend(self.output.params().collect_grads(&bound.output, grads));
        }
        out
    }

    /// Encodes a batch. `edge_weights`, when given, holds one weight per
    /// directed edge and scales each neighbor message.
    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &BoundModel,
        batch: &GraphBatch,
        edge_weights: Option<Var>,
        mode: NormMode,
    ) -> Result<ForwardOutput> {
        if let Some(w) = edge_weights {
            if tape.value(w).len() != batch.total_edges() {
                return Err(Error::shape("edge_weights", tape.shape(w), &[batch.total_edges()]));
            }
        }
        let (h0, edges) = self.input.apply(tape, &bound.input, batch)?;
        let (nodes, moments) = self.gin.apply(tape, &bound.gin, batch, h0, edges, edge_weights, mode)?;
        let graphs = readout(tape, nodes, batch, self.config.readout)?;
        let output = if self.output.kind().is_graph_level() {
            Some(self.output.apply(tape, &bound.output, graphs)?)
        } else {
            None
        };
        Ok(ForwardOutput {
            nodes,
            graphs,
            output,
            moments,
        })
    }

    /// Applies the output head to arbitrary rows, e.g. selected node
    /// embeddings or concatenated endpoint pairs.
    pub fn apply_output(&self, tape: &mut Tape, bound: &BoundModel, x: Var) -> Result<Var> {
        self.output.apply(tape, &bound.output, x)
    }

    pub fn record_moments(&mut self, moments: &[BatchMoments]) {
        self.gin.record_moments(moments);
    }

    /// Forward pass without gradients.
    pub fn embed(&self, batch: &GraphBatch, mode: NormMode) -> Result<Embeddings> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, Trainable::NONE);
        let out = self.forward(&mut tape, &bound, batch, None, mode)?;
        Ok(Embeddings {
            nodes: tape.value(out.nodes).clone(),
            graphs: tape.value(out.graphs).clone(),
            output: out.output.map(|o| tape.value(o).clone()),
        })
    }
}

/// Per-graph pooling of node rows.
pub(crate) fn readout(tape: &mut Tape, nodes: Var, batch: &GraphBatch, kind: Readout) -> Result<Var> {
    let summed = tape.segment_sum(nodes, batch.node_to_graph(), batch.num_graphs())?;
    match kind {
        Readout::Sum => Ok(summed),
        Readout::Mean => {
            let inv: Vec<f32> = batch.graph_sizes().iter().map(|&s| 1.0 / s.max(1) as f32).collect();
            let inv = tape.constant(Tensor::vector(inv));
            tape.mul_col(summed, inv)
        }
    }
}
