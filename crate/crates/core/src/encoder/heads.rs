use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::GraphBatch;
use crate::numerics::{NamedTensor, ParamStore, Tape, Tensor, Var};
use crate::rng::Rng;

use super::layers::Mlp;

/// Which input head a model carries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputKind {
    /// One learned vector shared by every node. Features are ignored.
    Constant,
    /// Three-layer MLPs from node (and optionally edge) features.
    FeatureMlp { node_dim: usize, edge_dim: Option<usize> },
}

#[derive(Clone, Debug, PartialEq)]
enum InputLayout {
    Constant { vector: usize },
    Features { node: Mlp, edge: Option<Mlp> },
}

/// Maps a batch to initial node vectors and, when edge features are used,
/// per-directed-edge vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct InputHead {
    kind: InputKind,
    hidden: usize,
    layout: InputLayout,
    params: ParamStore,
}

impl InputHead {
    pub fn new(kind: InputKind, hidden: usize, rng: &mut Rng) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::Config(vec!["input head hidden_dim must be at least 1".into()]));
        }
        let mut params = ParamStore::new();
        let layout = match &kind {
            InputKind::Constant => {
                let vector = params.push("input.constant", super::layers::glorot(rng, 1, hidden));
                InputLayout::Constant { vector }
            }
            InputKind::FeatureMlp { node_dim, edge_dim } => {
                if *node_dim == 0 || *edge_dim == Some(0) {
                    return Err(Error::Config(vec!["feature dimensions must be at least 1".into()]));
                }
                let node = Mlp::new(&mut params, "input.node", &[*node_dim, hidden, hidden, hidden], rng);
                let edge = edge_dim.map(|d| Mlp::new(&mut params, "input.edge", &[d, hidden, hidden, hidden], rng));
                InputLayout::Features { node, edge }
            }
        };
        Ok(Self {
            kind,
            hidden,
            layout,
            params,
        })
    }

    pub fn kind(&self) -> &InputKind {
        &self.kind
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Node vectors `N×h` and optional edge vectors `M×h`.
    pub(crate) fn apply(&self, tape: &mut Tape, vars: &[Var], batch: &GraphBatch) -> Result<(Var, Option<Var>)> {
        match &self.layout {
            InputLayout::Constant { vector } => {
                let nodes = tape.gather_rows(vars[*vector], &vec![0; batch.total_nodes()])?;
                Ok((nodes, None))
            }
            InputLayout::Features { node, edge } => {
                let InputKind::FeatureMlp { node_dim, edge_dim } = &self.kind else {
                    unreachable!("layout follows kind")
                };
                let x = feature_matrix(batch.node_feats(), *node_dim, "node")?;
                let x = tape.constant(x.clone());
                let nodes = node.apply(tape, vars, x)?;
                let edges = match (edge, edge_dim) {
                    (Some(mlp), Some(d)) => {
                        let e = feature_matrix(batch.edge_feats(), *d, "edge")?;
                        let e = tape.constant(e.clone());
                        Some(mlp.apply(tape, vars, e)?)
                    }
                    _ => None,
                };
                Ok((nodes, edges))
            }
        }
    }
}

fn feature_matrix<'a>(feats: Option<&'a Tensor>, dim: usize, what: &str) -> Result<&'a Tensor> {
    let Some(f) = feats else {
        return Err(Error::HeadMismatch(format!(
            "feature input head needs {what} features but the batch has none"
        )));
    };
    if f.cols() != dim {
        return Err(Error::HeadMismatch(format!(
            "feature input head expects {what} feature width {dim}, batch has {}",
            f.cols()
        )));
    }
    Ok(f)
}

/// Which output head a model carries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutputKind {
    /// Raw node embeddings only.
    None,
    /// Two-layer projection used by the contrastive objective.
    Projection { dim: usize },
    /// Two-layer MLP to one output per graph.
    GraphTask,
    /// One linear layer to class logits per node.
    NodeClass { classes: usize },
    /// One linear layer on concatenated endpoint embeddings.
    EdgePair,
}

impl OutputKind {
    /// Whether [`Model::forward`](super::Model::forward) applies the head to
    /// the graph readout.
    pub fn is_graph_level(&self) -> bool {
        matches!(self, OutputKind::Projection { .. } | OutputKind::GraphTask)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputHead {
    kind: OutputKind,
    hidden: usize,
    mlp: Option<Mlp>,
    params: ParamStore,
}

impl OutputHead {
    pub fn new(kind: OutputKind, hidden: usize, rng: &mut Rng) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::Config(vec!["output head hidden_dim must be at least 1".into()]));
        }
        let dims = match &kind {
            OutputKind::None => None,
            OutputKind::Projection { dim } => Some(vec![hidden, hidden, *dim]),
            OutputKind::GraphTask => Some(vec![hidden, hidden, 1]),
            OutputKind::NodeClass { classes } => Some(vec![hidden, *classes]),
            OutputKind::EdgePair => Some(vec![2 * hidden, 1]),
        };
        if dims.as_ref().is_some_and(|d| d.contains(&0)) {
            return Err(Error::Config(vec!["output head dimensions must be at least 1".into()]));
        }
        let mut params = ParamStore::new();
        let mlp = dims.map(|d| Mlp::new(&mut params, "output", &d, rng));
        Ok(Self {
            kind,
            hidden,
            mlp,
            params,
        })
    }

    pub fn kind(&self) -> &OutputKind {
        &self.kind
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub(crate) fn apply(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        match &self.mlp {
            Some(mlp) => mlp.apply(tape, vars, x),
            None => Err(Error::HeadMismatch("output head 'none' has no layers to apply".into())),
        }
    }
}

/// Replaces the tensors of `store` with `loaded`, which must match it name
/// for name and shape for shape.
pub(crate) fn load_into(store: &mut ParamStore, loaded: &[NamedTensor], what: &str) -> Result<()> {
    if store.len() != loaded.len() {
        return Err(Error::Checkpoint(format!(
            "{what}: expected {} parameter arrays, found {}",
            store.len(),
            loaded.len()
        )));
    }
    for (i, entry) in loaded.iter().enumerate() {
        let current = store.iter().nth(i).expect("index in range");
        if current.name != entry.name || current.tensor.shape() != entry.tensor.shape() {
            return Err(Error::Checkpoint(format!(
                "{what}: parameter {i} is {} {:?}, found {} {:?}",
                current.name,
                current.tensor.shape(),
                entry.name,
                entry.tensor.shape()
            )));
        }
    }
    for (i, entry) in loaded.iter().enumerate() {
        *store.get_mut(i) = entry.tensor.clone();
    }
    Ok(())
}
