use crate::error::{Error, Result};
use crate::graphs::GraphBatch;
use crate::numerics::{BatchMoments, BatchNormStats, NormMode, ParamStore, Tape, Tensor, Var};
use crate::rng::Rng;

use super::layers::Linear;
use super::EncoderConfig;

#[derive(Clone, Debug, PartialEq)]
struct GinLayer {
    first: Linear,
    /// Positions of gamma and beta.
    norm: Option<(usize, usize)>,
    second: Linear,
    epsilon: Option<usize>,
}

/// The message-passing encoder stack,
/// `h' = MLP((1+ε)·h + Σ_u w_uv·m_u)` per layer, with
/// `MLP = linear → [batch norm] → relu → linear` and ReLU between layers.
#[derive(Clone, Debug, PartialEq)]
pub struct GinStack {
    hidden: usize,
    layers: Vec<GinLayer>,
    params: ParamStore,
    norm_stats: Vec<BatchNormStats>,
}

impl GinStack {
    pub fn new(config: &EncoderConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_dim;
        let mut params = ParamStore::new();
        let mut layers = Vec::with_capacity(config.num_layers);
        let mut norm_stats = Vec::new();
        for k in 0..config.num_layers {
            let first = Linear::new(&mut params, &format!("gin.{k}.mlp.0"), h, h, rng);
            let norm = config.batch_norm.then(|| {
                norm_stats.push(BatchNormStats::new(h));
                (
                    params.push(format!("gin.{k}.bn.gamma"), Tensor::ones(&[h])),
                    params.push(format!("gin.{k}.bn.beta"), Tensor::zeros(&[h])),
                )
            });
            let second = Linear::new(&mut params, &format!("gin.{k}.mlp.1"), h, h, rng);
            let epsilon = config
                .epsilon_learnable
                .then(|| params.push(format!("gin.{k}.eps"), Tensor::zeros(&[1])));
            layers.push(GinLayer {
                first,
                norm,
                second,
                epsilon,
            });
        }
        Ok(Self {
            hidden: h,
            layers,
            params,
            norm_stats,
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Running statistics, one per layer when batch norm is on.
    pub fn norm_stats(&self) -> &[BatchNormStats] {
        &self.norm_stats
    }

    pub fn set_norm_stats(&mut self, stats: Vec<BatchNormStats>) -> Result<()> {
        if stats.len() != self.norm_stats.len() || stats.iter().any(|s| s.channels() != self.hidden) {
            return Err(Error::Checkpoint(format!(
                "expected {} batch-norm buffers of width {}",
                self.norm_stats.len(),
                self.hidden
            )));
        }
        self.norm_stats = stats;
        Ok(())
    }

    /// Folds training-mode batch moments into the running statistics.
    pub fn record_moments(&mut self, moments: &[BatchMoments]) {
        for (stats, m) in self.norm_stats.iter_mut().zip(moments) {
            stats.update(m);
        }
    }

    /// Node embeddings after the last layer, plus the batch moments of every
    /// normalization layer when `mode` is training.
    pub(crate) fn apply(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        batch: &GraphBatch,
        mut h: Var,
        edge_embeddings: Option<Var>,
        edge_weights: Option<Var>,
        mode: NormMode,
    ) -> Result<(Var, Vec<BatchMoments>)> {
        let n = batch.total_nodes();
        let mut moments = Vec::new();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut messages = tape.gather_rows(h, batch.edge_src())?;
            if let Some(e) = edge_embeddings {
                messages = tape.add(messages, e)?;
                messages = tape.relu(messages);
            }
            if let Some(w) = edge_weights {
                messages = tape.mul_col(messages, w)?;
            }
            let aggregated = tape.segment_sum(messages, batch.edge_dst(), n)?;
            let own = match layer.epsilon {
                Some(eps) => {
                    let scaled = tape.mul_scalar(h, vars[eps])?;
                    tape.add(h, scaled)?
                }
                None => h,
            };
            let mut z = tape.add(own, aggregated)?;
            z = layer.first.apply(tape, vars, z)?;
            if let Some((gamma, beta)) = layer.norm {
                let stats = &self.norm_stats[k];
                let (normed, m) = tape.batch_norm(z, vars[gamma], vars[beta], stats, mode)?;
                z = normed;
                moments.extend(m);
            }
            z = tape.relu(z);
            z = layer.second.apply(tape, vars, z)?;
            if k < last {
                z = tape.relu(z);
            }
            h = z;
        }
        Ok((h, moments))
    }
}
