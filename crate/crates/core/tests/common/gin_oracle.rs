//! f64 mirror of the encoder forward pass, reading parameters by name.

use std::collections::HashMap;

use topo_core::encoder::{EncoderConfig, InputKind, Model, OutputKind, Readout, ViewLearner};
use topo_core::graphs::GraphBatch;
use topo_core::numerics::NamedTensor;

use super::oracles::{self, M};

/// Name → (position, shape) of every parameter.
pub struct Layout {
    index: HashMap<String, (usize, Vec<usize>)>,
    pub config: EncoderConfig,
    pub input: InputKind,
    pub output: OutputKind,
}

impl Layout {
    pub fn new<'a>(
        params: impl Iterator<Item = &'a NamedTensor>,
        config: &EncoderConfig,
        input: InputKind,
        output: OutputKind,
    ) -> Self {
        let index = params
            .enumerate()
            .map(|(i, p)| (p.name.clone(), (i, p.tensor.shape().to_vec())))
            .collect();
        Self {
            index,
            config: config.clone(),
            input,
            output,
        }
    }

    pub fn of_model(model: &Model) -> Self {
        Self::new(
            model.named_params(),
            model.config(),
            model.input_head().kind().clone(),
            model.output_head().kind().clone(),
        )
    }

    pub fn of_view(view: &ViewLearner, config: &EncoderConfig) -> Self {
        Self::new(view.named_params(), config, InputKind::Constant, OutputKind::None)
    }

    fn get<'p>(&self, p: &'p [Vec<f64>], name: &str) -> &'p [f64] {
        &p[self.index.get(name).unwrap_or_else(|| panic!("no parameter {name}")).0]
    }

    fn has(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    fn linear(&self, p: &[Vec<f64>], prefix: &str, x: &M) -> M {
        let w = format!("{prefix}.weight");
        let out = self.index[&w].1[1];
        oracles::linear(x, self.get(p, &w), self.get(p, &format!("{prefix}.bias")), out)
    }

    pub fn mlp(&self, p: &[Vec<f64>], prefix: &str, x: &M) -> M {
        let mut x = x.clone();
        let mut i = 0;
        while self.has(&format!("{prefix}.{i}.weight")) {
            if i > 0 {
                x = oracles::relu(&x);
            }
            x = self.linear(p, &format!("{prefix}.{i}"), &x);
            i += 1;
        }
        x
    }

    /// Node embeddings after the stack. Batch norm uses batch statistics.
    pub fn nodes(&self, p: &[Vec<f64>], batch: &GraphBatch, weights: Option<&[f64]>) -> M {
        let n = batch.total_nodes();
        let h = self.config.hidden_dim;
        let (mut x, edges) = match &self.input {
            InputKind::Constant => {
                let c = self.get(p, "input.constant");
                (M::new(n, h, (0..n).flat_map(|_| c.iter().copied()).collect()), None)
            }
            InputKind::FeatureMlp { edge_dim, .. } => {
                let nf = batch.node_feats().unwrap();
                let xf = M::new(nf.rows(), nf.cols(), nf.data().iter().map(|&v| v as f64).collect());
                let e = edge_dim.map(|_| {
                    let ef = batch.edge_feats().unwrap();
                    let ef = M::new(ef.rows(), ef.cols(), ef.data().iter().map(|&v| v as f64).collect());
                    self.mlp(p, "input.edge", &ef)
                });
                (self.mlp(p, "input.node", &xf), e)
            }
        };
        for k in 0..self.config.num_layers {
            let mut msg = oracles::gather(&x, batch.edge_src());
            if let Some(e) = &edges {
                msg = oracles::relu(&msg.zip(e, |a, b| a + b));
            }
            if let Some(w) = weights {
                for (r, &wr) in w.iter().enumerate() {
                    for c in 0..h {
                        msg.set(r, c, msg.at(r, c) * wr);
                    }
                }
            }
            let agg = oracles::segment_sum(&msg, batch.edge_dst(), n);
            let eps_name = format!("gin.{k}.eps");
            let own = if self.has(&eps_name) {
                let e = self.get(p, &eps_name)[0];
                x.map(|v| v * (1.0 + e))
            } else {
                x.clone()
            };
            let mut z = self.linear(p, &format!("gin.{k}.mlp.0"), &own.zip(&agg, |a, b| a + b));
            let gamma = format!("gin.{k}.bn.gamma");
            if self.has(&gamma) {
                z = oracles::batch_norm_train(&z, self.get(p, &gamma), self.get(p, &format!("gin.{k}.bn.beta")), 1e-5);
            }
            z = self.linear(p, &format!("gin.{k}.mlp.1"), &oracles::relu(&z));
            if k + 1 < self.config.num_layers {
                z = oracles::relu(&z);
            }
            x = z;
        }
        x
    }

    pub fn readout(&self, nodes: &M, batch: &GraphBatch) -> M {
        let mut g = oracles::segment_sum(nodes, batch.node_to_graph(), batch.num_graphs());
        if self.config.readout == Readout::Mean {
            let sizes = batch.graph_sizes();
            for (i, &s) in sizes.iter().enumerate() {
                for c in 0..g.c {
                    g.set(i, c, g.at(i, c) / s as f64);
                }
            }
        }
        g
    }

    /// Readout followed by the output head when it is graph-level.
    pub fn graphs(&self, p: &[Vec<f64>], batch: &GraphBatch, weights: Option<&[f64]>) -> M {
        let g = self.readout(&self.nodes(p, batch, weights), batch);
        if self.output.is_graph_level() {
            self.mlp(p, "output", &g)
        } else {
            g
        }
    }

    /// Symmetrized edge logits of a view learner.
    pub fn view_logits(&self, p: &[Vec<f64>], batch: &GraphBatch) -> Vec<f64> {
        let h = self.nodes(p, batch, None);
        let pair = oracles::concat_cols(
            &oracles::gather(&h, batch.edge_src()),
            &oracles::gather(&h, batch.edge_dst()),
        );
        let raw = self.mlp(p, "scorer", &pair).d;
        let rev = batch.reverse_edge_index();
        (0..raw.len()).map(|e| 0.5 * (raw[e] + raw[rev[e]])).collect()
    }
}
