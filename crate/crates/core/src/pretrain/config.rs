use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Adversarial learned edge dropping.
    Adgcl,
    /// Two random edge-dropped views.
    GraphclEdge,
    /// Two random node-dropped views.
    GraphclNode,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adgcl" => Ok(Self::Adgcl),
            "graphcl_edge" => Ok(Self::GraphclEdge),
            "graphcl_node" => Ok(Self::GraphclNode),
            other => Err(Error::Config(vec![format!(
                "unknown pre-training method '{other}' (expected adgcl, graphcl_edge or graphcl_node)"
            )])),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub method: Method,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_encoder: f32,
    pub lr_view: f32,
    /// NT-Xent temperature τ.
    pub temperature: f32,
    /// Random drop probability for the GraphCL views.
    pub drop_prob: f64,
    /// Weight of the drop-ratio penalty in the view learner's loss.
    pub reg_weight: f32,
    /// Temperature of the relaxed Bernoulli edge weights.
    pub concrete_temperature: f32,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Adgcl,
            epochs: 100,
            batch_size: 512,
            lr_encoder: 1e-3,
            lr_view: 1e-3,
            temperature: 0.2,
            drop_prob: 0.2,
            reg_weight: 0.2,
            concrete_temperature: 1.0,
            seed: 0,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.epochs == 0 {
            problems.push("pretrain.epochs must be at least 1".to_string());
        }
        if self.batch_size < 2 {
            problems.push(format!(
                "pretrain.batch_size must be at least 2 (in-batch negatives), got {}",
                self.batch_size
            ));
        }
        for (name, lr) in [("lr_encoder", self.lr_encoder), ("lr_view", self.lr_view)] {
            if !(lr > 0.0) {
                problems.push(format!("pretrain.{name} must be positive, got {lr}"));
            }
        }
        if !(self.temperature > 0.0) {
            problems.push(format!(
                "pretrain.temperature must be positive, got {}",
                self.temperature
            ));
        }
        if !(0.0..1.0).contains(&self.drop_prob) {
            problems.push(format!("pretrain.drop_prob must be in [0,1), got {}", self.drop_prob));
        }
        if !(self.reg_weight >= 0.0) {
            problems.push(format!(
                "pretrain.reg_weight must be non-negative, got {}",
                self.reg_weight
            ));
        }
        if !(self.concrete_temperature > 0.0) {
            problems.push(format!(
                "pretrain.concrete_temperature must be positive, got {}",
                self.concrete_temperature
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}
