use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pooling from node embeddings to one vector per graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    Mean,
    Sum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub projection_dim: usize,
    pub readout: Readout,
    pub batch_norm: bool,
    pub epsilon_learnable: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            num_layers: 6,
            hidden_dim: 300,
            projection_dim: 300,
            readout: Readout::Mean,
            batch_norm: true,
            epsilon_learnable: true,
        }
    }
}

impl EncoderConfig {
    /// Checks every field and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.num_layers == 0 {
            problems.push("encoder.num_layers must be at least 1".to_string());
        }
        if self.hidden_dim == 0 {
            problems.push("encoder.hidden_dim must be at least 1".to_string());
        }
        if self.projection_dim == 0 {
            problems.push("encoder.projection_dim must be at least 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    /// Number of scalar parameters of a model with a constant input head and
    /// a projection output head.
    pub fn parameter_count(&self) -> usize {
        let h = self.hidden_dim;
        let per_layer = 2 * (h * h + h) + if self.batch_norm { 2 * h } else { 0 } + usize::from(self.epsilon_learnable);
        let projection = (h * h + h) + (h * self.projection_dim + self.projection_dim);
        h + self.num_layers * per_layer + projection
    }
}
