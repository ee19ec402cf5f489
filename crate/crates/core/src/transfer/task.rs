use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};

use super::metrics::{mean, sample_variance, welch_test, Direction, Metric};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Graph,
    Node,
    Edge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum TaskKind {
    Regression,
    Binary,
    Multiclass { classes: usize },
}

/// What is predicted, at which level, and whether input features are used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub level: Level,
    pub kind: TaskKind,
    #[serde(default)]
    pub with_features: bool,
}

impl TaskSpec {
    pub fn graph_regression(with_features: bool) -> Self {
        Self {
            level: Level::Graph,
            kind: TaskKind::Regression,
            with_features,
        }
    }

    pub fn graph_binary(with_features: bool) -> Self {
        Self {
            level: Level::Graph,
            kind: TaskKind::Binary,
            with_features,
        }
    }

    pub fn node_classes(classes: usize, with_features: bool) -> Self {
        Self {
            level: Level::Node,
            kind: TaskKind::Multiclass { classes },
            with_features,
        }
    }

    pub fn edge_prediction(with_features: bool) -> Self {
        Self {
            level: Level::Edge,
            kind: TaskKind::Binary,
            with_features,
        }
    }

    pub fn metric(&self) -> Metric {
        match (self.level, self.kind) {
            (_, TaskKind::Regression) => Metric::Rmse,
            (Level::Graph, TaskKind::Binary) => Metric::Auroc,
            _ => Metric::Accuracy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = matches!(
            (self.level, self.kind),
            (Level::Graph, TaskKind::Regression | TaskKind::Binary)
                | (Level::Node, TaskKind::Multiclass { classes: 2.. })
                | (Level::Edge, TaskKind::Binary)
        );
        if ok {
            Ok(())
        } else {
            Err(Error::Config(vec![format!(
                "task: {:?} prediction does not support {:?}",
                self.level, self.kind
            )]))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneConfig {
    pub runs: usize,
    pub epochs: usize,
    pub lr: f32,
    pub batch_size: usize,
    /// Fraction of graphs used for training in graph-level tasks.
    pub train_fraction: f64,
    /// Train only the heads, keeping the stack and its normalization
    /// statistics fixed.
    pub freeze_encoder: bool,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            runs: 10,
            epochs: 25,
            lr: 1e-3,
            batch_size: 128,
            train_fraction: 0.8,
            freeze_encoder: false,
            seed: 0,
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.runs < 1 {
            problems.push("finetune.runs must be at least 1".to_string());
        }
        if self.batch_size < 1 {
            problems.push("finetune.batch_size must be at least 1".to_string());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            problems.push(format!("finetune.lr must be a non-negative number, got {}", self.lr));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            problems.push(format!(
                "finetune.train_fraction must be in (0,1), got {}",
                self.train_fraction
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Hex SHA-256 of the canonical JSON of any serializable value. Object keys
/// are sorted, so the hash does not depend on field order.
pub fn canonical_hash<T: Serialize>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("value serializes");
    let text = serde_json::to_string(&value).expect("json value serializes");
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Identifies an encoder architecture so baselines can be matched to the
/// checkpoint they are compared with.
pub fn encoder_hash(config: &EncoderConfig) -> String {
    canonical_hash(config)[..16].to_string()
}

/// Scores of repeated fine-tuning runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub dataset: String,
    pub task: TaskSpec,
    pub metric: Metric,
    pub direction: Direction,
    pub scores: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
    pub config_hash: String,
    pub encoder_hash: String,
    /// Checkpoint id, or `none` for the fresh baseline.
    pub checkpoint_id: String,
}

fn summary(scores: &[f64]) -> (f64, f64) {
    let std = if scores.len() > 1 {
        sample_variance(scores).sqrt()
    } else {
        0.0
    };
    (mean(scores), std)
}

impl RunResult {
    pub fn new(
        dataset: impl Into<String>,
        task: TaskSpec,
        scores: Vec<f64>,
        config_hash: impl Into<String>,
        encoder_hash: impl Into<String>,
        checkpoint_id: impl Into<String>,
    ) -> Self {
        let (mean, std) = summary(&scores);
        let metric = task.metric();
        Self {
            dataset: dataset.into(),
            task,
            metric,
            direction: metric.direction(),
            scores,
            mean,
            std,
            config_hash: config_hash.into(),
            encoder_hash: encoder_hash.into(),
            checkpoint_id: checkpoint_id.into(),
        }
    }

    /// Checks that the stored summary matches the scores.
    pub fn verify(&self) -> Result<()> {
        let (mean, std) = summary(&self.scores);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
        if self.scores.is_empty() || !close(mean, self.mean) || !close(std, self.std) {
            return Err(Error::Contract(format!(
                "{}: stored mean/std {}/{} do not match scores ({mean}/{std})",
                self.dataset, self.mean, self.std
            )));
        }
        if self.metric != self.task.metric() || self.direction != self.metric.direction() {
            return Err(Error::Contract(format!("{}: metric does not match task", self.dataset)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        r.verify()?;
        Ok(r)
    }
}

/// Baseline against candidate on the same dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub dataset: String,
    pub baseline_mean: f64,
    pub model_mean: f64,
    /// Welch t-test p-value; 1 when both samples are identical constants.
    pub p_value: f64,
    /// Candidate strictly better under the metric's direction at `p < alpha`.
    pub better: bool,
}

/// Compares two results for the same dataset and task, refusing mismatched
/// architectures.
pub fn compare(baseline: &RunResult, model: &RunResult, alpha: f64) -> Result<Comparison> {
    if baseline.dataset != model.dataset || baseline.task != model.task {
        return Err(Error::Contract(format!(
            "cannot compare {} ({:?}) with {} ({:?})",
            baseline.dataset, baseline.task, model.dataset, model.task
        )));
    }
    if baseline.encoder_hash != model.encoder_hash {
        return Err(Error::Contract(format!(
            "encoder architectures differ ({} vs {})",
            baseline.encoder_hash, model.encoder_hash
        )));
    }
    let p_value = if baseline.scores == model.scores {
        1.0
    } else {
        welch_test(&model.scores, &baseline.scores)?.p_value
    };
    Ok(Comparison {
        dataset: model.dataset.clone(),
        baseline_mean: baseline.mean,
        model_mean: model.mean,
        p_value,
        better: model.direction.better(model.mean, baseline.mean) && p_value < alpha,
    })
}

pub fn write_comparisons_csv(mut w: impl Write, rows: &[Comparison]) -> Result<()> {
    writeln!(w, "dataset,baseline_mean,model_mean,p_value,better")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.dataset, r.baseline_mean, r.model_mean, r.p_value, r.better
        )?;
    }
    Ok(())
}
