//! Experiment description: one TOML file naming the corpus, every training
//! setting and the downstream tasks.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::graphs::io::load_corpus;
use crate::graphs::Graph;
use crate::pretrain::PretrainConfig;
use crate::transfer::{canonical_hash, FinetuneConfig, TaskSpec};

/// One corpus file, optionally truncated to its first `max_count` graphs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSource {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_count: Option<usize>,
}

/// A downstream dataset and what to predict on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskEntry {
    pub dataset: String,
    pub path: PathBuf,
    #[serde(flatten)]
    pub task: TaskSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub encoder: EncoderConfig,
    pub pretrain: PretrainConfig,
    pub finetune: FinetuneConfig,
    pub corpus: Vec<CorpusSource>,
    pub tasks: Vec<TaskEntry>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            encoder: EncoderConfig::default(),
            pretrain: PretrainConfig::default(),
            finetune: FinetuneConfig::default(),
            corpus: Vec::new(),
            tasks: Vec::new(),
        }
    }
}

fn problems_of(result: Result<()>, into: &mut Vec<String>) {
    match result {
        Ok(()) => {}
        Err(Error::Config(p)) => into.extend(p),
        Err(e) => into.push(e.to_string()),
    }
}

impl ExperimentConfig {
    /// Parses and validates.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    /// Reports every violated field.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        problems_of(self.encoder.validate(), &mut problems);
        problems_of(self.pretrain.validate(), &mut problems);
        problems_of(self.finetune.validate(), &mut problems);
        for (i, c) in self.corpus.iter().enumerate() {
            if c.max_count == Some(0) {
                problems.push(format!("corpus[{i}].max_count must be at least 1"));
            }
        }
        for (i, t) in self.tasks.iter().enumerate() {
            if let Err(Error::Config(p)) = t.task.validate() {
                problems.extend(p.into_iter().map(|m| format!("tasks[{i}] ({}): {m}", t.dataset)));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    /// SHA-256 of the canonical JSON form; independent of key order and of
    /// whether defaults were written out.
    pub fn hash(&self) -> String {
        canonical_hash(self)
    }

    /// Concatenates the corpus files, resolving relative paths against
    /// `base`. Each graph's domain defaults to its file stem.
    pub fn load_corpus(&self, base: impl AsRef<Path>) -> Result<Vec<Graph>> {
        if self.corpus.is_empty() {
            return Err(Error::Config(vec!["corpus must list at least one file".into()]));
        }
        let mut graphs = Vec::new();
        for source in &self.corpus {
            let path = base.as_ref().join(&source.path);
            let mut part = load_corpus(&path)?;
            if let Some(max) = source.max_count {
                part.truncate(max);
            }
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            graphs.extend(part.into_iter().map(|g| {
                if g.domain().is_empty() {
                    g.with_domain(stem.clone())
                } else {
                    g
                }
            }));
        }
        Ok(graphs)
    }
}
