use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean contrastive loss of the encoder updates.
    pub loss: f64,
    /// Mean noise-free keep probability `σ(logit)` (learned views only).
    pub keep_prob: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub seed: u64,
    /// Graph count per source domain.
    pub composition: Vec<(String, usize)>,
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    /// Everything except wall time, for reproducibility comparisons.
    pub fn trajectory(&self) -> Vec<(usize, f64, Option<f64>)> {
        self.epochs.iter().map(|e| (e.epoch, e.loss, e.keep_prob)).collect()
    }

    /// CSV with columns `epoch,loss,keep_prob,seconds`; an empty field when
    /// there is no keep probability.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        writeln!(w, "epoch,loss,keep_prob,seconds")?;
        for e in &self.epochs {
            let keep = e.keep_prob.map(|k| k.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{}", e.epoch, e.loss, keep, e.seconds)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn composition(graphs: &[crate::graphs::Graph]) -> Vec<(String, usize)> {
    let mut counts = std::collections::BTreeMap::new();
    for g in graphs {
        *counts.entry(g.domain().to_string()).or_insert(0) += 1;
    }
    counts.into_iter().collect()
}
