use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::MetricRecord;

/// Named per-graph values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricColumn {
    pub name: String,
    pub values: Vec<f64>,
}

pub fn metric_columns(records: &[MetricRecord]) -> Vec<MetricColumn> {
    MetricRecord::NAMES
        .iter()
        .enumerate()
        .map(|(j, name)| MetricColumn {
            name: (*name).to_string(),
            values: records.iter().map(|r| r.values()[j]).collect(),
        })
        .collect()
}

/// `sign(r)·r²` for the Pearson correlation `r`; `None` when either side is
/// constant.
pub fn signed_r2(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    let r = (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0);
    Some(r.signum() * r * r)
}

/// Signed R² of every (component, metric) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub metrics: Vec<String>,
    /// `r2[component][metric]`; `None` for constant metrics.
    pub r2: Vec<Vec<Option<f64>>>,
}

impl CorrelationTable {
    pub fn components(&self) -> usize {
        self.r2.len()
    }

    /// Metric indices by decreasing |R²|; undefined metrics last.
    pub fn ranking(&self, component: usize) -> Vec<usize> {
        let row = &self.r2[component];
        let mut idx: Vec<usize> = (0..row.len()).collect();
        idx.sort_by(|&a, &b| match (row[a], row[b]) {
            (Some(x), Some(y)) => y.abs().total_cmp(&x.abs()).then(a.cmp(&b)),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => a.cmp(&b),
        });
        idx
    }

    /// The most correlated metric of a component.
    pub fn top(&self, component: usize) -> Option<usize> {
        self.ranking(component)
            .into_iter()
            .next()
            .filter(|&m| self.r2[component][m].is_some())
    }
}

/// Correlates each column of `projections` (`n` rows of `k` values) with
/// each metric.
pub fn r2_correlations(projections: &[Vec<f64>], metrics: &[MetricColumn]) -> Result<CorrelationTable> {
    let n = projections.len();
    if n < 3 {
        return Err(Error::Contract(format!("correlations need at least 3 points, got {n}")));
    }
    if let Some(m) = metrics.iter().find(|m| m.values.len() != n) {
        return Err(Error::shape("r2_correlations", &[n], &[m.values.len()]));
    }
    let k = projections[0].len();
    let r2 = (0..k)
        .map(|c| {
            let column: Vec<f64> = projections.iter().map(|p| p[c]).collect();
            metrics.iter().map(|m| signed_r2(&column, &m.values)).collect()
        })
        .collect();
    Ok(CorrelationTable {
        metrics: metrics.iter().map(|m| m.name.clone()).collect(),
        r2,
    })
}
