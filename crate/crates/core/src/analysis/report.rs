use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::encoder::Model;
use crate::error::{Error, Result};
use crate::graphs::{batch_graphs, graph_metrics, Graph};
use crate::numerics::NormMode;

use super::correlation::{metric_columns, r2_correlations, CorrelationTable, MetricColumn};
use super::pca::{pca, tensor_rows, PcaResult};

/// Everything computed for one embedding analysis.
#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    pub pca: PcaResult,
    /// Per-graph coordinates along each component.
    pub projections: Vec<Vec<f64>>,
    pub metrics: Vec<MetricColumn>,
    pub table: CorrelationTable,
}

/// One row of `correlations.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationRow {
    /// 1-based component index.
    pub component: usize,
    pub variance_ratio: f64,
    pub metric: String,
    pub signed_r2: Option<f64>,
    /// 1-based position in the component's ranking.
    pub rank: usize,
}

/// Frozen-encoder graph embeddings (readout, running statistics).
pub fn graph_embeddings(model: &Model, graphs: &[Graph]) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::with_capacity(graphs.len());
    for chunk in graphs.chunks(256) {
        let e = model.embed(&batch_graphs(chunk)?, NormMode::Inference)?;
        rows.extend(tensor_rows(&e.graphs));
    }
    Ok(rows)
}

/// PCA of the embeddings of `graphs` and R² against their metrics.
pub fn analyze(model: &Model, graphs: &[Graph], k: usize) -> Result<Analysis> {
    let rows = graph_embeddings(model, graphs)?;
    let pca = pca(&rows, k)?;
    let projections = pca.project(&rows);
    let records: Vec<_> = graphs.iter().map(graph_metrics).collect();
    let metrics = metric_columns(&records);
    let table = r2_correlations(&projections, &metrics)?;
    Ok(Analysis {
        pca,
        projections,
        metrics,
        table,
    })
}

pub fn correlation_rows(pca: &PcaResult, table: &CorrelationTable) -> Vec<CorrelationRow> {
    let mut rows = Vec::new();
    for c in 0..table.components() {
        let ranking = table.ranking(c);
        for (m, name) in table.metrics.iter().enumerate() {
            rows.push(CorrelationRow {
                component: c + 1,
                variance_ratio: pca.explained_variance_ratio[c],
                metric: name.clone(),
                signed_r2: table.r2[c][m],
                rank: ranking
                    .iter()
                    .position(|&i| i == m)
                    .expect("ranking covers every metric")
                    + 1,
            });
        }
    }
    rows
}

const HEADER: &str = "component,variance_ratio,metric,signed_r2,rank";

pub fn correlations_csv(rows: &[CorrelationRow]) -> String {
    let mut out = format!("{HEADER}\n");
    for r in rows {
        let r2 = r.signed_r2.map_or_else(|| "undefined".to_string(), |v| v.to_string());
        writeln!(
            out,
            "{},{},{},{},{}",
            r.component, r.variance_ratio, r.metric, r2, r.rank
        )
        .expect("string write");
    }
    out
}

pub fn parse_correlations_csv(text: &str) -> Result<Vec<CorrelationRow>> {
    // leading `#` lines carry provenance comments
    let mut lines = text.lines().enumerate().skip_while(|(_, l)| l.starts_with('#'));
    match lines.next() {
        Some((_, h)) if h == HEADER => {}
        other => {
            return Err(Error::Parse {
                line: other.map_or(1, |(i, _)| i + 1),
                message: format!("expected header {HEADER}"),
            })
        }
    }
    lines
        .map(|(i, line)| {
            let bad = |message: String| Error::Parse { line: i + 1, message };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad(format!("expected 5 fields, got {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(e.to_string()));
            let int = |s: &str| s.parse::<usize>().map_err(|e| bad(e.to_string()));
            Ok(CorrelationRow {
                component: int(f[0])?,
                variance_ratio: num(f[1])?,
                metric: f[2].to_string(),
                signed_r2: if f[3] == "undefined" { None } else { Some(num(f[3])?) },
                rank: int(f[4])?,
            })
        })
        .collect()
}

fn scatter_svg(xs: &[f64], ys: &[f64], x_label: &str, y_label: &str) -> String {
    let (w, h, pad) = (320.0, 320.0, 30.0);
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, if hi > lo { hi - lo } else { 1.0 })
    };
    let (x0, xs_span) = range(xs);
    let (y0, ys_span) = range(ys);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n\
         <text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">{x_label}</text>\n\
         <text x=\"10\" y=\"{}\" font-size=\"10\" transform=\"rotate(-90 10 {})\" text-anchor=\"middle\">{y_label}</text>\n",
        w / 2.0,
        h - 8.0,
        h / 2.0,
        h / 2.0
    );
    for (x, y) in xs.iter().zip(ys) {
        let px = pad + (x - x0) / xs_span * (w - 2.0 * pad);
        let py = h - pad - (y - y0) / ys_span * (h - 2.0 * pad);
        writeln!(
            svg,
            "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"1.5\" fill=\"steelblue\"/>"
        )
        .expect("string write");
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes `correlations.csv`, one `scatter_{component}_{metric}.csv` per
/// pair and, with `svg`, matching scatter plots. Returns the written paths.
pub fn emit_report(analysis: &Analysis, out_dir: impl AsRef<Path>, svg: bool) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let rows = correlation_rows(&analysis.pca, &analysis.table);
    let path = dir.join("correlations.csv");
    fs::write(&path, correlations_csv(&rows))?;
    written.push(path);
    for c in 0..analysis.table.components() {
        let xs: Vec<f64> = analysis.projections.iter().map(|p| p[c]).collect();
        for m in &analysis.metrics {
            let mut csv = format!("pc{},{}\n", c + 1, m.name);
            for (x, y) in xs.iter().zip(&m.values) {
                writeln!(csv, "{x},{y}").expect("string write");
            }
            let path = dir.join(format!("scatter_{}_{}.csv", c + 1, m.name));
            fs::write(&path, csv)?;
            written.push(path);
            if svg {
                let path = dir.join(format!("scatter_{}_{}.svg", c + 1, m.name));
                fs::write(&path, scatter_svg(&xs, &m.values, &format!("PC{}", c + 1), &m.name))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}
