//! JSON Lines graph corpus: one graph object per line,
//!
//! ```text
//! {"n": 3, "edges": [[0,1],[1,2]], "node_feats": null, "edge_feats": null,
//!  "y": 0.5, "node_labels": null, "domain": "random"}
//! ```

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

use super::Graph;

#[derive(Debug, Serialize, Deserialize)]
struct GraphRecord {
    n: usize,
    edges: Vec<[usize; 2]>,
    #[serde(default)]
    node_feats: Option<Vec<Vec<f32>>>,
    #[serde(default)]
    edge_feats: Option<Vec<Vec<f32>>>,
    #[serde(default)]
    y: Option<f32>,
    #[serde(default)]
    node_labels: Option<Vec<usize>>,
    #[serde(default)]
    domain: String,
}

fn to_rows(t: &Tensor) -> Vec<Vec<f32>> {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

fn matrix(rows: Vec<Vec<f32>>, what: &str) -> std::result::Result<Tensor, String> {
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(format!("{what} rows have unequal lengths"));
    }
    let n = rows.len();
    Tensor::new(vec![n, width], rows.into_iter().flatten().collect()).map_err(|e| e.to_string())
}

fn record_to_graph(rec: GraphRecord) -> std::result::Result<Graph, String> {
    let edges = rec.edges.into_iter().map(|[u, v]| (u, v)).collect();
    let mut g = Graph::new(rec.n, edges).map_err(|e| e.to_string())?;
    if let Some(f) = rec.node_feats {
        g = g.with_node_feats(matrix(f, "node_feats")?).map_err(|e| e.to_string())?;
    }
    if let Some(f) = rec.edge_feats {
        g = g.with_edge_feats(matrix(f, "edge_feats")?).map_err(|e| e.to_string())?;
    }
    if let Some(l) = rec.node_labels {
        g = g.with_node_labels(l).map_err(|e| e.to_string())?;
    }
    if let Some(y) = rec.y {
        g = g.with_target(y);
    }
    Ok(g.with_domain(rec.domain))
}

/// Serializes one graph as a single JSON line (without the newline).
pub fn graph_to_json_line(g: &Graph) -> Result<String> {
    let rec = GraphRecord {
        n: g.node_count(),
        edges: g.edges().iter().map(|&(u, v)| [u, v]).collect(),
        node_feats: g.node_feats().map(to_rows),
        edge_feats: g.edge_feats().map(to_rows),
        y: g.target(),
        node_labels: g.node_labels().map(<[usize]>::to_vec),
        domain: g.domain().to_string(),
    };
    Ok(serde_json::to_string(&rec)?)
}

pub fn write_corpus(w: impl Write, graphs: &[Graph]) -> Result<()> {
    let mut w = BufWriter::new(w);
    for g in graphs {
        w.write_all(graph_to_json_line(g)?.as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a corpus, validating every graph. The first violation aborts with
/// its 1-based line number. Blank lines are skipped.
pub fn read_corpus(r: impl BufRead) -> Result<Vec<Graph>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: GraphRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let g = record_to_graph(rec).map_err(|message| Error::Parse { line: i + 1, message })?;
        out.push(g);
    }
    Ok(out)
}

pub fn save_corpus(path: impl AsRef<Path>, graphs: &[Graph]) -> Result<()> {
    write_corpus(std::fs::File::create(path)?, graphs)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Graph>> {
    read_corpus(std::io::BufReader::new(std::fs::File::open(path)?))
}
