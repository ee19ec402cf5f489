use crate::error::{Error, Result};
use crate::numerics::Tensor;

use super::Graph;

/// Disjoint union of graphs, ready for message passing.
///
/// Undirected edge `e` of graph `g` becomes the two directed edges
/// `2·k` (u→v) and `2·k+1` (v→u), where `k` is the running undirected edge
/// index across the batch. Consumers rely on this pairing to share one value
/// between both orientations.
#[derive(Clone, Debug)]
pub struct GraphBatch {
    graphs: Vec<Graph>,
    node_offset: Vec<usize>,
    node_to_graph: Vec<usize>,
    src: Vec<usize>,
    dst: Vec<usize>,
    edge_to_graph: Vec<usize>,
    node_feats: Option<Tensor>,
    edge_feats: Option<Tensor>,
}

impl GraphBatch {
    /// Builds the union. Feature presence must be uniform across the list,
    /// separately for node and edge features.
    pub fn new(graphs: Vec<Graph>) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::Batching("cannot batch an empty graph list".into()));
        }
        let has_node = graphs[0].node_feats().is_some();
        let has_edge = graphs[0].edge_feats().is_some();
        let node_dim = graphs[0].node_feats().map(Tensor::cols);
        let edge_dim = graphs[0].edge_feats().map(Tensor::cols);
        for (i, g) in graphs.iter().enumerate() {
            if g.node_feats().is_some() != has_node || g.edge_feats().is_some() != has_edge {
                return Err(Error::Batching(format!(
                    "graph {i} has different feature presence from graph 0"
                )));
            }
            if g.node_feats().map(Tensor::cols) != node_dim || g.edge_feats().map(Tensor::cols) != edge_dim {
                return Err(Error::Batching(format!(
                    "graph {i} has different feature width from graph 0"
                )));
            }
        }
        let total_nodes: usize = graphs.iter().map(Graph::node_count).sum();
        let total_undirected: usize = graphs.iter().map(Graph::edge_count).sum();
        let mut node_offset = Vec::with_capacity(graphs.len());
        let mut node_to_graph = Vec::with_capacity(total_nodes);
        let mut src = Vec::with_capacity(2 * total_undirected);
        let mut dst = Vec::with_capacity(2 * total_undirected);
        let mut edge_to_graph = Vec::with_capacity(2 * total_undirected);
        let mut offset = 0;
        for (gi, g) in graphs.iter().enumerate() {
            node_offset.push(offset);
            node_to_graph.extend(std::iter::repeat(gi).take(g.node_count()));
            for &(u, v) in g.edges() {
                src.extend([offset + u, offset + v]);
                dst.extend([offset + v, offset + u]);
                edge_to_graph.extend([gi, gi]);
            }
            offset += g.node_count();
        }
        let node_feats = node_dim.map(|d| {
            let data = graphs
                .iter()
                .flat_map(|g| g.node_feats().expect("checked").data().iter().copied())
                .collect();
            Tensor::new(vec![total_nodes, d], data).expect("node feature rows")
        });
        let edge_feats = edge_dim.map(|d| {
            let mut data = Vec::with_capacity(2 * total_undirected * d);
            for g in &graphs {
                let f = g.edge_feats().expect("checked");
                for e in 0..g.edge_count() {
                    data.extend_from_slice(f.row(e));
                    data.extend_from_slice(f.row(e));
                }
            }
            Tensor::new(vec![2 * total_undirected, d], data).expect("edge feature rows")
        });
        Ok(Self {
            graphs,
            node_offset,
            node_to_graph,
            src,
            dst,
            edge_to_graph,
            node_feats,
            edge_feats,
        })
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn num_graphs(&self) -> usize {
        self.graphs.len()
    }

    pub fn total_nodes(&self) -> usize {
        self.node_to_graph.len()
    }

    /// Number of directed edges (twice the undirected count).
    pub fn total_edges(&self) -> usize {
        self.src.len()
    }

    pub fn node_offset(&self) -> &[usize] {
        &self.node_offset
    }

    pub fn node_to_graph(&self) -> &[usize] {
        &self.node_to_graph
    }

    pub fn edge_src(&self) -> &[usize] {
        &self.src
    }

    pub fn edge_dst(&self) -> &[usize] {
        &self.dst
    }

    pub fn edge_to_graph(&self) -> &[usize] {
        &self.edge_to_graph
    }

    pub fn node_feats(&self) -> Option<&Tensor> {
        self.node_feats.as_ref()
    }

    /// Edge features per directed edge.
    pub fn edge_feats(&self) -> Option<&Tensor> {
        self.edge_feats.as_ref()
    }

    /// Index of the opposite orientation of each directed edge.
    pub fn reverse_edge_index(&self) -> Vec<usize> {
        (0..self.total_edges()).map(|e| e ^ 1).collect()
    }

    /// Node count of each graph.
    pub fn graph_sizes(&self) -> Vec<usize> {
        self.graphs.iter().map(Graph::node_count).collect()
    }

    /// Directed edge count of each graph.
    pub fn graph_edge_counts(&self) -> Vec<usize> {
        self.graphs.iter().map(|g| 2 * g.edge_count()).collect()
    }

    /// Recovers the member graphs from the batched arrays.
    pub fn unbatch(&self) -> Result<Vec<Graph>> {
        let b = self.num_graphs();
        let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); b];
        for e in (0..self.total_edges()).step_by(2) {
            let g = self.edge_to_graph[e];
            let off = self.node_offset[g];
            edges[g].push((self.src[e] - off, self.dst[e] - off));
        }
        let mut out = Vec::with_capacity(b);
        let mut edge_row = 0;
        for (gi, edge_list) in edges.into_iter().enumerate() {
            let n = self.graphs[gi].node_count();
            let off = self.node_offset[gi];
            let m = edge_list.len();
            let mut g = Graph::new(n, edge_list)?;
            if let Some(f) = &self.node_feats {
                let rows: Vec<usize> = (off..off + n).collect();
                g = g.with_node_feats(super::graph::select_rows(f, &rows))?;
            }
            if let Some(f) = &self.edge_feats {
                let rows: Vec<usize> = (0..m).map(|k| 2 * (edge_row + k)).collect();
                g = g.with_edge_feats(super::graph::select_rows(f, &rows))?;
            }
            edge_row += m;
            let src = &self.graphs[gi];
            if let Some(l) = src.node_labels() {
                g = g.with_node_labels(l.to_vec())?;
            }
            if let Some(t) = src.target() {
                g = g.with_target(t);
            }
            out.push(g.with_domain(src.domain()));
        }
        Ok(out)
    }
}

/// Batches clones of `graphs`.
pub fn batch_graphs(graphs: &[Graph]) -> Result<GraphBatch> {
    GraphBatch::new(graphs.to_vec())
}
