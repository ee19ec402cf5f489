use std::collections::{HashMap, HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Undirected simple graph with optional features, target and node labels.
///
/// Each undirected edge is stored once. Construction through [`Graph::new`]
/// or the builder methods validates every invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    node_feats: Option<Tensor>,
    edge_feats: Option<Tensor>,
    target: Option<f32>,
    node_labels: Option<Vec<usize>>,
    domain: String,
}

impl Graph {
    /// Topology-only graph.
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let g = Self {
            n,
            edges,
            node_feats: None,
            edge_feats: None,
            target: None,
            node_labels: None,
            domain: String::new(),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_node_feats(mut self, feats: Tensor) -> Result<Self> {
        self.node_feats = Some(feats);
        self.validate()?;
        Ok(self)
    }

    pub fn with_edge_feats(mut self, feats: Tensor) -> Result<Self> {
        self.edge_feats = Some(feats);
        self.validate()?;
        Ok(self)
    }

    pub fn with_node_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        self.node_labels = Some(labels);
        self.validate()?;
        Ok(self)
    }

    pub fn with_target(mut self, target: f32) -> Self {
        self.target = Some(target);
        self
    }

    pub fn with_domain(mut self, domain: impl Into<String>) -> Self {
        self.domain = domain.into();
        self
    }

    pub fn set_target(&mut self, target: Option<f32>) {
        self.target = target;
    }

    pub fn clear_node_labels(&mut self) {
        self.node_labels = None;
    }

    pub fn clear_features(&mut self) {
        self.node_feats = None;
        self.edge_feats = None;
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.edges.len());
        for (i, &(u, v)) in self.edges.iter().enumerate() {
            if u >= self.n || v >= self.n {
                return Err(Error::InvalidGraph(format!(
                    "edge {i} ({u},{v}) references a node outside 0..{}",
                    self.n
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("edge {i} is a self-loop on node {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidGraph(format!("edge {i} ({u},{v}) is a duplicate")));
            }
        }
        if let Some(f) = &self.node_feats {
            if f.shape().len() != 2 || f.rows() != self.n {
                return Err(Error::InvalidGraph(format!(
                    "node features have shape {:?}, expected {} rows",
                    f.shape(),
                    self.n
                )));
            }
        }
        if let Some(f) = &self.edge_feats {
            if f.shape().len() != 2 || f.rows() != self.edges.len() {
                return Err(Error::InvalidGraph(format!(
                    "edge features have shape {:?}, expected {} rows",
                    f.shape(),
                    self.edges.len()
                )));
            }
        }
        if let Some(l) = &self.node_labels {
            if l.len() != self.n {
                return Err(Error::InvalidGraph(format!(
                    "{} node labels for {} nodes",
                    l.len(),
                    self.n
                )));
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn node_feats(&self) -> Option<&Tensor> {
        self.node_feats.as_ref()
    }

    pub fn edge_feats(&self) -> Option<&Tensor> {
        self.edge_feats.as_ref()
    }

    pub fn target(&self) -> Option<f32> {
        self.target
    }

    pub fn node_labels(&self) -> Option<&[usize]> {
        self.node_labels.as_deref()
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    /// Connected components as lists of nodes, each sorted ascending,
    /// ordered by their smallest node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let mut comp = vec![usize::MAX; self.n];
        let mut out = Vec::new();
        for s in 0..self.n {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![s];
            comp[s] = id;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = id;
                        members.push(v);
                        queue.push_back(v);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.n <= 1 || self.components().len() == 1
    }

    /// Subgraph induced by `nodes`, renumbered in the given order.
    ///
    /// Keeps node/edge features and node labels for the retained elements;
    /// target and domain are copied. Duplicate entries in `nodes` are an error.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Graph> {
        let mut map = HashMap::with_capacity(nodes.len());
        for (new, &old) in nodes.iter().enumerate() {
            if old >= self.n {
                return Err(Error::Index {
                    op: "induced_subgraph",
                    index: old,
                    bound: self.n,
                });
            }
            if map.insert(old, new).is_some() {
                return Err(Error::InvalidGraph(format!("node {old} listed twice")));
            }
        }
        let mut edges = Vec::new();
        let mut kept_edge_rows = Vec::new();
        for (i, &(u, v)) in self.edges.iter().enumerate() {
            if let (Some(&a), Some(&b)) = (map.get(&u), map.get(&v)) {
                edges.push((a.min(b), a.max(b)));
                kept_edge_rows.push(i);
            }
        }
        let node_feats = self.node_feats.as_ref().map(|f| select_rows(f, nodes));
        let edge_feats = self.edge_feats.as_ref().map(|f| select_rows(f, &kept_edge_rows));
        let node_labels = self.node_labels.as_ref().map(|l| nodes.iter().map(|&i| l[i]).collect());
        Ok(Graph {
            n: nodes.len(),
            edges,
            node_feats,
            edge_feats,
            target: self.target,
            node_labels,
            domain: self.domain.clone(),
        })
    }

    /// Same graph with only the listed edges (by index) kept.
    pub fn with_edge_subset(&self, keep: &[usize]) -> Graph {
        Graph {
            n: self.n,
            edges: keep.iter().map(|&i| self.edges[i]).collect(),
            node_feats: self.node_feats.clone(),
            edge_feats: self.edge_feats.as_ref().map(|f| select_rows(f, keep)),
            target: self.target,
            node_labels: self.node_labels.clone(),
            domain: self.domain.clone(),
        }
    }

    /// Same graph with nodes renumbered by `perm` (old node `i` becomes
    /// `perm[i]`).
    pub fn relabel(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.n {
            return Err(Error::shape("relabel", &[self.n], &[perm.len()]));
        }
        let mut inverse = vec![usize::MAX; self.n];
        for (old, &new) in perm.iter().enumerate() {
            if new >= self.n || inverse[new] != usize::MAX {
                return Err(Error::InvalidGraph("relabel needs a permutation".into()));
            }
            inverse[new] = old;
        }
        self.induced_subgraph(&inverse)
    }
}

pub(crate) fn select_rows(t: &Tensor, rows: &[usize]) -> Tensor {
    let d = t.cols();
    let mut data = Vec::with_capacity(rows.len() * d);
    for &r in rows {
        data.extend_from_slice(t.row(r));
    }
    Tensor::new(vec![rows.len(), d], data).expect("row selection keeps width")
}
