use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::Graph;

/// Graph-level summary statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub nodes: usize,
    pub edges: usize,
    /// `2|E| / (n(n-1))`, zero below two nodes.
    pub density: f64,
    /// Longest shortest path within the largest connected component.
    pub diameter: usize,
    /// Mean local clustering coefficient (nodes of degree < 2 count as 0).
    pub avg_clustering: f64,
    /// `3·triangles / connected triples`.
    pub transitivity: f64,
}

impl MetricRecord {
    /// Column names in the order of [`MetricRecord::values`].
    pub const NAMES: [&'static str; 6] = [
        "nodes",
        "edges",
        "density",
        "diameter",
        "avg_clustering",
        "transitivity",
    ];

    pub fn values(&self) -> [f64; 6] {
        [
            self.nodes as f64,
            self.edges as f64,
            self.density,
            self.diameter as f64,
            self.avg_clustering,
            self.transitivity,
        ]
    }
}

pub fn graph_metrics(g: &Graph) -> MetricRecord {
    let n = g.node_count();
    let m = g.edge_count();
    let density = if n < 2 {
        0.0
    } else {
        2.0 * m as f64 / (n as f64 * (n as f64 - 1.0))
    };
    let adj = g.adjacency();
    let sets: Vec<HashSet<usize>> = adj.iter().map(|a| a.iter().copied().collect()).collect();

    // Triangles through each node: pairs of neighbors that are adjacent.
    let mut local_triangles = vec![0usize; n];
    for (v, nbrs) in adj.iter().enumerate() {
        for (i, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[i + 1..] {
                if sets[a].contains(&b) {
                    local_triangles[v] += 1;
                }
            }
        }
    }
    let mut clustering_sum = 0.0;
    let mut triples = 0usize;
    for (v, nbrs) in adj.iter().enumerate() {
        let d = nbrs.len();
        if d >= 2 {
            let pairs = d * (d - 1) / 2;
            clustering_sum += local_triangles[v] as f64 / pairs as f64;
            triples += pairs;
        }
    }
    let avg_clustering = if n == 0 { 0.0 } else { clustering_sum / n as f64 };
    // Each triangle is seen once from each of its three corners.
    let closed: usize = local_triangles.iter().sum();
    let transitivity = if triples == 0 {
        0.0
    } else {
        closed as f64 / triples as f64
    };

    MetricRecord {
        nodes: n,
        edges: m,
        density,
        diameter: largest_component_diameter(g, &adj),
        avg_clustering,
        transitivity,
    }
}

fn largest_component_diameter(g: &Graph, adj: &[Vec<usize>]) -> usize {
    let comps = g.components();
    let Some(largest) = comps.iter().max_by_key(|c| c.len()) else {
        return 0;
    };
    let mut diameter = 0;
    let mut dist = vec![usize::MAX; g.node_count()];
    for &s in largest {
        for &v in largest {
            dist[v] = usize::MAX;
        }
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    diameter = diameter.max(dist[v]);
                    queue.push_back(v);
                }
            }
        }
    }
    diameter
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle() {
        let m = graph_metrics(&Graph::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap());
        assert_eq!(m.diameter, 1);
        assert_eq!(m.avg_clustering, 1.0);
        assert_eq!(m.transitivity, 1.0);
        assert_eq!(m.density, 1.0);
    }

    #[test]
    fn path_has_no_triangles() {
        let m = graph_metrics(&Graph::new(4, vec![(0, 1), (1, 2), (2, 3)]).unwrap());
        assert_eq!(m.diameter, 3);
        assert_eq!(m.avg_clustering, 0.0);
        assert_eq!(m.transitivity, 0.0);
        assert!((m.density - 0.5).abs() < 1e-12);
    }

    #[test]
    fn edgeless_conventions() {
        let m = graph_metrics(&Graph::new(4, vec![]).unwrap());
        assert_eq!((m.diameter, m.avg_clustering, m.transitivity), (0, 0.0, 0.0));
        let single = graph_metrics(&Graph::new(1, vec![]).unwrap());
        assert_eq!(single.density, 0.0);
    }

    #[test]
    fn diameter_uses_largest_component() {
        // Path of 4 plus a separate edge.
        let g = Graph::new(6, vec![(0, 1), (1, 2), (2, 3), (4, 5)]).unwrap();
        assert_eq!(graph_metrics(&g).diameter, 3);
    }
}
