use std::collections::HashSet;

use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::rng::Rng;

use super::Graph;

/// Induced neighborhood of a center node.
#[derive(Clone, Debug, PartialEq)]
pub struct EgoNet {
    pub graph: Graph,
    /// Index of the center inside `graph`. Always 0.
    pub center: usize,
    /// Source node id of every node of `graph`, in order.
    pub nodes: Vec<usize>,
}

/// Breadth-first neighborhood of `center` out to `hops`, as an induced
/// subgraph.
///
/// With `fanout_cap`, each expanded node contributes at most that many of its
/// not-yet-kept neighbors, chosen uniformly. Features and labels follow
/// their nodes and edges.
pub fn ego_network(g: &Graph, center: usize, hops: usize, fanout_cap: Option<usize>, rng: &mut Rng) -> Result<EgoNet> {
    let adj = g.adjacency();
    ego_network_with_adjacency(g, &adj, center, hops, fanout_cap, rng)
}

/// [`ego_network`] reusing a precomputed adjacency list.
pub fn ego_network_with_adjacency(
    g: &Graph,
    adj: &[Vec<usize>],
    center: usize,
    hops: usize,
    fanout_cap: Option<usize>,
    rng: &mut Rng,
) -> Result<EgoNet> {
    if center >= g.node_count() {
        return Err(Error::Index {
            op: "ego_network",
            index: center,
            bound: g.node_count(),
        });
    }
    if hops == 0 {
        return Err(Error::Contract("ego_network needs hops >= 1".into()));
    }
    let mut kept = vec![center];
    let mut seen = HashSet::from([center]);
    let mut layer = vec![center];
    for _ in 0..hops {
        let mut next = Vec::new();
        for &u in &layer {
            let fresh: Vec<usize> = adj[u].iter().copied().filter(|v| !seen.contains(v)).collect();
            let picked: Vec<usize> = match fanout_cap {
                Some(cap) if fresh.len() > cap => {
                    let mut idx = sample(rng, fresh.len(), cap).into_vec();
                    idx.sort_unstable();
                    idx.into_iter().map(|i| fresh[i]).collect()
                }
                _ => fresh,
            };
            for v in picked {
                if seen.insert(v) {
                    kept.push(v);
                    next.push(v);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        layer = next;
    }
    let graph = g.induced_subgraph(&kept)?;
    Ok(EgoNet {
        graph,
        center: 0,
        nodes: kept,
    })
}
