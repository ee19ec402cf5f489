//! Synthetic evaluation corpora: random trees, Erdős–Rényi graphs and
//! planted-community graphs. Each generator records its regression target on
//! the graph.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

use super::Graph;

pub const TREES_DOMAIN: &str = "trees";
pub const RANDOM_DOMAIN: &str = "random";
pub const COMMUNITY_DOMAIN: &str = "community";

/// Parameter ranges for [`generate_tree`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    /// Inclusive range of the maximum depth.
    pub min_depth: usize,
    pub max_depth: usize,
    /// Range of the per-slot branching probability.
    pub min_branch: f64,
    pub max_branch: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            min_depth: 8,
            max_depth: 11,
            min_branch: 0.3,
            max_branch: 0.6,
        }
    }
}

/// Parameter ranges for [`generate_er`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErParams {
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub min_p: f64,
    pub max_p: f64,
}

impl Default for ErParams {
    fn default() -> Self {
        Self {
            min_nodes: 12,
            max_nodes: 48,
            min_p: 0.05,
            max_p: 0.5,
        }
    }
}

/// Parameters for [`generate_community`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CommunityParams {
    pub communities: usize,
    pub nodes_per_community: usize,
    pub p_intra: f64,
    pub min_p_inter: f64,
    pub max_p_inter: f64,
}

impl Default for CommunityParams {
    fn default() -> Self {
        Self {
            communities: 4,
            nodes_per_community: 12,
            p_intra: 0.3,
            min_p_inter: 0.01,
            max_p_inter: 0.15,
        }
    }
}

/// Random rooted tree with a sampled maximum depth and branching probability.
/// The target is the realized depth.
pub fn generate_tree(rng: &mut Rng, params: &TreeParams) -> Graph {
    let depth = rng.gen_range(params.min_depth..=params.max_depth);
    let branch = rng.gen_range(params.min_branch..=params.max_branch);
    tree_with(rng, depth, branch)
}

/// Tree grown level by level to `max_depth`.
///
/// Each frontier node has two child slots, each filled with probability
/// `branch_prob`. When a level would otherwise come out empty one child is
/// attached to a random frontier node, so growth only stops early when
/// `branch_prob` is zero.
pub fn tree_with(rng: &mut Rng, max_depth: usize, branch_prob: f64) -> Graph {
    let mut edges = Vec::new();
    let mut frontier = vec![0usize];
    let mut n = 1;
    let mut depth = 0;
    if branch_prob > 0.0 {
        for _ in 0..max_depth {
            let mut next = Vec::new();
            for &parent in &frontier {
                for _ in 0..2 {
                    if rng.gen_bool(branch_prob.min(1.0)) {
                        edges.push((parent, n));
                        next.push(n);
                        n += 1;
                    }
                }
            }
            if next.is_empty() {
                let parent = frontier[rng.gen_range(0..frontier.len())];
                edges.push((parent, n));
                next.push(n);
                n += 1;
            }
            frontier = next;
            depth += 1;
        }
    }
    Graph::new(n, edges)
        .expect("tree construction is valid")
        .with_target(depth as f32)
        .with_domain(TREES_DOMAIN)
}

/// Erdős–Rényi graph with sampled size and edge probability; target = p.
pub fn generate_er(rng: &mut Rng, params: &ErParams) -> Graph {
    let n = rng.gen_range(params.min_nodes..=params.max_nodes);
    let p = rng.gen_range(params.min_p..=params.max_p);
    er_with(rng, n, p)
}

/// G(n, p): every unordered pair independently with probability `p`.
pub fn er_with(rng: &mut Rng, n: usize, p: f64) -> Graph {
    let p = p.clamp(0.0, 1.0);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, edges)
        .expect("ER construction is valid")
        .with_target(p as f32)
        .with_domain(RANDOM_DOMAIN)
}

/// Planted-community graph with a sampled inter-community probability,
/// which is also the target.
pub fn generate_community(rng: &mut Rng, params: &CommunityParams) -> Graph {
    let p_inter = rng.gen_range(params.min_p_inter..=params.max_p_inter);
    community_with(
        rng,
        params.communities,
        params.nodes_per_community,
        params.p_intra,
        p_inter,
    )
}

/// Node `i` belongs to community `i / nodes_per_community`.
pub fn community_with(
    rng: &mut Rng,
    communities: usize,
    nodes_per_community: usize,
    p_intra: f64,
    p_inter: f64,
) -> Graph {
    let n = communities * nodes_per_community;
    let (p_intra, p_inter) = (p_intra.clamp(0.0, 1.0), p_inter.clamp(0.0, 1.0));
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let same = u / nodes_per_community == v / nodes_per_community;
            if rng.gen_bool(if same { p_intra } else { p_inter }) {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, edges)
        .expect("community construction is valid")
        .with_target(p_inter as f32)
        .with_domain(COMMUNITY_DOMAIN)
}

/// Named synthetic dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticKind {
    Trees,
    Er,
    Community,
}

impl std::str::FromStr for SyntheticKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "trees" => Ok(Self::Trees),
            "er" | "random" => Ok(Self::Er),
            "community" => Ok(Self::Community),
            other => Err(crate::Error::Config(vec![format!(
                "unknown dataset '{other}' (expected trees, er or community)"
            )])),
        }
    }
}

/// `count` graphs of one kind with default parameters. Graph `i` is drawn
/// from its own stream seeded by `derive_seed(seed, i)`.
pub fn generate_corpus(kind: SyntheticKind, count: usize, seed: u64) -> Vec<Graph> {
    (0..count)
        .map(|i| {
            let mut rng = crate::rng::seeded(crate::rng::derive_seed(seed, i as u64));
            match kind {
                SyntheticKind::Trees => generate_tree(&mut rng, &TreeParams::default()),
                SyntheticKind::Er => generate_er(&mut rng, &ErParams::default()),
                SyntheticKind::Community => generate_community(&mut rng, &CommunityParams::default()),
            }
        })
        .collect()
}
