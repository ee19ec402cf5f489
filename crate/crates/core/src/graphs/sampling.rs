//! Exploration samplers that cut small connected subgraphs from a large
//! graph. Every sampler grows a node set in which each new node is adjacent
//! to an already chosen one, so the induced subgraph is connected.

use std::collections::{HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

use super::Graph;

/// One member of the exploration family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Sampler {
    RandomWalk,
    RandomWalkWithRestart { restart: f64 },
    Snowball,
    ForestFire { burn: f64 },
}

impl Sampler {
    /// The family a sampler is drawn from uniformly.
    pub const FAMILY: [Sampler; 4] = [
        Sampler::RandomWalk,
        Sampler::RandomWalkWithRestart { restart: 0.1 },
        Sampler::Snowball,
        Sampler::ForestFire { burn: 0.4 },
    ];
}

/// Precomputed adjacency and components of a source graph.
#[derive(Debug)]
pub struct Explorer<'a> {
    source: &'a Graph,
    adj: Vec<Vec<usize>>,
    component_size: Vec<usize>,
}

impl<'a> Explorer<'a> {
    pub fn new(source: &'a Graph) -> Self {
        let mut component_size = vec![0; source.node_count()];
        for comp in source.components() {
            for &v in &comp {
                component_size[v] = comp.len();
            }
        }
        Self {
            source,
            adj: source.adjacency(),
            component_size,
        }
    }

    pub fn largest_component(&self) -> usize {
        self.component_size.iter().copied().max().unwrap_or(0)
    }

    /// Draws a target size in `[min_nodes, max_nodes]` and a sampler from
    /// [`Sampler::FAMILY`], then explores from a random start node whose
    /// component is large enough.
    pub fn sample(&self, rng: &mut Rng, min_nodes: usize, max_nodes: usize) -> Result<Graph> {
        if min_nodes == 0 || min_nodes > max_nodes {
            return Err(Error::Config(vec![format!(
                "sample size range [{min_nodes}, {max_nodes}] is empty"
            )]));
        }
        let largest = self.largest_component();
        if largest < min_nodes {
            return Err(Error::Sampling(format!(
                "largest connected component has {largest} nodes, fewer than the minimum {min_nodes}"
            )));
        }
        let target = rng.gen_range(min_nodes..=max_nodes.min(largest));
        let sampler = Sampler::FAMILY[rng.gen_range(0..Sampler::FAMILY.len())];
        let starts: Vec<usize> = (0..self.source.node_count())
            .filter(|&v| self.component_size[v] >= target)
            .collect();
        let start = starts[rng.gen_range(0..starts.len())];
        self.sample_with(sampler, start, target, rng)
    }

    /// Runs one sampler from `start` until `target` nodes are chosen.
    pub fn sample_with(&self, sampler: Sampler, start: usize, target: usize, rng: &mut Rng) -> Result<Graph> {
        if start >= self.source.node_count() {
            return Err(Error::Index {
                op: "sample_with",
                index: start,
                bound: self.source.node_count(),
            });
        }
        if self.component_size[start] < target {
            return Err(Error::Sampling(format!(
                "component of node {start} has {} nodes, fewer than the target {target}",
                self.component_size[start]
            )));
        }
        let nodes = match sampler {
            Sampler::RandomWalk => self.random_walk(start, target, 0.0, rng),
            Sampler::RandomWalkWithRestart { restart } => self.random_walk(start, target, restart, rng),
            Sampler::Snowball => self.snowball(start, target, rng),
            Sampler::ForestFire { burn } => self.forest_fire(start, target, burn, rng),
        };
        self.source.induced_subgraph(&nodes)
    }

    fn random_walk(&self, start: usize, target: usize, restart: f64, rng: &mut Rng) -> Vec<usize> {
        let mut chosen = vec![start];
        let mut seen = HashSet::from([start]);
        let mut current = start;
        // A walk can stall on a bottleneck; past this budget the set is
        // completed breadth-first from what was reached.
        let budget = 100 * target.max(self.source.node_count().min(10_000));
        let mut steps = 0;
        while chosen.len() < target && steps < budget {
            steps += 1;
            if restart > 0.0 && rng.gen_bool(restart) {
                current = start;
                continue;
            }
            let nbrs = &self.adj[current];
            if nbrs.is_empty() {
                current = start;
                continue;
            }
            current = nbrs[rng.gen_range(0..nbrs.len())];
            if seen.insert(current) {
                chosen.push(current);
            }
        }
        if chosen.len() < target {
            self.fill_breadth_first(&mut chosen, &mut seen, target, rng);
        }
        chosen
    }

    fn snowball(&self, start: usize, target: usize, rng: &mut Rng) -> Vec<usize> {
        let mut chosen = vec![start];
        let mut seen = HashSet::from([start]);
        self.fill_breadth_first(&mut chosen, &mut seen, target, rng);
        chosen
    }

    /// Breadth-first expansion from every chosen node in order, visiting
    /// neighbors in random order.
    fn fill_breadth_first(&self, chosen: &mut Vec<usize>, seen: &mut HashSet<usize>, target: usize, rng: &mut Rng) {
        let mut queue: VecDeque<usize> = chosen.iter().copied().collect();
        while let Some(u) = queue.pop_front() {
            let mut nbrs = self.adj[u].clone();
            nbrs.shuffle(rng);
            for v in nbrs {
                if chosen.len() >= target {
                    return;
                }
                if seen.insert(v) {
                    chosen.push(v);
                    queue.push_back(v);
                }
            }
        }
    }

    fn forest_fire(&self, start: usize, target: usize, burn: f64, rng: &mut Rng) -> Vec<usize> {
        let mut chosen = vec![start];
        let mut seen = HashSet::from([start]);
        let mut fire = VecDeque::from([start]);
        while chosen.len() < target {
            let Some(u) = fire.pop_front() else {
                // The fire died out: reignite at a burned node that still
                // has unburned neighbors.
                let candidates: Vec<usize> = chosen
                    .iter()
                    .copied()
                    .filter(|&v| self.adj[v].iter().any(|w| !seen.contains(w)))
                    .collect();
                let Some(&next) = candidates.get(rng.gen_range(0..candidates.len().max(1))) else {
                    break;
                };
                fire.push_back(next);
                continue;
            };
            // Geometric number of neighbors to burn, mean burn/(1-burn).
            let mut spread = 0;
            while rng.gen_bool(burn) {
                spread += 1;
            }
            let mut fresh: Vec<usize> = self.adj[u].iter().copied().filter(|w| !seen.contains(w)).collect();
            fresh.shuffle(rng);
            for v in fresh.into_iter().take(spread) {
                if chosen.len() >= target {
                    break;
                }
                seen.insert(v);
                chosen.push(v);
                fire.push_back(v);
            }
        }
        chosen
    }
}

/// Samples one connected subgraph with a size drawn from
/// `[min_nodes, max_nodes]` using a sampler drawn uniformly from the family.
pub fn explore_sample(source: &Graph, rng: &mut Rng, min_nodes: usize, max_nodes: usize) -> Result<Graph> {
    Explorer::new(source).sample(rng, min_nodes, max_nodes)
}
