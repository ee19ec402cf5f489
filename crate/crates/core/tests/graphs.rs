mod common;

use std::collections::HashSet;

use common::oracles;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use topo_core::graphs::{
    batch_graphs, community_with, ego_network, er_with, generate_community, generate_corpus, generate_tree,
    graph_metrics, io, CommunityParams, Explorer, Graph, Sampler, SyntheticKind, TreeParams,
};
use topo_core::rng::seeded;

#[test]
fn tree_mean_size_matches_reported_statistics() {
    let mut rng = seeded(2024);
    let sizes: Vec<f64> = (0..5000)
        .map(|_| generate_tree(&mut rng, &TreeParams::default()).node_count() as f64)
        .collect();
    let mean = sizes.iter().sum::<f64>() / sizes.len() as f64;
    assert!((mean - 19.6).abs() <= 3.0, "mean tree size {mean}");
}

#[test]
fn er_edge_count_matches_binomial() {
    let mut rng = seeded(7);
    let draws = 1000.0;
    let total: usize = (0..1000).map(|_| er_with(&mut rng, 30, 0.2).edge_count()).sum();
    let mean = total as f64 / draws;
    let pairs = 435.0;
    let sigma_mean = (pairs * 0.2 * 0.8 / draws).sqrt();
    assert!(
        (mean - 87.0).abs() < 3.0 * sigma_mean,
        "mean {mean}, 3σ {}",
        3.0 * sigma_mean
    );
}

#[test]
fn community_graphs_have_48_nodes_and_binomial_crossings() {
    let mut rng = seeded(8);
    for _ in 0..200 {
        assert_eq!(
            generate_community(&mut rng, &CommunityParams::default()).node_count(),
            48
        );
    }
    let graphs = 500;
    let cross_pairs_per_graph = 48 * 47 / 2 - 4 * (12 * 11 / 2);
    let mut crossings = 0usize;
    for _ in 0..graphs {
        let g = community_with(&mut rng, 4, 12, 0.3, 0.1);
        crossings += g.edges().iter().filter(|&&(u, v)| u / 12 != v / 12).count();
    }
    let trials = (graphs * cross_pairs_per_graph) as f64;
    let frac = crossings as f64 / trials;
    let sigma = (0.1 * 0.9 / trials).sqrt();
    assert!((frac - 0.1).abs() < 3.0 * sigma, "fraction {frac}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trees_are_acyclic_with_n_minus_one_edges(seed in any::<u64>()) {
        let g = generate_tree(&mut seeded(seed), &TreeParams::default());
        prop_assert_eq!(g.edge_count(), g.node_count() - 1);
        prop_assert!(oracles::is_forest(g.node_count(), g.edges()));
        prop_assert!(g.is_connected());
    }

    #[test]
    fn metrics_are_invariant_under_relabeling(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let g = er_with(&mut rng, 15, 0.3);
        let mut perm: Vec<usize> = (0..15).collect();
        perm.shuffle(&mut rng);
        let h = g.relabel(&perm).unwrap();
        let (a, b) = (graph_metrics(&g), graph_metrics(&h));
        prop_assert_eq!(a.diameter, b.diameter);
        prop_assert_eq!(a.edges, b.edges);
        prop_assert!((a.avg_clustering - b.avg_clustering).abs() < 1e-12);
        prop_assert!((a.transitivity - b.transitivity).abs() < 1e-12);
    }

    #[test]
    fn generators_are_deterministic(seed in any::<u64>()) {
        for kind in [SyntheticKind::Trees, SyntheticKind::Er, SyntheticKind::Community] {
            prop_assert_eq!(generate_corpus(kind, 3, seed), generate_corpus(kind, 3, seed));
        }
    }
}

#[test]
fn metrics_match_brute_force_on_random_graphs() {
    let mut rng = seeded(99);
    for i in 0..50 {
        let n = 2 + i % 19;
        let p = 0.1 + 0.6 * (i as f64 / 50.0);
        let g = er_with(&mut rng, n, p);
        let fast = graph_metrics(&g);
        let slow = oracles::brute_metrics(n, g.edges());
        assert_eq!(fast.diameter, slow.diameter, "graph {i}");
        assert_eq!(fast.avg_clustering, slow.avg_clustering, "graph {i}");
        assert_eq!(fast.transitivity, slow.transitivity, "graph {i}");
        assert_eq!(fast.density, slow.density, "graph {i}");
    }
}

fn torus(side: usize) -> Graph {
    let id = |r: usize, c: usize| (r % side) * side + (c % side);
    let mut edges = Vec::new();
    for r in 0..side {
        for c in 0..side {
            edges.push((id(r, c), id(r, c + 1)));
            edges.push((id(r, c), id(r + 1, c)));
        }
    }
    Graph::new(side * side, edges).unwrap()
}

#[test]
fn random_walk_sample_edges_exist_in_source() {
    let source = torus(10);
    let source_edges: HashSet<(usize, usize)> = source.edges().iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
    let ex = Explorer::new(&source);
    for seed in 0..20 {
        let mut rng = seeded(seed);
        // Recover the node map by sampling the same walk on a labelled copy.
        let labelled = source.clone().with_node_labels((0..100).collect()).unwrap();
        let lex = Explorer::new(&labelled);
        let g = lex.sample_with(Sampler::RandomWalk, 17, 30, &mut rng).unwrap();
        let map = g.node_labels().unwrap();
        assert_eq!(g.node_count(), 30);
        for &(u, v) in g.edges() {
            let (a, b) = (map[u], map[v]);
            assert!(source_edges.contains(&(a.min(b), a.max(b))));
        }
        // Induced: every source edge among the chosen nodes is present.
        let chosen: HashSet<usize> = map.iter().copied().collect();
        let inside = source_edges
            .iter()
            .filter(|(a, b)| chosen.contains(a) && chosen.contains(b))
            .count();
        assert_eq!(inside, g.edge_count());
        let _ = &ex;
    }
}

#[test]
fn ego_network_stays_within_hop_radius() {
    let mut rng = seeded(31);
    let edges = oracles::random_regular(60, 3, &mut rng);
    let g = Graph::new(60, edges)
        .unwrap()
        .with_node_labels((0..60).collect())
        .unwrap();
    for center in [0, 17, 42] {
        let ego = ego_network(&g, center, 3, Some(5), &mut rng).unwrap();
        let dist = oracles::bfs_distances(ego.graph.node_count(), ego.graph.edges(), ego.center);
        assert!(dist.iter().all(|d| d.map_or(false, |d| d <= 3)));
        // The node map agrees with the carried labels.
        assert_eq!(ego.graph.node_labels().unwrap(), ego.nodes.as_slice());
    }
}

#[test]
fn uncapped_ego_network_is_the_hop_ball() {
    let mut rng = seeded(12);
    let g = er_with(&mut rng, 40, 0.08);
    for center in 0..40 {
        for hops in 1..4 {
            let ego = ego_network(&g, center, hops, None, &mut rng).unwrap();
            let dist = oracles::bfs_distances(40, g.edges(), center);
            let mut ball: Vec<usize> = (0..40).filter(|&v| dist[v].map_or(false, |d| d <= hops)).collect();
            let mut got = ego.nodes.clone();
            got.sort_unstable();
            ball.sort_unstable();
            assert_eq!(got, ball);
            let expected_edges = g
                .edges()
                .iter()
                .filter(|(u, v)| ball.binary_search(u).is_ok() && ball.binary_search(v).is_ok())
                .count();
            assert_eq!(ego.graph.edge_count(), expected_edges);
        }
    }
}

#[test]
fn batching_512_graphs_round_trips() {
    let graphs = generate_corpus(SyntheticKind::Er, 512, 5);
    let batch = batch_graphs(&graphs).unwrap();
    assert_eq!(batch.total_nodes(), graphs.iter().map(Graph::node_count).sum::<usize>());
    assert_eq!(
        batch.total_edges(),
        2 * graphs.iter().map(Graph::edge_count).sum::<usize>()
    );
    assert!(batch.node_to_graph().windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(batch.unbatch().unwrap(), graphs);
}

#[test]
fn corpus_loader_round_trip_on_1000_er_graphs() {
    let graphs = generate_corpus(SyntheticKind::Er, 1000, 77);
    let mut buf = Vec::new();
    io::write_corpus(&mut buf, &graphs).unwrap();
    let back = io::read_corpus(buf.as_slice()).unwrap();
    assert_eq!(back.len(), 1000);
    for (a, b) in graphs.iter().zip(&back) {
        b.validate().unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn explore_samples_respect_bounds() {
    let mut rng = seeded(3);
    let source = er_with(&mut rng, 800, 0.01);
    let ex = Explorer::new(&source);
    for _ in 0..200 {
        let g = ex.sample(&mut rng, 24, 96).unwrap();
        assert!((24..=96).contains(&g.node_count()));
        assert!(g.is_connected());
    }
}

#[test]
fn tree_target_is_realized_depth() {
    let mut rng = seeded(4);
    for _ in 0..100 {
        let g = generate_tree(&mut rng, &TreeParams::default());
        let depth = oracles::bfs_distances(g.node_count(), g.edges(), 0)
            .into_iter()
            .map(Option::unwrap)
            .max()
            .unwrap();
        assert_eq!(g.target(), Some(depth as f32));
    }
}
