use ndarray::Array2;
use proptest::prelude::*;
use subgraph_explainer::gnn::{softmax, weights, Architecture, Evaluator, ModelSpec, ModelType, Readout};
use subgraph_explainer::graph::{connected_components, l_hop_neighbors, prune_actions, prune_actions_anchored};
use subgraph_explainer::mcts::{run_search, SearchConfig};
use subgraph_explainer::shapley::{exact_shapley_value, Scorer, TableGame};
use subgraph_explainer::{Graph, NodeSet, PruneOrder, PruneStrategy};

/// Random simple graph (not necessarily connected) with small random features.
fn graph(max_nodes: usize) -> impl Strategy<Value = Graph> {
    (2..=max_nodes).prop_flat_map(|n| {
        let pairs = n * (n - 1) / 2;
        (
            proptest::collection::vec(proptest::bool::weighted(0.3), pairs),
            proptest::collection::vec(-1.0f64..1.0, n * 3),
        )
            .prop_map(move |(keep, feats)| {
                let mut edges = Vec::new();
                let mut k = 0;
                for u in 0..n {
                    for v in u + 1..n {
                        if keep[k] {
                            edges.push((u, v));
                        }
                        k += 1;
                    }
                }
                Graph::new(n, edges, Array2::from_shape_vec((n, 3), feats).unwrap()).unwrap()
            })
    })
}

fn order() -> impl Strategy<Value = PruneOrder> {
    prop_oneof![Just(PruneOrder::Low2high), Just(PruneOrder::High2low)]
}

fn model(seed: u64, model_type: ModelType, readout: Readout) -> ModelSpec {
    let mut arch = Architecture::three_layer(model_type, 3, 3, readout);
    arch.hidden = vec![6, 5, 4];
    ModelSpec::init(&arch, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prune_children_are_smaller_connected_subsets(g in graph(10), ord in order(), k in prop::option::of(1usize..6)) {
        let strategy = PruneStrategy { order: ord, k };
        for current in connected_components(&g, &g.all_nodes()).unwrap().into_iter().filter(|c| c.len() > 1) {
            let children = prune_actions(&g, &current, strategy).unwrap();
            if let Some(k) = k {
                prop_assert!(children.len() <= k);
            }
            for p in children {
                prop_assert!(current.contains(p.removed));
                prop_assert!(!p.child.contains(p.removed));
                prop_assert!(p.child.len() < current.len());
                prop_assert!(p.child.iter().all(|v| current.contains(v)));
                prop_assert!(g.is_connected_set(&p.child).unwrap());
            }
        }
    }

    #[test]
    fn anchored_children_keep_the_anchor(g in graph(10), ord in order(), pick in 0usize..10) {
        let anchor = pick % g.num_nodes();
        let root = connected_components(&g, &g.all_nodes())
            .unwrap()
            .into_iter()
            .find(|c| c.contains(anchor))
            .unwrap();
        prop_assume!(root.len() > 1);
        for p in prune_actions_anchored(&g, &root, PruneStrategy::unlimited(ord), Some(anchor)).unwrap() {
            prop_assert!(p.removed != anchor);
            prop_assert!(p.child.contains(anchor));
            prop_assert!(g.is_connected_set(&p.child).unwrap());
        }
    }

    #[test]
    fn neighbourhoods_grow_with_radius(g in graph(12), pick in 0usize..12) {
        let seed = NodeSet::from([pick % g.num_nodes()]);
        let mut previous = l_hop_neighbors(&g, &seed, 0).unwrap();
        for hops in 1..5 {
            let next = l_hop_neighbors(&g, &seed, hops).unwrap();
            prop_assert_eq!(next.intersection_len(&previous), previous.len());
            previous = next;
        }
    }

    #[test]
    fn components_partition_the_nodes(g in graph(12)) {
        let parts = connected_components(&g, &g.all_nodes()).unwrap();
        let mut seen = vec![0; g.num_nodes()];
        for (i, part) in parts.iter().enumerate() {
            prop_assert!(g.is_connected_set(part).unwrap());
            if i > 0 {
                prop_assert!(part.len() <= parts[i - 1].len());
            }
            for v in part.iter() {
                seen[v] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        // no edge joins two different parts
        for &(u, v) in g.edges() {
            prop_assert!(parts.iter().any(|p| p.contains(u) && p.contains(v)));
        }
    }

    #[test]
    fn shapley_values_are_efficient(players in 1usize..7, values in proptest::collection::vec(-5.0f64..5.0, 64)) {
        let game = TableGame::from_fn(players, |m| if m == 0 { 0.0 } else { values[m] });
        let total: f64 = (0..players).map(|p| exact_shapley_value(&game, p).unwrap()).sum();
        prop_assert!((total - game.value_of_mask((1 << players) - 1)).abs() < 1e-9);
    }

    #[test]
    fn softmax_is_a_distribution(logits in proptest::collection::vec(-700.0f64..700.0, 1..8)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn graph_predictions_ignore_node_order(
        g in graph(9),
        seed in 0u64..1000,
        gin in any::<bool>(),
        max in any::<bool>(),
        shift in 1usize..9,
    ) {
        let (model_type, readout) = (
            if gin { ModelType::Gin } else { ModelType::Gcn },
            if max { Readout::Max } else { Readout::Mean },
        );
        let m = model(seed, model_type, readout);
        let n = g.num_nodes();
        // reflect, then rotate
        let perm: Vec<usize> = (0..n).map(|v| (shift + n - v) % n).collect();
        let mut feats = Array2::zeros((n, 3));
        for v in 0..n {
            feats.row_mut(perm[v]).assign(&g.features().row(v));
        }
        let moved = Graph::new(n, g.edges().iter().map(|&(u, v)| (perm[u], perm[v])), feats).unwrap();
        let a = Evaluator::new(&m, &g).unwrap().predict(None);
        let b = Evaluator::new(&m, &moved).unwrap().predict(None);
        for (x, y) in a.logits.iter().zip(&b.logits) {
            prop_assert!((x - y).abs() < 1e-9, "{:?} vs {:?}", a.logits, b.logits);
        }
    }

    #[test]
    fn weight_files_round_trip(seed in 0u64..10_000, gin in any::<bool>(), node in any::<bool>()) {
        let readout = if node { Readout::None } else { Readout::Max };
        let m = model(seed, if gin { ModelType::Gin } else { ModelType::Gcn }, readout);
        let back = weights::from_str(&weights::to_string(&m)).unwrap();
        prop_assert_eq!(back, m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn explanations_are_connected_and_bounded(g in graph(10), seed in 0u64..1000, n_min in 1usize..5) {
        let m = model(seed, ModelType::Gcn, Readout::Mean);
        let config = SearchConfig {
            iterations: 8,
            n_min,
            scorer: Scorer::ShapleyMc { samples: 10, hops: Some(2) },
            seed,
            ..SearchConfig::default()
        };
        let e = run_search(&m, &g, &config).unwrap();
        let root = connected_components(&g, &g.all_nodes()).unwrap().remove(0);
        prop_assert!(g.is_connected_set(&e.nodes).unwrap());
        prop_assert!(e.nodes.iter().all(|v| root.contains(v)));
        prop_assert!(e.nodes.len() <= n_min.max(1) || e.nodes == root);
        prop_assert!(e.per_size.windows(2).all(|w| w[0].size < w[1].size));
        let again = run_search(&m, &g, &config).unwrap();
        prop_assert_eq!(again, e);
    }

    #[test]
    fn node_explanations_keep_the_target(g in graph(10), seed in 0u64..1000, pick in 0usize..10) {
        let t = pick % g.num_nodes();
        let g = g.with_target_node(Some(t)).unwrap();
        let m = model(seed, ModelType::Gcn, Readout::None);
        let config = SearchConfig { iterations: 6, n_min: 2, seed, ..SearchConfig::default() };
        let e = run_search(&m, &g, &config).unwrap();
        prop_assert!(e.nodes.contains(t));
        prop_assert!(g.is_connected_set(&e.nodes).unwrap());
    }
}
