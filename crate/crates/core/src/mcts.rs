//! Monte Carlo tree search over connected subgraphs.
//!
//! States are node sets; an action removes one node and keeps the largest
//! remaining connected piece (for node tasks: the piece holding the target).
//! Every child is scored once when its parent is first expanded, and the
//! score of the leaf reached by an iteration is credited to every
//! (state, action) pair on its path.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gnn::{Evaluator, ModelError, ModelSpec};
use crate::graph::{connected_components, l_hop_neighbors, prune_actions_anchored, Graph, GraphError, NodeSet, PruneStrategy};
use crate::shapley::{Scorer, ShapleyError, SubgraphScorer};

/// Largest graph accepted by [`brute_force_best`].
pub const BRUTE_FORCE_MAX_NODES: usize = 12;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Shapley(#[from] ShapleyError),
    #[error("brute force is limited to {BRUTE_FORCE_MAX_NODES} nodes, graph has {0}")]
    TooLarge(usize),
    #[error("no connected subgraph with {size} nodes")]
    NoCandidate { size: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    /// Number of root-to-leaf iterations (M).
    pub iterations: usize,
    /// States with at most this many nodes are leaves (N_min).
    pub n_min: usize,
    /// Exploration weight λ.
    pub lambda: f64,
    pub strategy: PruneStrategy,
    pub scorer: Scorer,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            iterations: 20,
            n_min: 15,
            lambda: 10.0,
            strategy: PruneStrategy::default(),
            scorer: Scorer::ShapleyMc {
                samples: 100,
                hops: Some(3),
            },
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.iterations == 0 {
            return Err(SearchError::Config("iterations must be at least 1".into()));
        }
        if self.n_min == 0 {
            return Err(SearchError::Config("n_min must be at least 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(SearchError::Config(format!("lambda must be finite and non-negative, got {}", self.lambda)));
        }
        if self.strategy.k == Some(0) {
            return Err(SearchError::Config("k must be at least 1".into()));
        }
        match self.scorer {
            Scorer::ShapleyMc { samples: 0, .. } => Err(SearchError::Config("sample count must be at least 1".into())),
            _ => Ok(()),
        }
    }
}

/// Statistics of one (state, action) pair.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ActionStats {
    /// Visit count C.
    pub visits: u64,
    /// Total reward W.
    pub total: f64,
    /// Immediate score R of the child state.
    pub score: f64,
}

impl ActionStats {
    /// Mean reward Q = W / C, zero before the first visit.
    pub fn mean(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.total / self.visits as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    /// Index of the pruned node.
    pub action: usize,
    pub child: usize,
    pub stats: ActionStats,
}

#[derive(Clone, Debug)]
pub struct SearchNode {
    pub state: NodeSet,
    /// `None` until the state is first expanded.
    pub edges: Option<Vec<Edge>>,
}

/// Index of the action maximising `Q + λ·R·√(ΣC)/(1 + C)`; ties go to the
/// smallest pruned-node index.
///
/// # Panics
/// If `edges` is empty.
pub fn select_action(edges: &[Edge], lambda: f64) -> usize {
    assert!(!edges.is_empty(), "select_action needs at least one action");
    let total: u64 = edges.iter().map(|e| e.stats.visits).sum();
    let root = (total as f64).sqrt();
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, e) in edges.iter().enumerate() {
        let u = lambda * e.stats.score * root / (1.0 + e.stats.visits as f64);
        let value = e.stats.mean() + u;
        if value > best_value || (value == best_value && e.action < edges[best].action) {
            best = i;
            best_value = value;
        }
    }
    best
}

/// Search tree with canonical states: a node set reached along different
/// pruning orders is a single tree node.
#[derive(Clone, Debug, Default)]
pub struct SearchTree {
    nodes: Vec<SearchNode>,
    index: HashMap<NodeSet, usize>,
}

impl SearchTree {
    pub fn new(root: NodeSet) -> Self {
        let mut tree = SearchTree::default();
        tree.intern(root);
        tree
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn nodes(&self) -> &[SearchNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &SearchNode {
        &self.nodes[id]
    }

    pub fn find(&self, state: &NodeSet) -> Option<usize> {
        self.index.get(state).copied()
    }

    fn intern(&mut self, state: NodeSet) -> usize {
        if let Some(&id) = self.index.get(&state) {
            return id;
        }
        let id = self.nodes.len();
        self.index.insert(state.clone(), id);
        self.nodes.push(SearchNode { state, edges: None });
        id
    }

    /// Adds one visit and `leaf_score` to every `(node, edge)` pair listed.
    pub fn update_path(&mut self, path: &[(usize, usize)], leaf_score: f64) {
        for &(node, edge) in path {
            let stats = &mut self.nodes[node].edges.as_mut().expect("path nodes are expanded")[edge].stats;
            stats.visits += 1;
            stats.total += leaf_score;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizedSubgraph {
    pub size: usize,
    pub nodes: NodeSet,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub states_expanded: usize,
    pub states_scored: usize,
    pub forward_passes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub nodes: NodeSet,
    pub score: f64,
    pub sparsity: f64,
    pub predicted_class: usize,
    pub predicted_probability: f64,
    /// Best scored state of each size, ascending by size.
    pub per_size: Vec<SizedSubgraph>,
    pub diagnostics: Diagnostics,
}

impl Explanation {
    pub fn best_of_size(&self, size: usize) -> Option<&SizedSubgraph> {
        self.per_size.iter().find(|s| s.size == size)
    }
}

/// Node count that sparsity is measured against: the whole graph, or for
/// node-level models the target's computation graph.
pub fn reference_size(model: &ModelSpec, g: &Graph) -> Result<usize, SearchError> {
    Ok(task(model, g)?.reference)
}

/// Where the search starts and which node must survive pruning.
struct Task {
    root: NodeSet,
    anchor: Option<usize>,
    reference: usize,
}

fn task(model: &ModelSpec, g: &Graph) -> Result<Task, SearchError> {
    if model.is_node_level() {
        let target = g.target_node().ok_or(ModelError::MissingTarget)?;
        let seed = NodeSet::from([target]);
        let root = l_hop_neighbors(g, &seed, model.num_layers())?.union(&seed);
        Ok(Task {
            reference: root.len(),
            root,
            anchor: Some(target),
        })
    } else {
        let largest = connected_components(g, &g.all_nodes())?.into_iter().next();
        Ok(Task {
            root: largest.unwrap_or_default(),
            anchor: None,
            reference: g.num_nodes(),
        })
    }
}

/// Higher score wins; equal scores go to the smaller node set, then the
/// lexicographically smaller one.
fn better(score: f64, nodes: &NodeSet, than_score: f64, than: &NodeSet) -> bool {
    score > than_score || (score == than_score && (nodes.len(), nodes) < (than.len(), than))
}

struct Run<'s, 'e, 'a> {
    config: &'s SearchConfig,
    graph: &'a Graph,
    scorer: SubgraphScorer<'e, 'a>,
    anchor: Option<usize>,
    tree: SearchTree,
    scores: HashMap<usize, f64>,
    expanded: usize,
}

impl Run<'_, '_, '_> {
    fn score(&mut self, id: usize) -> Result<f64, SearchError> {
        if let Some(&s) = self.scores.get(&id) {
            return Ok(s);
        }
        let s = self.scorer.score(&self.tree.nodes[id].state)?.value;
        self.scores.insert(id, s);
        Ok(s)
    }

    fn expand(&mut self, id: usize) -> Result<(), SearchError> {
        if self.tree.nodes[id].edges.is_some() {
            return Ok(());
        }
        let children = prune_actions_anchored(self.graph, &self.tree.nodes[id].state, self.config.strategy, self.anchor)?;
        let mut edges = Vec::with_capacity(children.len());
        for p in children {
            let child = self.tree.intern(p.child);
            let score = self.score(child)?;
            edges.push(Edge {
                action: p.removed,
                child,
                stats: ActionStats {
                    score,
                    ..ActionStats::default()
                },
            });
        }
        self.tree.nodes[id].edges = Some(edges);
        self.expanded += 1;
        Ok(())
    }

    /// One selection walk from the root; returns the leaf reached.
    fn iterate(&mut self) -> Result<usize, SearchError> {
        let mut path = Vec::new();
        let mut current = self.tree.root();
        while self.tree.nodes[current].state.len() > self.config.n_min {
            self.expand(current)?;
            let edges = self.tree.nodes[current].edges.as_ref().expect("just expanded");
            if edges.is_empty() {
                break;
            }
            let pick = select_action(edges, self.config.lambda);
            path.push((current, pick));
            current = edges[pick].child;
        }
        let leaf_score = self.score(current)?;
        self.tree.update_path(&path, leaf_score);
        Ok(current)
    }
}

/// Searches for the highest-scoring connected subgraph explaining the
/// model's prediction on `g` (for node-level models: on `g`'s target node).
pub fn run_search(model: &ModelSpec, g: &Graph, config: &SearchConfig) -> Result<Explanation, SearchError> {
    Ok(search(model, g, config)?.0)
}

/// [`run_search`] that also hands back the final tree.
pub fn search(model: &ModelSpec, g: &Graph, config: &SearchConfig) -> Result<(Explanation, SearchTree), SearchError> {
    config.validate()?;
    let evaluator = Evaluator::new(model, g)?;
    let prediction = evaluator.predict(None);
    let class = prediction.predicted_class;
    let Task { root, anchor, reference } = task(model, g)?;
    if root.is_empty() {
        return Err(GraphError::EmptySeed.into());
    }
    let protected = anchor.map(|a| NodeSet::from([a])).unwrap_or_default();
    let mut run = Run {
        config,
        graph: g,
        scorer: SubgraphScorer::new(&evaluator, config.scorer, class, protected, config.seed),
        anchor,
        tree: SearchTree::new(root),
        scores: HashMap::new(),
        expanded: 0,
    };

    let mut best_leaf: Option<(f64, usize)> = None;
    for _ in 0..config.iterations {
        let leaf = run.iterate()?;
        let score = run.scores[&leaf];
        let state = &run.tree.nodes[leaf].state;
        let replace = match best_leaf {
            None => true,
            Some((s, id)) => better(score, state, s, &run.tree.nodes[id].state),
        };
        if replace {
            best_leaf = Some((score, leaf));
        }
    }
    let (score, leaf) = best_leaf.expect("at least one iteration");

    let mut per_size: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for (&id, &s) in &run.scores {
        let state = &run.tree.nodes[id].state;
        let entry = per_size.entry(state.len()).or_insert((s, id));
        if better(s, state, entry.0, &run.tree.nodes[entry.1].state) {
            *entry = (s, id);
        }
    }
    let per_size = per_size
        .into_iter()
        .map(|(size, (score, id))| SizedSubgraph {
            size,
            nodes: run.tree.nodes[id].state.clone(),
            score,
        })
        .collect();

    let nodes = run.tree.nodes[leaf].state.clone();
    let explanation = Explanation {
        sparsity: 1.0 - nodes.len() as f64 / reference as f64,
        score,
        predicted_class: class,
        predicted_probability: prediction.probability(class),
        per_size,
        diagnostics: Diagnostics {
            iterations: config.iterations,
            states_expanded: run.expanded,
            states_scored: run.scores.len(),
            forward_passes: run.scorer.forward_passes(),
        },
        nodes,
    };
    Ok((explanation, run.tree))
}

/// Exhaustive search over every connected subgraph with `size` nodes (for
/// node-level models: those holding the target). Ties go to the
/// lexicographically smallest node set.
pub fn brute_force_best(model: &ModelSpec, g: &Graph, size: usize, scorer: Scorer) -> Result<(NodeSet, f64), SearchError> {
    let n = g.num_nodes();
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(SearchError::TooLarge(n));
    }
    let evaluator = Evaluator::new(model, g)?;
    let class = evaluator.predict(None).predicted_class;
    let anchor = if model.is_node_level() {
        Some(g.target_node().ok_or(ModelError::MissingTarget)?)
    } else {
        None
    };
    let protected = anchor.map(|a| NodeSet::from([a])).unwrap_or_default();
    let scorer = SubgraphScorer::new(&evaluator, scorer, class, protected, 0);
    let mut best: Option<(NodeSet, f64)> = None;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != size {
            continue;
        }
        let nodes: NodeSet = (0..n).filter(|&v| mask & (1 << v) != 0).collect();
        if anchor.is_some_and(|a| !nodes.contains(a)) || !g.is_connected_set(&nodes)? {
            continue;
        }
        let score = scorer.score(&nodes)?.value;
        // masks are visited in increasing binary order, which is not
        // lexicographic order of the sets, so compare explicitly
        let replace = match &best {
            None => true,
            Some((b, s)) => score > *s || (score == *s && nodes < *b),
        };
        if replace {
            best = Some((nodes, score));
        }
    }
    best.ok_or(SearchError::NoCandidate { size })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::{Architecture, ModelType, Readout};
    use crate::graph::PruneOrder;

    fn edge(action: usize, visits: u64, total: f64, score: f64) -> Edge {
        Edge {
            action,
            child: action,
            stats: ActionStats { visits, total, score },
        }
    }

    fn model(readout: Readout, seed: u64) -> ModelSpec {
        ModelSpec::init(&Architecture::three_layer(ModelType::Gcn, 2, 2, readout), seed).unwrap()
    }

    fn exact(n_min: usize, iterations: usize) -> SearchConfig {
        SearchConfig {
            iterations,
            n_min,
            lambda: 10.0,
            strategy: PruneStrategy::unlimited(PruneOrder::Low2high),
            scorer: Scorer::ShapleyExact { hops: None },
            seed: 5,
        }
    }

    #[test]
    fn selection_examples() {
        let zero = [edge(4, 0, 0.0, 0.0), edge(2, 0, 0.0, 0.0), edge(7, 0, 0.0, 0.0)];
        assert_eq!(zero[select_action(&zero, 10.0)].action, 2);
        let greedy = [edge(0, 3, 0.0, 0.9), edge(1, 3, 3.0, 0.1), edge(2, 3, 0.0, 0.9)];
        assert_eq!(select_action(&greedy, 0.0), 1);
        // 0.5 + 10·0.1·√11/11 ≈ 0.80 against 0.4 + 10·0.9·√11/2 ≈ 15.32
        let pair = [edge(0, 10, 5.0, 0.1), edge(1, 1, 0.4, 0.9)];
        assert_eq!(select_action(&pair, 10.0), 1);
    }

    #[test]
    fn path_updates() {
        let mut tree = SearchTree::new(NodeSet::from([0, 1]));
        tree.nodes[0].edges = Some(vec![edge(0, 0, 0.0, 0.2)]);
        tree.update_path(&[(0, 0)], 0.7);
        let stats = tree.node(0).edges.as_ref().unwrap()[0].stats;
        assert_eq!((stats.visits, stats.total, stats.mean()), (1, 0.7, 0.7));
        tree.update_path(&[(0, 0)], 0.3);
        let stats = tree.node(0).edges.as_ref().unwrap()[0].stats;
        assert_eq!(stats.visits, 2);
        assert!((stats.total - 1.0).abs() < 1e-15 && (stats.mean() - 0.5).abs() < 1e-15);
        tree.update_path(&[], 0.9);
        assert_eq!(tree.node(0).edges.as_ref().unwrap()[0].stats.visits, 2);
    }

    #[test]
    fn small_root_is_its_own_explanation() {
        let g = Graph::with_unit_features(3, [(0, 1), (1, 2)], 2).unwrap();
        let m = model(Readout::Max, 1);
        let e = run_search(&m, &g, &exact(5, 1)).unwrap();
        assert_eq!(e.nodes, g.all_nodes());
        assert_eq!(e.sparsity, 0.0);
        assert_eq!(e.diagnostics.states_expanded, 0);
        let (_, score) = brute_force_best(&m, &g, 3, Scorer::ShapleyExact { hops: None }).unwrap();
        assert_eq!(e.score, score);
    }

    #[test]
    fn triangle_finds_best_single_node() {
        let g = Graph::new(3, [(0, 1), (1, 2), (0, 2)], ndarray::array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        for seed in 0..4 {
            let m = model(Readout::Mean, seed);
            let e = run_search(&m, &g, &exact(1, 50)).unwrap();
            assert_eq!(e.nodes.len(), 1);
            let (best, score) = brute_force_best(&m, &g, 1, Scorer::ShapleyExact { hops: None }).unwrap();
            assert_eq!(e.score, score, "seed {seed}: {} vs {best}", e.nodes);
        }
    }

    #[test]
    fn brute_force_counts() {
        let cycle4 = Graph::with_unit_features(4, (0..4).map(|i| (i, (i + 1) % 4)), 2).unwrap();
        let connected_pairs = (0u32..16)
            .filter(|m| m.count_ones() == 2)
            .map(|m| (0..4).filter(|v| m & (1 << v) != 0).collect::<NodeSet>())
            .filter(|s| cycle4.is_connected_set(s).unwrap())
            .count();
        assert_eq!(connected_pairs, 4);
        let m = model(Readout::Max, 2);
        let (whole, _) = brute_force_best(&m, &cycle4, 4, Scorer::Direct).unwrap();
        assert_eq!(whole, cycle4.all_nodes());
        let big = Graph::with_unit_features(13, (0..12).map(|i| (i, i + 1)), 2).unwrap();
        assert!(matches!(brute_force_best(&m, &big, 3, Scorer::Direct), Err(SearchError::TooLarge(13))));
    }

    #[test]
    fn visit_counts_balance() {
        let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (2, 5), (5, 6), (6, 7), (1, 8)];
        let g = Graph::with_unit_features(9, edges, 2).unwrap();
        let m = model(Readout::Max, 3);
        let config = SearchConfig {
            iterations: 30,
            n_min: 3,
            scorer: Scorer::ShapleyMc {
                samples: 20,
                hops: Some(2),
            },
            ..SearchConfig::default()
        };
        let (e, tree) = search(&m, &g, &config).unwrap();
        let mut incoming = vec![0u64; tree.nodes().len()];
        for node in tree.nodes() {
            assert!(g.is_connected_set(&node.state).unwrap());
            for edge in node.edges.iter().flatten() {
                incoming[edge.child] += edge.stats.visits;
                assert!(tree.node(edge.child).state.len() < node.state.len());
            }
        }
        for (id, node) in tree.nodes().iter().enumerate() {
            let out: u64 = node.edges.iter().flatten().map(|e| e.stats.visits).sum();
            if id == tree.root() {
                assert_eq!(out, 30);
            } else if node.edges.is_some() {
                assert_eq!(out, incoming[id]);
            }
        }
        assert!(e.nodes.len() <= 3);
        assert!(e.per_size.iter().any(|s| s.nodes == e.nodes && s.score >= e.score));
        assert_eq!(run_search(&m, &g, &config).unwrap(), e);
    }

    #[test]
    fn node_task_keeps_target() {
        let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (2, 7)];
        let g = Graph::with_unit_features(8, edges, 2)
            .unwrap()
            .with_target_node(Some(4))
            .unwrap();
        let arch = Architecture::three_layer(ModelType::Gcn, 2, 2, Readout::None);
        let m = ModelSpec::init(&arch, 4).unwrap();
        let e = run_search(&m, &g, &exact(2, 20)).unwrap();
        assert!(e.nodes.contains(4));
        for s in &e.per_size {
            assert!(s.nodes.contains(4));
            // node 0 is four hops away, outside the computation graph
            assert!(!s.nodes.contains(0));
        }
    }

    #[test]
    fn rejects_bad_config() {
        let g = Graph::with_unit_features(2, [(0, 1)], 2).unwrap();
        let m = model(Readout::Max, 1);
        for config in [
            SearchConfig { iterations: 0, ..SearchConfig::default() },
            SearchConfig { n_min: 0, ..SearchConfig::default() },
            SearchConfig { lambda: -1.0, ..SearchConfig::default() },
        ] {
            assert!(matches!(run_search(&m, &g, &config), Err(SearchError::Config(_))));
        }
    }
}
