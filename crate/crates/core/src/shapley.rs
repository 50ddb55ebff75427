//! Shapley scoring of a candidate subgraph.
//!
//! The candidate subgraph is one player; the other players are single
//! nodes, either every node outside the subgraph or only those within `L`
//! hops of it. The value of a coalition is the model's probability for the
//! target class when every node outside the coalition (and outside the
//! protected set) has its features zeroed.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::derive_seed;
use crate::gnn::Evaluator;
use crate::graph::{l_hop_neighbors, GraphError, NodeSet};

/// Largest player count accepted by exact enumeration.
pub const MAX_EXACT_PLAYERS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapleyError {
    #[error("subgraph is empty")]
    EmptySubgraph,
    #[error("{players} players exceed the exact-enumeration limit of {max}")]
    TooManyPlayers { players: usize, max: usize },
    #[error("coalition already contains the target player")]
    TargetInCoalition,
    #[error("coalition has {found} entries, game has {expected} players")]
    CoalitionSize { expected: usize, found: usize },
    #[error("class {class} out of range for {num_classes} classes")]
    ClassRange { class: usize, num_classes: usize },
    #[error("players overlap")]
    OverlappingPlayers,
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A cooperative game over players `0..num_players()`.
pub trait CooperativeGame {
    fn num_players(&self) -> usize;

    /// Worth of the coalition whose members are flagged `true`.
    fn value(&self, members: &[bool]) -> f64;
}

/// Game given by an explicit value table indexed by member bitmask.
#[derive(Clone, Debug, PartialEq)]
pub struct TableGame {
    players: usize,
    values: Vec<f64>,
}

impl TableGame {
    pub fn new(players: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), 1 << players, "table needs 2^players entries");
        TableGame { players, values }
    }

    pub fn from_fn(players: usize, f: impl Fn(usize) -> f64) -> Self {
        TableGame::new(players, (0..1usize << players).map(f).collect())
    }

    pub fn value_of_mask(&self, mask: usize) -> f64 {
        self.values[mask]
    }
}

impl CooperativeGame for TableGame {
    fn num_players(&self) -> usize {
        self.players
    }

    fn value(&self, members: &[bool]) -> f64 {
        let mask = members
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .fold(0usize, |acc, (i, _)| acc | (1 << i));
        self.values[mask]
    }
}

/// `|S|! (n - |S| - 1)! / n!` for every coalition size `|S|` in `0..n`.
fn shapley_weights(n: usize) -> Vec<f64> {
    // w(s) = 1 / (n * C(n-1, s)), built incrementally to stay exact-ish
    let mut weights = Vec::with_capacity(n);
    let mut binom = 1.0f64;
    for s in 0..n {
        weights.push(1.0 / (n as f64 * binom));
        binom = binom * (n - 1 - s) as f64 / (s + 1) as f64;
    }
    weights
}

/// Exact Shapley value of `player` by enumerating every coalition of the
/// other players.
pub fn exact_shapley_value<G: CooperativeGame + ?Sized>(game: &G, player: usize) -> Result<f64, ShapleyError> {
    let n = game.num_players();
    if n > MAX_EXACT_PLAYERS {
        return Err(ShapleyError::TooManyPlayers {
            players: n,
            max: MAX_EXACT_PLAYERS,
        });
    }
    let others: Vec<usize> = (0..n).filter(|&p| p != player).collect();
    let weights = shapley_weights(n);
    let mut members = vec![false; n];
    let mut total = 0.0;
    for mask in 0..1usize << others.len() {
        for (bit, &p) in others.iter().enumerate() {
            members[p] = mask & (1 << bit) != 0;
        }
        members[player] = false;
        let without = game.value(&members);
        members[player] = true;
        let with = game.value(&members);
        total += weights[mask.count_ones() as usize] * (with - without);
    }
    Ok(total)
}

/// Permutation-sampling estimate of `player`'s Shapley value. Sample `t`
/// draws a uniform permutation from its own RNG stream derived from
/// `(seed, t)`; the coalition is the players preceding `player`.
pub fn sampled_shapley_value<G: CooperativeGame + ?Sized>(game: &G, player: usize, samples: usize, seed: u64) -> f64 {
    let n = game.num_players();
    let mut order: Vec<usize> = (0..n).collect();
    let mut members = vec![false; n];
    let mut total = 0.0;
    for t in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
        order.sort_unstable();
        order.shuffle(&mut rng);
        members.fill(false);
        for &p in order.iter().take_while(|&&p| p != player) {
            members[p] = true;
        }
        let without = game.value(&members);
        members[player] = true;
        let with = game.value(&members);
        total += with - without;
    }
    total / samples as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    ExactFull,
    ExactReduced,
    MonteCarlo,
    Direct,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreEstimate {
    pub value: f64,
    pub num_samples: usize,
    pub estimator: Estimator,
}

/// Memo of target-class probabilities keyed by the active node set, shared
/// by every game of one explanation run.
#[derive(Debug, Default)]
pub struct ValueCache {
    values: Mutex<HashMap<(usize, Vec<u64>), f64>>,
    misses: AtomicUsize,
}

impl ValueCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of forward passes actually run.
    pub fn forward_passes(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.values.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn probability(&self, evaluator: &Evaluator, class: usize, active: &[bool]) -> f64 {
        let key = (class, pack(active));
        if let Some(&v) = self.values.lock().expect("cache lock").get(&key) {
            return v;
        }
        let v = evaluator.predict(Some(active)).probability(class);
        self.misses.fetch_add(1, Ordering::Relaxed);
        self.values.lock().expect("cache lock").insert(key, v);
        v
    }
}

fn pack(active: &[bool]) -> Vec<u64> {
    let mut words = vec![0u64; active.len().div_ceil(64)];
    for (i, _) in active.iter().enumerate().filter(|(_, &a)| a) {
        words[i / 64] |= 1 << (i % 64);
    }
    words
}

/// The subgraph game: player 0 is the target subgraph, players `1..` are
/// single outside nodes.
pub struct CoalitionGame<'e, 'a> {
    evaluator: &'e Evaluator<'a>,
    cache: &'e ValueCache,
    target_subgraph: NodeSet,
    other_players: Vec<NodeSet>,
    target_class: usize,
    protected: NodeSet,
    reduced: bool,
}

/// Index of the target subgraph among the players.
pub const TARGET_PLAYER: usize = 0;

impl<'e, 'a> CoalitionGame<'e, 'a> {
    pub fn new(
        evaluator: &'e Evaluator<'a>,
        cache: &'e ValueCache,
        target_subgraph: NodeSet,
        other_players: Vec<NodeSet>,
        target_class: usize,
        protected: NodeSet,
    ) -> Result<Self, ShapleyError> {
        let g = evaluator.graph();
        if target_subgraph.is_empty() {
            return Err(ShapleyError::EmptySubgraph);
        }
        let num_classes = evaluator.model().num_classes();
        if target_class >= num_classes {
            return Err(ShapleyError::ClassRange {
                class: target_class,
                num_classes,
            });
        }
        g.check_nodes(&target_subgraph)?;
        g.check_nodes(&protected)?;
        let mut seen = target_subgraph.to_mask(g.num_nodes());
        for player in &other_players {
            for v in player.iter() {
                g.check_node(v)?;
                if std::mem::replace(&mut seen[v], true) {
                    return Err(ShapleyError::OverlappingPlayers);
                }
            }
        }
        Ok(CoalitionGame {
            evaluator,
            cache,
            target_subgraph,
            other_players,
            target_class,
            protected,
            reduced: false,
        })
    }

    pub fn target_subgraph(&self) -> &NodeSet {
        &self.target_subgraph
    }

    pub fn other_players(&self) -> &[NodeSet] {
        &self.other_players
    }

    pub fn target_class(&self) -> usize {
        self.target_class
    }

    pub fn protected(&self) -> &NodeSet {
        &self.protected
    }

    fn player_nodes(&self, index: usize) -> &NodeSet {
        if index == TARGET_PLAYER {
            &self.target_subgraph
        } else {
            &self.other_players[index - 1]
        }
    }

    /// Target-class probability with only the coalition's nodes (and the
    /// protected nodes) keeping their features.
    pub fn value_function(&self, members: &[bool]) -> Result<f64, ShapleyError> {
        if members.len() != self.num_players() {
            return Err(ShapleyError::CoalitionSize {
                expected: self.num_players(),
                found: members.len(),
            });
        }
        Ok(self.value(members))
    }

    /// `v(S ∪ {target}) − v(S)`.
    pub fn marginal_contribution(&self, coalition: &[bool]) -> Result<f64, ShapleyError> {
        if coalition.len() != self.num_players() {
            return Err(ShapleyError::CoalitionSize {
                expected: self.num_players(),
                found: coalition.len(),
            });
        }
        if coalition[TARGET_PLAYER] {
            return Err(ShapleyError::TargetInCoalition);
        }
        let mut with = coalition.to_vec();
        with[TARGET_PLAYER] = true;
        Ok(self.value(&with) - self.value(coalition))
    }

    pub fn exact_shapley(&self) -> Result<ScoreEstimate, ShapleyError> {
        Ok(ScoreEstimate {
            value: exact_shapley_value(self, TARGET_PLAYER)?,
            num_samples: 1 << (self.num_players() - 1),
            estimator: if self.reduced {
                Estimator::ExactReduced
            } else {
                Estimator::ExactFull
            },
        })
    }

    pub fn mc_shapley(&self, samples: usize, seed: u64) -> Result<ScoreEstimate, ShapleyError> {
        if samples == 0 {
            return Err(ShapleyError::NoSamples);
        }
        Ok(ScoreEstimate {
            value: sampled_shapley_value(self, TARGET_PLAYER, samples, seed),
            num_samples: samples,
            estimator: Estimator::MonteCarlo,
        })
    }
}

impl CooperativeGame for CoalitionGame<'_, '_> {
    fn num_players(&self) -> usize {
        1 + self.other_players.len()
    }

    fn value(&self, members: &[bool]) -> f64 {
        let n = self.evaluator.graph().num_nodes();
        let mut active = self.protected.to_mask(n);
        for (i, _) in members.iter().enumerate().filter(|(_, &m)| m) {
            for v in self.player_nodes(i).iter() {
                active[v] = true;
            }
        }
        self.cache.probability(self.evaluator, self.target_class, &active)
    }
}

/// Game whose co-players are the nodes within `hops` of `subgraph`
/// (`None`: every node outside it). Protected nodes never become players.
pub fn build_reduced_game<'e, 'a>(
    evaluator: &'e Evaluator<'a>,
    cache: &'e ValueCache,
    subgraph: &NodeSet,
    target_class: usize,
    hops: Option<usize>,
    protected: &NodeSet,
) -> Result<CoalitionGame<'e, 'a>, ShapleyError> {
    if subgraph.is_empty() {
        return Err(ShapleyError::EmptySubgraph);
    }
    let g = evaluator.graph();
    let outside: Vec<usize> = match hops {
        Some(l) => l_hop_neighbors(g, subgraph, l)?.into_vec(),
        None => (0..g.num_nodes()).filter(|&v| !subgraph.contains(v)).collect(),
    };
    let others = outside
        .into_iter()
        .filter(|&v| !protected.contains(v))
        .map(|v| NodeSet::from([v]))
        .collect();
    let mut game = CoalitionGame::new(evaluator, cache, subgraph.clone(), others, target_class, protected.clone())?;
    game.reduced = hops.is_some();
    Ok(game)
}

/// Probability of `target_class` when only `subgraph` (and `protected`)
/// keep their features.
pub fn direct_score(
    evaluator: &Evaluator,
    cache: &ValueCache,
    subgraph: &NodeSet,
    target_class: usize,
    protected: &NodeSet,
) -> Result<ScoreEstimate, ShapleyError> {
    let game = CoalitionGame::new(evaluator, cache, subgraph.clone(), Vec::new(), target_class, protected.clone())?;
    Ok(ScoreEstimate {
        value: game.value(&[true]),
        num_samples: 1,
        estimator: Estimator::Direct,
    })
}

/// How candidate subgraphs are scored during search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scorer {
    /// Permutation-sampled Shapley value; `hops: None` uses every node as a player.
    ShapleyMc { samples: usize, hops: Option<usize> },
    ShapleyExact { hops: Option<usize> },
    /// The subgraph's own predicted probability.
    Direct,
}

impl Scorer {
    pub fn name(&self) -> &'static str {
        match self {
            Scorer::ShapleyMc { .. } => "shapley-mc",
            Scorer::ShapleyExact { .. } => "shapley-exact",
            Scorer::Direct => "direct",
        }
    }
}

/// Stable 64-bit fingerprint of a node set (FNV-1a over the indices).
pub fn fingerprint(nodes: &NodeSet) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in nodes.iter() {
        for byte in (v as u64).to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Scores node sets of one graph for one target class. Monte-Carlo seeds
/// are derived from the run seed and the node set, so a score depends only
/// on the set being scored.
pub struct SubgraphScorer<'e, 'a> {
    evaluator: &'e Evaluator<'a>,
    cache: ValueCache,
    scorer: Scorer,
    target_class: usize,
    protected: NodeSet,
    seed: u64,
}

impl<'e, 'a> SubgraphScorer<'e, 'a> {
    pub fn new(evaluator: &'e Evaluator<'a>, scorer: Scorer, target_class: usize, protected: NodeSet, seed: u64) -> Self {
        SubgraphScorer {
            evaluator,
            cache: ValueCache::new(),
            scorer,
            target_class,
            protected,
            seed,
        }
    }

    pub fn scorer(&self) -> Scorer {
        self.scorer
    }

    pub fn target_class(&self) -> usize {
        self.target_class
    }

    pub fn protected(&self) -> &NodeSet {
        &self.protected
    }

    pub fn forward_passes(&self) -> usize {
        self.cache.forward_passes()
    }

    pub fn score(&self, subgraph: &NodeSet) -> Result<ScoreEstimate, ShapleyError> {
        match self.scorer {
            Scorer::Direct => direct_score(self.evaluator, &self.cache, subgraph, self.target_class, &self.protected),
            Scorer::ShapleyExact { hops } => build_reduced_game(
                self.evaluator,
                &self.cache,
                subgraph,
                self.target_class,
                hops,
                &self.protected,
            )?
            .exact_shapley(),
            Scorer::ShapleyMc { samples, hops } => build_reduced_game(
                self.evaluator,
                &self.cache,
                subgraph,
                self.target_class,
                hops,
                &self.protected,
            )?
            .mc_shapley(samples, derive_seed(self.seed, fingerprint(subgraph))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::{Architecture, LayerSpec, Linear, ModelSpec, ModelType, Readout};
    use crate::graph::Graph;
    use ndarray::{Array1, Array2};

    fn two_player() -> TableGame {
        // v(∅)=0, v({a})=1, v({b})=2, v({a,b})=4
        TableGame::new(2, vec![0.0, 1.0, 2.0, 4.0])
    }

    #[test]
    fn two_player_exact() {
        assert!((exact_shapley_value(&two_player(), 0).unwrap() - 1.5).abs() < 1e-15);
        assert!((exact_shapley_value(&two_player(), 1).unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn two_player_sampled_converges() {
        let est = sampled_shapley_value(&two_player(), 0, 10_000, 42);
        assert!((est - 1.5).abs() < 0.05, "{est}");
        assert_eq!(est, sampled_shapley_value(&two_player(), 0, 10_000, 42));
    }

    #[test]
    fn dummy_and_single_player() {
        // player 0 never changes the value
        let game = TableGame::from_fn(3, |m| (m >> 1) as f64 * 0.3);
        assert_eq!(exact_shapley_value(&game, 0).unwrap(), 0.0);
        let one = TableGame::new(1, vec![0.25, 0.75]);
        assert_eq!(exact_shapley_value(&one, 0).unwrap(), 0.5);
        for t in [1, 7] {
            assert_eq!(sampled_shapley_value(&one, 0, t, 3), 0.5);
        }
    }

    #[test]
    fn weights_sum_to_one_over_coalitions() {
        for n in 1..12usize {
            let w = shapley_weights(n);
            let mut binom = 1.0;
            let mut total = 0.0;
            for (s, ws) in w.iter().enumerate() {
                total += ws * binom;
                binom = binom * (n - 1 - s) as f64 / (s + 1) as f64;
            }
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_cap() {
        let game = TableGame::from_fn(MAX_EXACT_PLAYERS, |_| 0.0);
        assert!(exact_shapley_value(&game, 0).is_ok());
        struct Big;
        impl CooperativeGame for Big {
            fn num_players(&self) -> usize {
                21
            }
            fn value(&self, _: &[bool]) -> f64 {
                0.0
            }
        }
        assert_eq!(
            exact_shapley_value(&Big, 0).unwrap_err(),
            ShapleyError::TooManyPlayers { players: 21, max: 20 }
        );
    }

    fn cycle(n: usize) -> Graph {
        Graph::with_unit_features(n, (0..n).map(|i| (i, (i + 1) % n)), 2).unwrap()
    }

    fn path(n: usize) -> Graph {
        Graph::with_unit_features(n, (0..n - 1).map(|i| (i, i + 1)), 2).unwrap()
    }

    fn random_model() -> ModelSpec {
        ModelSpec::init(&Architecture::three_layer(ModelType::Gcn, 2, 2, Readout::Mean), 3).unwrap()
    }

    fn constant_model() -> ModelSpec {
        let w = Array2::from_shape_fn((2, 3), |(i, j)| (i + j) as f64);
        ModelSpec::new(
            ModelType::Gcn,
            vec![LayerSpec::Gcn { weight: w, bias: None }],
            Readout::Max,
            Linear {
                weight: Array2::zeros((3, 3)),
                bias: Array1::zeros(3),
            },
        )
        .unwrap()
    }

    #[test]
    fn reduced_game_players() {
        let model = random_model();
        let cache = ValueCache::new();
        let g = cycle(5);
        let ev = Evaluator::new(&model, &g).unwrap();
        let game = build_reduced_game(&ev, &cache, &NodeSet::from([0]), 0, Some(1), &NodeSet::new()).unwrap();
        assert_eq!(game.other_players(), &[NodeSet::from([1]), NodeSet::from([4])]);
        let whole = build_reduced_game(&ev, &cache, &g.all_nodes(), 0, Some(3), &NodeSet::new()).unwrap();
        assert!(whole.other_players().is_empty());

        let g = path(7);
        let ev = Evaluator::new(&model, &g).unwrap();
        let game = build_reduced_game(&ev, &cache, &NodeSet::from([3]), 0, Some(3), &NodeSet::new()).unwrap();
        assert_eq!(game.other_players().len(), 6);
        let near = build_reduced_game(&ev, &cache, &NodeSet::from([0]), 0, Some(2), &NodeSet::new()).unwrap();
        assert_eq!(near.other_players().len(), 2);
        let all = build_reduced_game(&ev, &cache, &NodeSet::from([0]), 0, None, &NodeSet::new()).unwrap();
        assert_eq!(all.other_players().len(), 6);
        assert!(matches!(
            build_reduced_game(&ev, &cache, &NodeSet::new(), 0, Some(1), &NodeSet::new()),
            Err(ShapleyError::EmptySubgraph)
        ));
    }

    #[test]
    fn protected_nodes_are_not_players() {
        let model = random_model();
        let cache = ValueCache::new();
        let g = path(5);
        let ev = Evaluator::new(&model, &g).unwrap();
        let game = build_reduced_game(&ev, &cache, &NodeSet::from([1]), 0, Some(2), &NodeSet::from([2])).unwrap();
        assert_eq!(game.other_players(), &[NodeSet::from([0]), NodeSet::from([3])]);
    }

    #[test]
    fn value_function_examples() {
        let model = random_model();
        let cache = ValueCache::new();
        let g = cycle(5);
        let ev = Evaluator::new(&model, &g).unwrap();
        let game = build_reduced_game(&ev, &cache, &NodeSet::from([0, 1]), 1, None, &NodeSet::new()).unwrap();
        let full = crate::gnn::forward(&model, &g, None).unwrap();
        let all = vec![true; game.num_players()];
        assert_eq!(game.value_function(&all).unwrap(), full.probabilities[1]);
        let none = vec![false; game.num_players()];
        let zeroed = crate::gnn::forward(&model, &g, Some(&NodeSet::new())).unwrap();
        assert_eq!(game.value_function(&none).unwrap(), zeroed.probabilities[1]);
        assert!(game.value_function(&[true]).is_err());

        let m = game.marginal_contribution(&none).unwrap();
        assert!(m.abs() <= 1.0);
        assert_eq!(game.marginal_contribution(&all).unwrap_err(), ShapleyError::TargetInCoalition);
    }

    #[test]
    fn constant_model_is_uniform_and_dummy() {
        let model = constant_model();
        let cache = ValueCache::new();
        let g = cycle(5);
        let ev = Evaluator::new(&model, &g).unwrap();
        let game = build_reduced_game(&ev, &cache, &NodeSet::from([2]), 0, Some(2), &NodeSet::new()).unwrap();
        for mask in 0..1usize << game.num_players() {
            let members: Vec<bool> = (0..game.num_players()).map(|i| mask & (1 << i) != 0).collect();
            assert!((game.value_function(&members).unwrap() - 1.0 / 3.0).abs() < 1e-15);
            if !members[0] {
                assert_eq!(game.marginal_contribution(&members).unwrap(), 0.0);
            }
        }
        assert_eq!(game.exact_shapley().unwrap().value, 0.0);
        let direct = direct_score(&ev, &cache, &NodeSet::from([1, 2]), 2, &NodeSet::new()).unwrap();
        assert!((direct.value - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn direct_score_on_full_graph_matches_prediction() {
        let model = random_model();
        let cache = ValueCache::new();
        let g = cycle(6);
        let ev = Evaluator::new(&model, &g).unwrap();
        let p = crate::gnn::forward(&model, &g, None).unwrap();
        let s = direct_score(&ev, &cache, &g.all_nodes(), p.predicted_class, &NodeSet::new()).unwrap();
        assert_eq!(s.value, p.probabilities[p.predicted_class]);
        assert!((0.0..=1.0).contains(&s.value));
    }

    #[test]
    fn mc_with_no_coplayers_is_exact() {
        let model = random_model();
        let cache = ValueCache::new();
        let g = cycle(4);
        let ev = Evaluator::new(&model, &g).unwrap();
        let game = build_reduced_game(&ev, &cache, &g.all_nodes(), 0, Some(3), &NodeSet::new()).unwrap();
        let exact = game.value_function(&[true]).unwrap() - game.value_function(&[false]).unwrap();
        assert_eq!(game.mc_shapley(5, 1).unwrap().value, exact);
        assert_eq!(game.exact_shapley().unwrap().value, exact);
        assert_eq!(game.mc_shapley(0, 1).unwrap_err(), ShapleyError::NoSamples);
    }

    #[test]
    fn cache_counts_distinct_forward_passes() {
        let model = random_model();
        let g = cycle(5);
        let ev = Evaluator::new(&model, &g).unwrap();
        let scorer = SubgraphScorer::new(&ev, Scorer::ShapleyExact { hops: Some(1) }, 0, NodeSet::new(), 0);
        let a = scorer.score(&NodeSet::from([0])).unwrap();
        let after_first = scorer.forward_passes();
        assert_eq!(after_first, 8);
        let b = scorer.score(&NodeSet::from([0])).unwrap();
        assert_eq!(a, b);
        assert_eq!(scorer.forward_passes(), after_first);
    }

    #[test]
    fn fingerprint_is_order_sensitive_to_content() {
        assert_eq!(fingerprint(&NodeSet::from([1, 2])), fingerprint(&NodeSet::from([2, 1])));
        assert_ne!(fingerprint(&NodeSet::from([1, 2])), fingerprint(&NodeSet::from([1, 3])));
    }
}
