//! Undirected graphs with node features, node sets, and the node-pruning
//! action space explored by the search.

use std::collections::VecDeque;
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("node index {node} out of range for graph with {num_nodes} nodes")]
    InvalidNode { node: usize, num_nodes: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("feature matrix has {rows} rows, expected {num_nodes}")]
    FeatureRows { rows: usize, num_nodes: usize },
    #[error("seed node set is empty")]
    EmptySeed,
    #[error("node set does not induce a connected subgraph")]
    Disconnected,
    #[error("pruning needs at least 2 nodes, got {0}")]
    TooSmall(usize),
    #[error("prune candidate limit k must be at least 1")]
    ZeroCandidates,
}

/// A strictly increasing list of node indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "Vec<usize>", into = "Vec<usize>")]
pub struct NodeSet(Vec<usize>);

impl NodeSet {
    pub fn new() -> Self {
        NodeSet(Vec::new())
    }

    /// All nodes `0..n`.
    pub fn full(n: usize) -> Self {
        NodeSet((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.0.binary_search(&node).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn first(&self) -> Option<usize> {
        self.0.first().copied()
    }

    pub fn union(&self, other: &NodeSet) -> NodeSet {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.0, &other.0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        NodeSet(out)
    }

    pub fn intersection_len(&self, other: &NodeSet) -> usize {
        self.iter().filter(|&v| other.contains(v)).count()
    }

    pub fn is_disjoint(&self, other: &NodeSet) -> bool {
        self.intersection_len(other) == 0
    }

    /// Membership mask of length `n`.
    pub fn to_mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for v in self.iter() {
            mask[v] = true;
        }
        mask
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

impl From<Vec<usize>> for NodeSet {
    fn from(mut nodes: Vec<usize>) -> Self {
        nodes.sort_unstable();
        nodes.dedup();
        NodeSet(nodes)
    }
}

impl From<NodeSet> for Vec<usize> {
    fn from(set: NodeSet) -> Self {
        set.0
    }
}

impl FromIterator<usize> for NodeSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        NodeSet::from(iter.into_iter().collect::<Vec<_>>())
    }
}

impl<const N: usize> From<[usize; N]> for NodeSet {
    fn from(nodes: [usize; N]) -> Self {
        NodeSet::from(nodes.to_vec())
    }
}

impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}

/// Immutable undirected graph. Edges are stored canonically as `(u, v)` with
/// `u < v`, sorted.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    features: Array2<f64>,
    label: Option<usize>,
    target_node: Option<usize>,
}

impl Graph {
    pub fn new(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: Array2<f64>,
    ) -> Result<Self, GraphError> {
        if features.nrows() != num_nodes {
            return Err(GraphError::FeatureRows {
                rows: features.nrows(),
                num_nodes,
            });
        }
        let mut canonical = Vec::new();
        for (u, v) in edges {
            for node in [u, v] {
                if node >= num_nodes {
                    return Err(GraphError::InvalidNode { node, num_nodes });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            canonical.push((u.min(v), u.max(v)));
        }
        canonical.sort_unstable();
        if let Some(w) = canonical.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::DuplicateEdge(w[0].0, w[0].1));
        }
        let mut adjacency = vec![Vec::new(); num_nodes];
        for &(u, v) in &canonical {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Graph {
            edges: canonical,
            adjacency,
            features,
            label: None,
            target_node: None,
        })
    }

    /// Graph with every feature equal to `1.0`.
    pub fn with_unit_features(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        dim: usize,
    ) -> Result<Self, GraphError> {
        Graph::new(num_nodes, edges, Array2::ones((num_nodes, dim)))
    }

    pub fn with_label(mut self, label: Option<usize>) -> Self {
        self.label = label;
        self
    }

    pub fn with_target_node(mut self, target: Option<usize>) -> Result<Self, GraphError> {
        if let Some(node) = target {
            self.check_node(node)?;
        }
        self.target_node = target;
        Ok(self)
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    pub fn target_node(&self) -> Option<usize> {
        self.target_node
    }

    pub fn all_nodes(&self) -> NodeSet {
        NodeSet::full(self.num_nodes())
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.num_nodes() && self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn check_node(&self, node: usize) -> Result<(), GraphError> {
        if node < self.num_nodes() {
            Ok(())
        } else {
            Err(GraphError::InvalidNode {
                node,
                num_nodes: self.num_nodes(),
            })
        }
    }

    pub fn check_nodes(&self, nodes: &NodeSet) -> Result<(), GraphError> {
        nodes.iter().try_for_each(|v| self.check_node(v))
    }

    /// Number of edges with both endpoints in `nodes`.
    pub fn induced_edge_count(&self, nodes: &NodeSet) -> usize {
        let mask = nodes.to_mask(self.num_nodes());
        self.edges
            .iter()
            .filter(|&&(u, v)| mask[u] && mask[v])
            .count()
    }

    pub fn is_connected_set(&self, nodes: &NodeSet) -> Result<bool, GraphError> {
        Ok(connected_components(self, nodes)?.len() <= 1)
    }

    /// Induced subgraph on `nodes`, reindexed to `0..nodes.len()` in
    /// ascending original order. The label carries over; the target node is
    /// remapped when it lies inside `nodes`.
    pub fn induced_subgraph(&self, nodes: &NodeSet) -> Result<Graph, GraphError> {
        self.check_nodes(nodes)?;
        let mut local = vec![usize::MAX; self.num_nodes()];
        for (i, v) in nodes.iter().enumerate() {
            local[v] = i;
        }
        let edges = self
            .edges
            .iter()
            .filter(|&&(u, v)| local[u] != usize::MAX && local[v] != usize::MAX)
            .map(|&(u, v)| (local[u], local[v]));
        let features = self.features.select(ndarray::Axis(0), nodes.as_slice());
        let target = self
            .target_node
            .and_then(|t| (local[t] != usize::MAX).then_some(local[t]));
        Graph::new(nodes.len(), edges, features)?
            .with_label(self.label)
            .with_target_node(target)
    }
}

/// Order in which pruning candidates are ranked by induced degree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PruneOrder {
    Low2high,
    High2low,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneStrategy {
    pub order: PruneOrder,
    /// Maximum number of candidate actions; `None` means unlimited.
    pub k: Option<usize>,
}

impl PruneStrategy {
    pub fn new(order: PruneOrder, k: Option<usize>) -> Result<Self, GraphError> {
        if k == Some(0) {
            return Err(GraphError::ZeroCandidates);
        }
        Ok(PruneStrategy { order, k })
    }

    pub fn unlimited(order: PruneOrder) -> Self {
        PruneStrategy { order, k: None }
    }
}

impl Default for PruneStrategy {
    fn default() -> Self {
        PruneStrategy {
            order: PruneOrder::Low2high,
            k: Some(12),
        }
    }
}

/// One pruning action: the removed node and the resulting child node set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pruning {
    pub removed: usize,
    pub child: NodeSet,
}

/// Partitions `nodes` into maximal connected pieces, sorted by size
/// descending, then by smallest member ascending.
pub fn connected_components(g: &Graph, nodes: &NodeSet) -> Result<Vec<NodeSet>, GraphError> {
    g.check_nodes(nodes)?;
    let member = nodes.to_mask(g.num_nodes());
    let mut seen = vec![false; g.num_nodes()];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    for start in nodes.iter() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut component = Vec::new();
        while let Some(u) = queue.pop_front() {
            component.push(u);
            for &w in g.neighbors(u) {
                if member[w] && !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        components.push(NodeSet::from(component));
    }
    // starts are visited in ascending order, so a stable sort by size keeps
    // the smallest-index tie-break
    components.sort_by(|a, b| b.len().cmp(&a.len()));
    Ok(components)
}

/// Nodes at shortest-path distance `1..=hops` from any seed node. Pass
/// `usize::MAX` for an unbounded radius.
pub fn l_hop_neighbors(g: &Graph, seed: &NodeSet, hops: usize) -> Result<NodeSet, GraphError> {
    if seed.is_empty() {
        return Err(GraphError::EmptySeed);
    }
    g.check_nodes(seed)?;
    let mut dist = vec![usize::MAX; g.num_nodes()];
    let mut frontier: Vec<usize> = seed.iter().collect();
    for v in seed.iter() {
        dist[v] = 0;
    }
    let mut found = Vec::new();
    let mut depth = 0;
    while !frontier.is_empty() && depth < hops {
        depth += 1;
        let mut next = Vec::new();
        for u in frontier {
            for &w in g.neighbors(u) {
                if dist[w] == usize::MAX {
                    dist[w] = depth;
                    next.push(w);
                    found.push(w);
                }
            }
        }
        frontier = next;
    }
    Ok(NodeSet::from(found))
}

/// The `hops`-hop neighbourhood of `target` as its own graph with the target
/// remapped, plus the original index of every local node (local `i` is
/// `nodes.as_slice()[i]`).
pub fn local_view(g: &Graph, target: usize, hops: usize) -> Result<(Graph, NodeSet), GraphError> {
    let seed = NodeSet::from([target]);
    let nodes = l_hop_neighbors(g, &seed, hops)?.union(&seed);
    let local = g.induced_subgraph(&nodes)?.with_target_node(nodes.as_slice().binary_search(&target).ok())?;
    Ok((local, nodes))
}

fn induced_degrees(g: &Graph, nodes: &NodeSet) -> Vec<(usize, usize)> {
    let member = nodes.to_mask(g.num_nodes());
    nodes
        .iter()
        .map(|v| (v, g.neighbors(v).iter().filter(|&&w| member[w]).count()))
        .collect()
}

/// Nodes sorted by degree inside the induced subgraph, ties by index.
pub fn induced_degree_order(g: &Graph, nodes: &NodeSet, order: PruneOrder) -> Vec<usize> {
    let mut degrees = induced_degrees(g, nodes);
    match order {
        PruneOrder::Low2high => degrees.sort_by_key(|&(v, d)| (d, v)),
        PruneOrder::High2low => degrees.sort_by_key(|&(v, d)| (std::cmp::Reverse(d), v)),
    }
    degrees.into_iter().map(|(v, _)| v).collect()
}

/// Children of `current` under single-node removal, keeping the largest
/// remaining component.
pub fn prune_actions(
    g: &Graph,
    current: &NodeSet,
    strategy: PruneStrategy,
) -> Result<Vec<Pruning>, GraphError> {
    prune_actions_anchored(g, current, strategy, None)
}

/// Like [`prune_actions`], but with an anchor node that is never removed;
/// after a removal the component holding the anchor is kept instead of the
/// largest one.
pub fn prune_actions_anchored(
    g: &Graph,
    current: &NodeSet,
    strategy: PruneStrategy,
    anchor: Option<usize>,
) -> Result<Vec<Pruning>, GraphError> {
    if current.len() < 2 {
        return Err(GraphError::TooSmall(current.len()));
    }
    if let Some(a) = anchor {
        if !current.contains(a) {
            return Err(GraphError::InvalidNode {
                node: a,
                num_nodes: g.num_nodes(),
            });
        }
    }
    if connected_components(g, current)?.len() != 1 {
        return Err(GraphError::Disconnected);
    }
    let limit = strategy.k.unwrap_or(usize::MAX);
    let candidates = induced_degree_order(g, current, strategy.order)
        .into_iter()
        .filter(|&v| Some(v) != anchor)
        .take(limit);

    let mut children: Vec<Pruning> = Vec::new();
    for removed in candidates {
        let rest: NodeSet = current.iter().filter(|&v| v != removed).collect();
        let components = connected_components(g, &rest)?;
        let kept = match anchor {
            Some(a) => components.into_iter().find(|c| c.contains(a)),
            None => components.into_iter().next(),
        };
        let Some(child) = kept else { continue };
        if children.iter().all(|p| p.child != child) {
            children.push(Pruning { removed, child });
        }
    }
    Ok(children)
}
