//! Synthetic benchmarks with planted motifs: Barabási–Albert base graphs with
//! house or five-cycle motifs attached, used as explanation ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{GroundTruth, Instance};
use crate::graph::{Graph, GraphError, NodeSet};

/// Width of the all-ones node features.
pub const FEATURE_DIM: usize = 10;
/// Base graph size for graph classification (25 nodes total with the motif).
pub const BA2MOTIFS_BASE: usize = 20;
pub const BA2MOTIFS_DEFAULT_GRAPHS: usize = 1000;
pub const BASHAPE_BASE: usize = 300;
pub const BASHAPE_HOUSES: usize = 80;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("need n > m_attach >= 1, got n = {n}, m_attach = {m}")]
    Sizes { n: usize, m: usize },
    #[error("need at least 2 graphs, got {0}")]
    TooFewGraphs(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotifKind {
    House,
    Cycle5,
}

impl MotifKind {
    /// Local edges over motif nodes `0..5`. House: square 0-1-2-3 with apex 4
    /// joined to 0 and 1.
    pub fn local_edges(self) -> &'static [(usize, usize)] {
        match self {
            MotifKind::House => &[(0, 1), (1, 2), (2, 3), (3, 0), (4, 0), (4, 1)],
            MotifKind::Cycle5 => &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)],
        }
    }

    pub fn num_edges(self) -> usize {
        self.local_edges().len()
    }
}

/// A planted motif and where it sits in the host graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotifSpec {
    pub kind: MotifKind,
    pub nodes: NodeSet,
    /// Base node the motif hangs off.
    pub attached_to: usize,
}

/// House roles used as node labels: 0 base, 1 apex, 2 middle, 3 bottom.
const HOUSE_ROLES: [usize; 5] = [2, 2, 3, 3, 1];

/// SplitMix64 step, used to derive independent per-item seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn ba_edges(n: usize, m: usize, rng: &mut impl Rng) -> Result<Vec<(usize, usize)>, GenError> {
    if m < 1 || n <= m {
        return Err(GenError::Sizes { n, m });
    }
    let mut edges = Vec::new();
    let mut degree = vec![0usize; n];
    for u in 0..m {
        for v in u + 1..m {
            edges.push((u, v));
            degree[u] += 1;
            degree[v] += 1;
        }
    }
    for v in m..n {
        let mut chosen: Vec<usize> = Vec::with_capacity(m);
        for _ in 0..m {
            let weight = |u: usize| if chosen.contains(&u) { 0 } else { degree[u] };
            let total: usize = (0..v).map(weight).sum();
            let pick = if total == 0 {
                let free: Vec<usize> = (0..v).filter(|u| !chosen.contains(u)).collect();
                free[rng.gen_range(0..free.len())]
            } else {
                let mut r = rng.gen_range(0..total);
                let mut pick = 0;
                for u in 0..v {
                    let w = weight(u);
                    if r < w {
                        pick = u;
                        break;
                    }
                    r -= w;
                }
                pick
            };
            chosen.push(pick);
        }
        for u in chosen {
            edges.push((u, v));
            degree[u] += 1;
            degree[v] += 1;
        }
    }
    Ok(edges)
}

/// Preferential-attachment graph: `m_attach` fully connected seed nodes, then
/// each new node links to `m_attach` distinct existing nodes chosen with
/// probability proportional to degree.
pub fn gen_ba(n: usize, m_attach: usize, seed: u64) -> Result<Graph, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = ba_edges(n, m_attach, &mut rng)?;
    Ok(Graph::with_unit_features(n, edges, FEATURE_DIM)?)
}

/// Appends a motif after the current nodes, wired to a uniform base node.
fn attach_motif(
    edges: &mut Vec<(usize, usize)>,
    first: usize,
    base_size: usize,
    kind: MotifKind,
    rng: &mut impl Rng,
) -> MotifSpec {
    edges.extend(kind.local_edges().iter().map(|&(a, b)| (first + a, first + b)));
    let attached_to = rng.gen_range(0..base_size);
    edges.push((attached_to, first));
    MotifSpec {
        kind,
        nodes: (first..first + 5).collect(),
        attached_to,
    }
}

/// A graph-classification dataset with one planted motif per graph.
#[derive(Clone, Debug)]
pub struct MotifDataset {
    pub instances: Vec<Instance>,
    pub motifs: Vec<MotifSpec>,
}

impl MotifDataset {
    pub fn ground_truth(&self) -> Vec<GroundTruth> {
        self.instances
            .iter()
            .zip(&self.motifs)
            .map(|(inst, motif)| GroundTruth {
                graph_id: inst.id.clone(),
                node_id: None,
                motif_kind: motif.kind,
                motif_nodes: motif.nodes.clone(),
            })
            .collect()
    }
}

/// Graph `i` carries a house (label 1) when `i` is odd and a five-cycle
/// (label 0) otherwise, so labels balance exactly for even counts.
pub fn gen_ba2motifs(num_graphs: usize, seed: u64) -> Result<MotifDataset, GenError> {
    if num_graphs < 2 {
        return Err(GenError::TooFewGraphs(num_graphs));
    }
    let width = num_graphs.to_string().len();
    let mut instances = Vec::with_capacity(num_graphs);
    let mut motifs = Vec::with_capacity(num_graphs);
    for i in 0..num_graphs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
        let mut edges = ba_edges(BA2MOTIFS_BASE, 1, &mut rng)?;
        let (kind, label) = if i % 2 == 1 {
            (MotifKind::House, 1)
        } else {
            (MotifKind::Cycle5, 0)
        };
        let motif = attach_motif(&mut edges, BA2MOTIFS_BASE, BA2MOTIFS_BASE, kind, &mut rng);
        let graph = Graph::with_unit_features(BA2MOTIFS_BASE + 5, edges, FEATURE_DIM)?.with_label(Some(label));
        instances.push(Instance {
            id: format!("ba2m-{i:0width$}"),
            graph,
            node_labels: None,
        });
        motifs.push(motif);
    }
    Ok(MotifDataset { instances, motifs })
}

/// A single graph with per-node labels for node classification.
#[derive(Clone, Debug)]
pub struct NodeDataset {
    pub id: String,
    pub graph: Graph,
    pub labels: Vec<usize>,
    pub motifs: Vec<MotifSpec>,
    /// Index into `motifs` for every motif node.
    pub motif_of: Vec<Option<usize>>,
}

impl NodeDataset {
    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// The dataset as a single record carrying every node's label.
    pub fn instance(&self) -> Instance {
        Instance {
            id: self.id.clone(),
            graph: self.graph.clone(),
            node_labels: Some(self.labels.clone()),
        }
    }

    pub fn ground_truth(&self) -> Vec<GroundTruth> {
        (0..self.graph.num_nodes())
            .filter_map(|v| {
                let motif = &self.motifs[self.motif_of[v]?];
                Some(GroundTruth {
                    graph_id: self.id.clone(),
                    node_id: Some(v),
                    motif_kind: motif.kind,
                    motif_nodes: motif.nodes.clone(),
                })
            })
            .collect()
    }
}

/// 300-node BA base with 80 attached houses: 700 nodes, 4 classes.
pub fn gen_bashape(seed: u64) -> Result<NodeDataset, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = ba_edges(BASHAPE_BASE, 1, &mut rng)?;
    let total = BASHAPE_BASE + 5 * BASHAPE_HOUSES;
    let mut labels = vec![0; total];
    let mut motif_of = vec![None; total];
    let mut motifs = Vec::with_capacity(BASHAPE_HOUSES);
    for h in 0..BASHAPE_HOUSES {
        let first = BASHAPE_BASE + 5 * h;
        let motif = attach_motif(&mut edges, first, BASHAPE_BASE, MotifKind::House, &mut rng);
        for (offset, &role) in HOUSE_ROLES.iter().enumerate() {
            labels[first + offset] = role;
            motif_of[first + offset] = Some(h);
        }
        motifs.push(motif);
    }
    let graph = Graph::with_unit_features(total, edges, FEATURE_DIM)?;
    Ok(NodeDataset {
        id: "bashape".into(),
        graph,
        labels,
        motifs,
        motif_of,
    })
}
