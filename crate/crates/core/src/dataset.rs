//! Line-delimited JSON dataset files and ground-truth sidecars.
//!
//! Each dataset line is one graph:
//! `{"id", "num_nodes", "edges": [[u, v], ..], "features": [[..], ..], "label"?, "target_node"?, "node_labels"?}`.
//! Node-classification data is one record with `node_labels`. Unknown
//! fields are rejected.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::MotifKind;
use crate::graph::{Graph, GraphError, NodeSet};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line} ({id}): {message}")]
    Invalid {
        line: usize,
        id: String,
        message: String,
    },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
}

/// A graph with its dataset identifier.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub id: String,
    pub graph: Graph,
    /// Per-node classes for node classification.
    pub node_labels: Option<Vec<usize>>,
}

impl Instance {
    pub fn graph_level(id: impl Into<String>, graph: Graph) -> Self {
        Instance {
            id: id.into(),
            graph,
            node_labels: None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRecord {
    id: String,
    num_nodes: usize,
    edges: Vec<[usize; 2]>,
    features: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target_node: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    node_labels: Option<Vec<usize>>,
}

impl GraphRecord {
    fn from_instance(inst: &Instance) -> Self {
        let g = &inst.graph;
        GraphRecord {
            id: inst.id.clone(),
            num_nodes: g.num_nodes(),
            edges: g.edges().iter().map(|&(u, v)| [u, v]).collect(),
            features: g.features().rows().into_iter().map(|r| r.to_vec()).collect(),
            label: g.label(),
            target_node: g.target_node(),
            node_labels: inst.node_labels.clone(),
        }
    }

    fn into_instance(self) -> Result<Instance, String> {
        let dim = self.features.first().map_or(0, Vec::len);
        if self.features.iter().any(|row| row.len() != dim) {
            return Err("feature rows have unequal lengths".into());
        }
        if self.node_labels.as_ref().is_some_and(|l| l.len() != self.num_nodes) {
            return Err(format!("node_labels must have {} entries", self.num_nodes));
        }
        if self.features.len() != self.num_nodes {
            return Err(GraphError::FeatureRows {
                rows: self.features.len(),
                num_nodes: self.num_nodes,
            }
            .to_string());
        }
        let flat = self.features.into_iter().flatten().collect();
        let features = Array2::from_shape_vec((self.num_nodes, dim), flat).map_err(|e| e.to_string())?;
        let graph = Graph::new(self.num_nodes, self.edges.into_iter().map(|[u, v]| (u, v)), features)
            .and_then(|g| g.with_label(self.label).with_target_node(self.target_node))
            .map_err(|e| e.to_string())?;
        Ok(Instance {
            id: self.id,
            graph,
            node_labels: self.node_labels,
        })
    }
}

/// One ground-truth annotation: the motif explaining a graph, or (for node
/// tasks) a node's motif.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub graph_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_id: Option<usize>,
    pub motif_kind: MotifKind,
    pub motif_nodes: NodeSet,
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_lines<T: Serialize>(path: &Path, items: impl Iterator<Item = T>) -> Result<(), DatasetError> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, &item).expect("records serialize");
        out.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(io_error(path))?;
    file.write_all(&out).map_err(io_error(path))
}

fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, DatasetError> {
    let file = fs::File::open(path).map_err(io_error(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_error(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| DatasetError::Json { line: i + 1, source })?;
        out.push((i + 1, record));
    }
    Ok(out)
}

pub fn to_jsonl(instances: &[Instance]) -> String {
    let mut out = String::new();
    for inst in instances {
        out.push_str(&serde_json::to_string(&GraphRecord::from_instance(inst)).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_dataset(path: &Path, instances: &[Instance]) -> Result<(), DatasetError> {
    write_lines(path, instances.iter().map(GraphRecord::from_instance))
}

pub fn read_dataset(path: &Path) -> Result<Vec<Instance>, DatasetError> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (line, record) in read_lines::<GraphRecord>(path)? {
        let id = record.id.clone();
        let inst = record
            .into_instance()
            .map_err(|message| DatasetError::Invalid {
                line,
                id: id.clone(),
                message,
            })?;
        if !seen.insert(id.clone()) {
            return Err(DatasetError::DuplicateId(id));
        }
        out.push(inst);
    }
    Ok(out)
}

pub fn write_ground_truth(path: &Path, truth: &[GroundTruth]) -> Result<(), DatasetError> {
    write_lines(path, truth.iter())
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruth>, DatasetError> {
    Ok(read_lines(path)?.into_iter().map(|(_, t)| t).collect())
}

/// Item indices divided into training, validation and test parts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle of `0..n` cut 80/10/10 (rounded down for the validation
/// and test parts); each part is returned sorted.
pub fn split_indices(n: usize, seed: u64) -> Split {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let held_out = n / 10;
    let mut test = order.split_off(n - held_out);
    let mut validation = order.split_off(order.len() - held_out);
    let mut train = order;
    train.sort_unstable();
    validation.sort_unstable();
    test.sort_unstable();
    Split { train, validation, test }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let g = Graph::new(3, [(0, 1), (2, 1)], ndarray::array![[0.5, 1.0], [0.1, 0.2], [3.0, -1.0]])
            .unwrap()
            .with_label(Some(1))
            .with_target_node(Some(2))
            .unwrap();
        let inst = vec![
            Instance::graph_level("a", g.clone()),
            Instance {
                id: "b".into(),
                graph: g,
                node_labels: Some(vec![0, 2, 1]),
            },
        ];
        write_dataset(&path, &inst).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), inst);
    }

    #[test]
    fn split_is_a_seeded_partition() {
        let s = split_indices(1000, 3);
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (800, 100, 100));
        let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
        assert_eq!(split_indices(1000, 3), s);
        assert_ne!(split_indices(1000, 4), s);
    }

    fn parse_one(line: &str) -> Result<Vec<Instance>, DatasetError> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        fs::write(&path, line).unwrap();
        read_dataset(&path)
    }

    #[test]
    fn rejects_unknown_fields_and_bad_graphs() {
        let ok = r#"{"id":"g","num_nodes":2,"edges":[[0,1]],"features":[[1],[1]]}"#;
        assert_eq!(parse_one(ok).unwrap().len(), 1);
        let unknown = r#"{"id":"g","num_nodes":2,"edges":[[0,1]],"features":[[1],[1]],"color":3}"#;
        assert!(matches!(parse_one(unknown), Err(DatasetError::Json { line: 1, .. })));
        let self_loop = r#"{"id":"g","num_nodes":2,"edges":[[1,1]],"features":[[1],[1]]}"#;
        assert!(matches!(parse_one(self_loop), Err(DatasetError::Invalid { .. })));
        let ragged = r#"{"id":"g","num_nodes":2,"edges":[],"features":[[1],[1,2]]}"#;
        assert!(matches!(parse_one(ragged), Err(DatasetError::Invalid { .. })));
        let rows = r#"{"id":"g","num_nodes":3,"edges":[],"features":[[1],[1]]}"#;
        assert!(matches!(parse_one(rows), Err(DatasetError::Invalid { .. })));
        let labels = r#"{"id":"g","num_nodes":2,"edges":[],"features":[[1],[1]],"node_labels":[0]}"#;
        assert!(matches!(parse_one(labels), Err(DatasetError::Invalid { .. })));
        let dup = format!("{ok}\n{ok}\n");
        assert!(matches!(parse_one(&dup), Err(DatasetError::DuplicateId(_))));
    }
}
