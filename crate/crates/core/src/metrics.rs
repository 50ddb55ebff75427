//! Fidelity, sparsity, sparsity–fidelity curves and motif recall.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gnn::{Evaluator, ModelError, ModelSpec};
use crate::graph::{Graph, GraphError, NodeSet};
use crate::mcts::{reference_size, Explanation, SearchError};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("{graphs} graphs but {masks} masks")]
    Length { graphs: usize, masks: usize },
    #[error("empty ground truth")]
    EmptyTruth,
    #[error("graph {index}: no explanation of size {size} or smaller")]
    NoSubgraph { index: usize, size: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Search(#[from] SearchError),
}

/// Per-graph terms of fidelity and sparsity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub graph_id: String,
    pub mask: NodeSet,
    pub original_prob: f64,
    pub occluded_prob: f64,
    pub sparsity: f64,
}

impl EvalRecord {
    pub fn fidelity(&self) -> f64 {
        self.original_prob - self.occluded_prob
    }
}

fn check_lengths(graphs: usize, masks: usize) -> Result<(), MetricsError> {
    if graphs == 0 {
        return Err(MetricsError::EmptyBatch);
    }
    if graphs != masks {
        return Err(MetricsError::Length { graphs, masks });
    }
    Ok(())
}

/// Probability of the originally predicted class before and after zeroing
/// the features of `mask`. A node-level model's target is never occluded,
/// and its sparsity is relative to the target's computation graph.
pub fn evaluate_mask(model: &ModelSpec, g: &Graph, graph_id: &str, mask: &NodeSet) -> Result<EvalRecord, MetricsError> {
    g.check_nodes(mask)?;
    let evaluator = Evaluator::new(model, g)?;
    let original = evaluator.predict(None);
    let class = original.predicted_class;
    let mut active = vec![true; g.num_nodes()];
    for v in mask.iter() {
        active[v] = false;
    }
    if model.is_node_level() {
        if let Some(t) = g.target_node() {
            active[t] = true;
        }
    }
    let occluded = evaluator.predict(Some(&active));
    Ok(EvalRecord {
        graph_id: graph_id.to_owned(),
        mask: mask.clone(),
        original_prob: original.probability(class),
        occluded_prob: occluded.probability(class),
        sparsity: 1.0 - mask.len() as f64 / reference_size(model, g)? as f64,
    })
}

/// Mean sparsity and mean fidelity of a batch, summed in record order.
pub fn batch_means(records: &[EvalRecord]) -> (f64, f64) {
    let n = records.len() as f64;
    let sparsity = records.iter().map(|r| r.sparsity).sum::<f64>() / n;
    let fidelity = records.iter().map(EvalRecord::fidelity).sum::<f64>() / n;
    (sparsity, fidelity)
}

/// Mean drop in predicted-class probability when the masked nodes are
/// occluded.
pub fn fidelity(model: &ModelSpec, graphs: &[&Graph], masks: &[NodeSet]) -> Result<f64, MetricsError> {
    check_lengths(graphs.len(), masks.len())?;
    let mut total = 0.0;
    for (g, mask) in graphs.iter().zip(masks) {
        total += evaluate_mask(model, g, "", mask)?.fidelity();
    }
    Ok(total / graphs.len() as f64)
}

/// Mean fraction of nodes left out of the masks.
pub fn sparsity(graphs: &[&Graph], masks: &[NodeSet]) -> Result<f64, MetricsError> {
    check_lengths(graphs.len(), masks.len())?;
    let total: f64 = graphs
        .iter()
        .zip(masks)
        .map(|(g, m)| 1.0 - m.len() as f64 / g.num_nodes() as f64)
        .sum();
    Ok(total / graphs.len() as f64)
}

/// Share of ground-truth nodes present in the explanation.
pub fn motif_recall(explanation: &NodeSet, truth: &NodeSet) -> Result<f64, MetricsError> {
    if truth.is_empty() {
        return Err(MetricsError::EmptyTruth);
    }
    Ok(explanation.intersection_len(truth) as f64 / truth.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Requested explanation size.
    pub size: usize,
    pub sparsity: f64,
    pub fidelity: f64,
    pub n_graphs: usize,
    /// Graphs that had no explanation of the requested size and used the
    /// nearest smaller one.
    pub substituted: usize,
}

/// One point per requested size: every graph contributes its best explanation
/// of that size (or the nearest smaller size it has). Sorted by sparsity.
pub fn sparsity_fidelity_curve(
    model: &ModelSpec,
    graphs: &[&Graph],
    explanations: &[Explanation],
    sizes: &[usize],
) -> Result<Vec<CurvePoint>, MetricsError> {
    check_lengths(graphs.len(), explanations.len())?;
    let mut points = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let mut masks = Vec::with_capacity(graphs.len());
        let mut substituted = 0;
        for (index, e) in explanations.iter().enumerate() {
            let pick = e
                .per_size
                .iter()
                .rev()
                .find(|s| s.size <= size)
                .ok_or(MetricsError::NoSubgraph { index, size })?;
            if pick.size != size {
                substituted += 1;
            }
            masks.push(pick.nodes.clone());
        }
        let records = graphs
            .iter()
            .zip(&masks)
            .map(|(g, m)| evaluate_mask(model, g, "", m))
            .collect::<Result<Vec<_>, _>>()?;
        let (sparsity, fidelity) = batch_means(&records);
        points.push(CurvePoint {
            size,
            sparsity,
            fidelity,
            n_graphs: graphs.len(),
            substituted,
        });
    }
    points.sort_by(|a, b| a.sparsity.total_cmp(&b.sparsity).then(a.size.cmp(&b.size)));
    Ok(points)
}

/// Delimited text form of a curve.
pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("size,sparsity,fidelity,n_graphs\n");
    for p in points {
        out.push_str(&format!("{},{:.6},{:.6},{}\n", p.size, p.sparsity, p.fidelity, p.n_graphs));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::{Architecture, LayerSpec, Linear, ModelType, Readout};
    use ndarray::{array, Array1, Array2};

    fn star() -> Graph {
        Graph::with_unit_features(5, [(0, 1), (0, 2), (0, 3), (0, 4)], 2).unwrap()
    }

    #[test]
    fn empty_masks_and_constant_models() {
        let g = star();
        let m = ModelSpec::init(&Architecture::three_layer(ModelType::Gcn, 2, 2, Readout::Mean), 1).unwrap();
        assert_eq!(fidelity(&m, &[&g, &g], &[NodeSet::new(), NodeSet::new()]).unwrap(), 0.0);
        let constant = ModelSpec::new(
            ModelType::Gcn,
            vec![LayerSpec::Gcn {
                weight: Array2::ones((2, 2)),
                bias: None,
            }],
            Readout::Max,
            Linear {
                weight: Array2::zeros((2, 2)),
                bias: array![0.3, -0.2],
            },
        )
        .unwrap();
        assert_eq!(fidelity(&constant, &[&g], &[NodeSet::from([0, 1])]).unwrap(), 0.0);
        assert!(matches!(fidelity(&m, &[], &[]), Err(MetricsError::EmptyBatch)));
    }

    #[test]
    fn occlusion_drop() {
        // one layer of ones, max readout: class 1 logit = 2·max(hidden)
        let m = ModelSpec::new(
            ModelType::Gcn,
            vec![LayerSpec::Gcn {
                weight: Array2::ones((2, 1)),
                bias: None,
            }],
            Readout::Max,
            Linear {
                weight: array![[0.0, 2.0]],
                bias: Array1::zeros(2),
            },
        )
        .unwrap();
        let g = Graph::with_unit_features(2, [(0, 1)], 2).unwrap();
        // hidden = 2 per node, logits (0, 4) → p = 1/(1+e^-4); all occluded → 0.5
        let expected = 1.0 / (1.0 + (-4.0f64).exp()) - 0.5;
        let f = fidelity(&m, &[&g], &[g.all_nodes()]).unwrap();
        assert!((f - expected).abs() < 1e-12, "{f}");
    }

    #[test]
    fn sparsity_arithmetic() {
        let g25 = Graph::with_unit_features(25, (0..24).map(|i| (i, i + 1)), 1).unwrap();
        let g10 = Graph::with_unit_features(10, (0..9).map(|i| (i, i + 1)), 1).unwrap();
        let five: NodeSet = (0..5).collect();
        assert!((sparsity(&[&g25], &[five.clone()]).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(sparsity(&[&g10], &[g10.all_nodes()]).unwrap(), 0.0);
        let four: NodeSet = (0..4).collect();
        assert!((sparsity(&[&g25, &g10], &[five, four]).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn recall() {
        let truth = NodeSet::from([20, 21, 22, 23, 24]);
        assert_eq!(motif_recall(&truth, &truth).unwrap(), 1.0);
        assert_eq!(motif_recall(&NodeSet::from([0, 1]), &truth).unwrap(), 0.0);
        assert!((motif_recall(&NodeSet::from([3, 20, 21, 22, 23]), &truth).unwrap() - 0.8).abs() < 1e-15);
        assert!(motif_recall(&truth, &NodeSet::new()).is_err());
    }

    #[test]
    fn node_target_is_never_occluded() {
        let g = star().with_target_node(Some(0)).unwrap();
        let m = ModelSpec::init(&Architecture::three_layer(ModelType::Gcn, 2, 3, Readout::None), 2).unwrap();
        let r = evaluate_mask(&m, &g, "s", &NodeSet::from([0])).unwrap();
        assert_eq!(r.fidelity(), 0.0);
    }
}
