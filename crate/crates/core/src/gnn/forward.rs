use ndarray::{Array1, Array2, ArrayView1, Axis};

use super::{LayerSpec, Linear, ModelError, ModelSpec, Readout};
use crate::graph::{Graph, NodeSet};

/// Class scores for one graph (or one target node).
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub predicted_class: usize,
}

impl Prediction {
    pub fn from_logits(logits: Vec<f64>) -> Self {
        let probabilities = softmax(&logits);
        let predicted_class = argmax(&logits);
        Prediction {
            logits,
            probabilities,
            predicted_class,
        }
    }

    pub fn probability(&self, class: usize) -> f64 {
        self.probabilities[class]
    }
}

/// Index of the largest value; the lowest index wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Compressed sparse rows of a square propagation matrix.
#[derive(Clone, Debug)]
pub(crate) struct Csr {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    /// `D^{-1/2} (A + I) D^{-1/2}`.
    pub(crate) fn gcn_normalized(g: &Graph) -> Csr {
        let n = g.num_nodes();
        let deg = |v: usize| (g.degree(v) + 1) as f64;
        let mut csr = Csr {
            indptr: Vec::with_capacity(n + 1),
            indices: Vec::with_capacity(n + 2 * g.num_edges()),
            values: Vec::with_capacity(n + 2 * g.num_edges()),
        };
        csr.indptr.push(0);
        for u in 0..n {
            let mut row: Vec<usize> = g.neighbors(u).to_vec();
            row.push(u);
            row.sort_unstable();
            for w in row {
                csr.indices.push(w);
                csr.values.push(1.0 / (deg(u) * deg(w)).sqrt());
            }
            csr.indptr.push(csr.indices.len());
        }
        csr
    }

    /// Plain adjacency, no self-loops.
    pub(crate) fn adjacency(g: &Graph) -> Csr {
        let mut csr = Csr {
            indptr: vec![0],
            indices: Vec::with_capacity(2 * g.num_edges()),
            values: Vec::with_capacity(2 * g.num_edges()),
        };
        for u in 0..g.num_nodes() {
            for &w in g.neighbors(u) {
                csr.indices.push(w);
                csr.values.push(1.0);
            }
            csr.indptr.push(csr.indices.len());
        }
        csr
    }

    /// `self · x`. Every matrix here is symmetric, so this also serves as
    /// the transpose product in backprop.
    pub(crate) fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let cols = x.ncols();
        let src = x.as_standard_layout();
        let src = src.as_slice().expect("standard layout");
        let mut out = vec![0.0; self.rows() * cols];
        for r in 0..self.rows() {
            let dst = &mut out[r * cols..(r + 1) * cols];
            for k in self.indptr[r]..self.indptr[r + 1] {
                let weight = self.values[k];
                let row = &src[self.indices[k] * cols..(self.indices[k] + 1) * cols];
                for (d, s) in dst.iter_mut().zip(row) {
                    *d += weight * s;
                }
            }
        }
        Array2::from_shape_vec((self.rows(), cols), out).expect("shape")
    }

    pub(crate) fn rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub(crate) fn to_dense(&self) -> Array2<f64> {
        let n = self.rows();
        let mut dense = Array2::zeros((n, n));
        for r in 0..n {
            for k in self.indptr[r]..self.indptr[r + 1] {
                dense[[r, self.indices[k]]] = self.values[k];
            }
        }
        dense
    }
}

/// Dense `D^{-1/2} (A + I) D^{-1/2}` over the full graph structure.
pub fn normalize_adjacency(g: &Graph) -> Array2<f64> {
    Csr::gcn_normalized(g).to_dense()
}

pub(crate) fn add_bias(z: &mut Array2<f64>, bias: &Array1<f64>) {
    for mut row in z.rows_mut() {
        row += bias;
    }
}

pub(crate) fn relu(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(|v| v.max(0.0))
}

/// Lower bound on the divisor in [`l2_rows`]; all-zero rows stay zero.
pub(crate) const NORM_EPS: f64 = 1e-12;

/// Scales every row to unit Euclidean length. Returns the scaled rows and
/// the divisor used for each.
pub(crate) fn l2_rows(h: Array2<f64>) -> (Array2<f64>, Array1<f64>) {
    let norms: Array1<f64> = h.rows().into_iter().map(|r| r.dot(&r).sqrt().max(NORM_EPS)).collect();
    let mut y = h;
    for (mut row, &n) in y.rows_mut().into_iter().zip(&norms) {
        row /= n;
    }
    (y, norms)
}

/// Backward of [`l2_rows`] given its outputs.
pub(crate) fn l2_rows_backward(dy: &Array2<f64>, y: &Array2<f64>, norms: &Array1<f64>) -> Array2<f64> {
    let mut dh = dy.clone();
    for ((mut d, yr), &n) in dh.rows_mut().into_iter().zip(y.rows()).zip(norms) {
        if n > NORM_EPS {
            let along = yr.dot(&d);
            d.scaled_add(-along, &yr);
        }
        d /= n;
    }
    dh
}

/// Row-vector logits from a pooled or selected embedding.
pub(crate) fn classify(classifier: &Linear, embedding: ArrayView1<f64>) -> Vec<f64> {
    (embedding.dot(&classifier.weight) + &classifier.bias).to_vec()
}

pub(crate) fn pool(readout: Readout, h: &Array2<f64>) -> Array1<f64> {
    match readout {
        Readout::Mean => h.mean_axis(Axis(0)).expect("non-empty graph"),
        Readout::Max => h.fold_axis(Axis(0), f64::NEG_INFINITY, |&a, &b| a.max(b)),
        Readout::None => unreachable!("node-level models do not pool"),
    }
}

/// Inference for one (model, graph) pair, reusable across many feature
/// masks. Structure-dependent work is done once in [`Evaluator::new`].
pub struct Evaluator<'a> {
    model: &'a ModelSpec,
    graph: &'a Graph,
    propagation: Csr,
    // X·W of the first GCN layer; masking zeroes rows of X, which commutes
    // with the right product
    first_projection: Option<Array2<f64>>,
    target: Option<usize>,
}

impl<'a> Evaluator<'a> {
    pub fn new(model: &'a ModelSpec, graph: &'a Graph) -> Result<Self, ModelError> {
        if graph.feature_dim() != model.input_dim() {
            return Err(ModelError::InputDim {
                expected: model.input_dim(),
                found: graph.feature_dim(),
            });
        }
        let target = if model.is_node_level() {
            Some(graph.target_node().ok_or(ModelError::MissingTarget)?)
        } else {
            None
        };
        let (propagation, first_projection) = match &model.layers[0] {
            LayerSpec::Gcn { weight, .. } => (
                Csr::gcn_normalized(graph),
                Some(graph.features().dot(weight)),
            ),
            LayerSpec::Gin { .. } => (Csr::adjacency(graph), None),
        };
        Ok(Evaluator {
            model,
            graph,
            propagation,
            first_projection,
            target,
        })
    }

    pub fn graph(&self) -> &Graph {
        self.graph
    }

    pub fn model(&self) -> &ModelSpec {
        self.model
    }

    /// Final-layer node embeddings with inactive nodes' inputs zeroed.
    pub fn embeddings(&self, active: Option<&[bool]>) -> Array2<f64> {
        let mut h: Option<Array2<f64>> = None;
        for (i, layer) in self.model.layers.iter().enumerate() {
            let z = match layer {
                LayerSpec::Gcn { weight, bias } => {
                    let projected = match (i, &self.first_projection) {
                        (0, Some(p)) => mask_rows(p.clone(), active),
                        _ => h.as_ref().expect("previous layer").dot(weight),
                    };
                    let mut z = self.propagation.apply(&projected);
                    if let Some(b) = bias {
                        add_bias(&mut z, b);
                    }
                    z
                }
                LayerSpec::Gin { mlp1, mlp2, eps } => {
                    let input = match h.take() {
                        Some(prev) => prev,
                        None => mask_rows(self.graph.features().to_owned(), active),
                    };
                    let agg = gin_aggregate(&self.propagation, &input, *eps);
                    let mut u = agg.dot(&mlp1.weight);
                    add_bias(&mut u, &mlp1.bias);
                    let mut z = relu(&u).dot(&mlp2.weight);
                    add_bias(&mut z, &mlp2.bias);
                    z
                }
            };
            let out = relu(&z);
            h = Some(if self.model.normalize { l2_rows(out).0 } else { out });
        }
        h.expect("at least one layer")
    }

    pub fn predict(&self, active: Option<&[bool]>) -> Prediction {
        let h = self.embeddings(active);
        let logits = match self.target {
            Some(t) => classify(&self.model.classifier, h.row(t)),
            None => classify(&self.model.classifier, pool(self.model.readout, &h).view()),
        };
        Prediction::from_logits(logits)
    }
}

pub(crate) fn gin_aggregate(adjacency: &Csr, h: &Array2<f64>, eps: f64) -> Array2<f64> {
    let mut agg = adjacency.apply(h);
    agg.scaled_add(1.0 + eps, h);
    agg
}

fn mask_rows(mut x: Array2<f64>, active: Option<&[bool]>) -> Array2<f64> {
    if let Some(mask) = active {
        for (mut row, &keep) in x.rows_mut().into_iter().zip(mask) {
            if !keep {
                row.fill(0.0);
            }
        }
    }
    x
}

/// One forward pass. Nodes outside `feature_mask` get all-zero input
/// features; the structure is never altered.
pub fn forward(
    model: &ModelSpec,
    g: &Graph,
    feature_mask: Option<&NodeSet>,
) -> Result<Prediction, ModelError> {
    if let Some(mask) = feature_mask {
        g.check_nodes(mask)?;
    }
    let evaluator = Evaluator::new(model, g)?;
    let active = feature_mask.map(|m| m.to_mask(g.num_nodes()));
    Ok(evaluator.predict(active.as_deref()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::{Architecture, ModelType};
    use ndarray::array;

    fn path(n: usize) -> Graph {
        Graph::with_unit_features(n, (0..n - 1).map(|i| (i, i + 1)), 1).unwrap()
    }

    #[test]
    fn normalized_adjacency_examples() {
        let single = Graph::with_unit_features(1, [], 1).unwrap();
        assert_eq!(normalize_adjacency(&single), array![[1.0]]);
        assert_eq!(normalize_adjacency(&path(2)), array![[0.5, 0.5], [0.5, 0.5]]);
        let a = normalize_adjacency(&path(3));
        assert!((a[[0, 0]] - 0.5).abs() < 1e-15);
        assert!((a[[0, 1]] - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!((a[[1, 1]] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(a, a.t());
    }

    #[test]
    fn hand_computed_two_node_logits() {
        // features [1] and [2], W = [[1, 1]], classifier = identity, mean readout.
        // Â = 0.5 everywhere → every row of ÂXW is [1.5, 1.5].
        let g = Graph::new(2, [(0, 1)], array![[1.0], [2.0]]).unwrap();
        let model = ModelSpec::new(
            ModelType::Gcn,
            vec![LayerSpec::Gcn {
                weight: array![[1.0, 1.0]],
                bias: None,
            }],
            Readout::Mean,
            Linear {
                weight: array![[1.0, 0.0], [0.0, 1.0]],
                bias: array![0.0, 0.0],
            },
        )
        .unwrap();
        let p = forward(&model, &g, None).unwrap();
        assert_eq!(p.logits, vec![1.5, 1.5]);
        assert_eq!(p.probabilities, vec![0.5, 0.5]);
        assert_eq!(p.predicted_class, 0);

        // mask node 1: rows become [0.5, 0.5]
        let p = forward(&model, &g, Some(&NodeSet::from([0]))).unwrap();
        assert_eq!(p.logits, vec![0.5, 0.5]);
    }

    #[test]
    fn full_mask_is_identity_and_zero_features_normalize() {
        for model_type in [ModelType::Gcn, ModelType::Gin] {
            let arch = Architecture::three_layer(model_type, 1, 3, Readout::Max);
            let model = ModelSpec::init(&arch, 9).unwrap();
            let g = path(5);
            let plain = forward(&model, &g, None).unwrap();
            let masked = forward(&model, &g, Some(&g.all_nodes())).unwrap();
            assert_eq!(plain, masked);
            let zeroed = forward(&model, &g, Some(&NodeSet::new())).unwrap();
            let total: f64 = zeroed.probabilities.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn node_level_needs_target() {
        let arch = Architecture::three_layer(ModelType::Gcn, 1, 4, Readout::None);
        let model = ModelSpec::init(&arch, 1).unwrap();
        let g = path(4);
        assert!(matches!(forward(&model, &g, None), Err(ModelError::MissingTarget)));
        let g = g.with_target_node(Some(2)).unwrap();
        assert_eq!(forward(&model, &g, None).unwrap().logits.len(), 4);
    }

    #[test]
    fn input_dim_mismatch() {
        let arch = Architecture::three_layer(ModelType::Gcn, 3, 2, Readout::Mean);
        let model = ModelSpec::init(&arch, 1).unwrap();
        assert!(matches!(
            forward(&model, &path(3), None),
            Err(ModelError::InputDim { expected: 3, found: 1 })
        ));
    }

    #[test]
    fn unit_rows_leave_zero_rows_alone() {
        let (y, norms) = l2_rows(array![[3.0, 4.0], [0.0, 0.0]]);
        assert_eq!(y, array![[0.6, 0.8], [0.0, 0.0]]);
        assert_eq!(norms[0], 5.0);
        // a step along the row itself has no effect on its direction
        let dh = l2_rows_backward(&array![[0.6, 0.8], [1.0, 0.0]], &y, &norms);
        assert!(dh.row(0).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn softmax_handles_extreme_logits() {
        let p = softmax(&[1000.0, -1000.0, 0.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(argmax(&[0.3, 0.7, 0.7]), 1);
    }
}
