//! GCN and GIN classifiers: model definition, forward inference, analytic
//! gradients and the weight-file format.

mod forward;
mod train;
pub mod weights;

pub use forward::{forward, normalize_adjacency, softmax, Evaluator, Prediction};
pub use train::{
    accuracy, fit, fit_observed, loss_and_gradients, predict_targets, train, train_observed, Example, Fit, FitConfig, Optimizer,
    Target, TrainConfig,
};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::GraphError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("graph has {found} feature columns, model expects {expected}")]
    InputDim { expected: usize, found: usize },
    #[error("node-level model needs a target node")]
    MissingTarget,
    #[error("{layer}: expected input dimension {expected}, found {found}")]
    DimensionChain {
        layer: String,
        expected: usize,
        found: usize,
    },
    #[error("{0}: non-finite parameter")]
    NonFinite(String),
    #[error("{0}: layer kind does not match model type")]
    LayerKind(String),
    #[error("model needs at least one layer")]
    NoLayers,
    #[error("training set is empty")]
    EmptyDataset,
    #[error("example {0} has no label")]
    MissingLabel(usize),
    #[error("label {label} out of range for {num_classes} classes")]
    LabelRange { label: usize, num_classes: usize },
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelType {
    Gcn,
    Gin,
}

/// Pooling over node embeddings. `None` marks a node-level classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    Max,
    Mean,
    None,
}

/// Dense affine map; `weight` is `in × out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    fn zeros_like(&self) -> Linear {
        Linear {
            weight: Array2::zeros(self.weight.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    /// `relu(Â H W + b)` with symmetric normalization and self-loops.
    Gcn {
        weight: Array2<f64>,
        bias: Option<Array1<f64>>,
    },
    /// `relu(MLP((1 + eps) h + Σ_neighbors h))`, two-layer MLP with inner ReLU.
    Gin {
        mlp1: Linear,
        mlp2: Linear,
        eps: f64,
    },
}

impl LayerSpec {
    pub fn input_dim(&self) -> usize {
        match self {
            LayerSpec::Gcn { weight, .. } => weight.nrows(),
            LayerSpec::Gin { mlp1, .. } => mlp1.weight.nrows(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            LayerSpec::Gcn { weight, .. } => weight.ncols(),
            LayerSpec::Gin { mlp2, .. } => mlp2.weight.ncols(),
        }
    }

    fn zeros_like(&self) -> LayerSpec {
        match self {
            LayerSpec::Gcn { weight, bias } => LayerSpec::Gcn {
                weight: Array2::zeros(weight.raw_dim()),
                bias: bias.as_ref().map(|b| Array1::zeros(b.raw_dim())),
            },
            LayerSpec::Gin { mlp1, mlp2, eps } => LayerSpec::Gin {
                mlp1: mlp1.zeros_like(),
                mlp2: mlp2.zeros_like(),
                eps: *eps,
            },
        }
    }
}

/// Layered GNN with a linear classifier head.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    model_type: ModelType,
    layers: Vec<LayerSpec>,
    readout: Readout,
    classifier: Linear,
    normalize: bool,
}

/// Shape description used to initialize a fresh model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub model_type: ModelType,
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    /// GIN only: width of the inner MLP layer. Defaults to the layer output width.
    #[serde(default)]
    pub mlp_hidden: Option<usize>,
    pub num_classes: usize,
    pub readout: Readout,
    /// GCN only: whether layers carry a bias vector.
    pub bias: bool,
    /// Scale each node embedding to unit L2 norm after every layer.
    #[serde(default)]
    pub normalize: bool,
}

impl Architecture {
    /// Three 20-wide layers, the configuration used for the synthetic benchmarks.
    pub fn three_layer(model_type: ModelType, input_dim: usize, num_classes: usize, readout: Readout) -> Self {
        Architecture {
            model_type,
            input_dim,
            hidden: vec![20, 20, 20],
            mlp_hidden: None,
            num_classes,
            readout,
            bias: true,
            normalize: false,
        }
    }
}

fn check_finite<'a>(name: &str, values: impl IntoIterator<Item = &'a f64>) -> Result<(), ModelError> {
    if values.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ModelError::NonFinite(name.to_string()))
    }
}

fn check_dim(layer: String, expected: usize, found: usize) -> Result<(), ModelError> {
    if expected == found {
        Ok(())
    } else {
        Err(ModelError::DimensionChain {
            layer,
            expected,
            found,
        })
    }
}

impl ModelSpec {
    pub fn new(
        model_type: ModelType,
        layers: Vec<LayerSpec>,
        readout: Readout,
        classifier: Linear,
    ) -> Result<Self, ModelError> {
        if layers.is_empty() {
            return Err(ModelError::NoLayers);
        }
        for (i, layer) in layers.iter().enumerate() {
            let name = format!("layers[{i}]");
            if i > 0 {
                check_dim(name.clone(), layers[i - 1].output_dim(), layer.input_dim())?;
            }
            match (model_type, layer) {
                (ModelType::Gcn, LayerSpec::Gcn { weight, bias }) => {
                    check_finite(&name, weight.iter())?;
                    if let Some(b) = bias {
                        check_dim(format!("{name}.bias"), weight.ncols(), b.len())?;
                        check_finite(&name, b.iter())?;
                    }
                }
                (ModelType::Gin, LayerSpec::Gin { mlp1, mlp2, eps }) => {
                    check_dim(format!("{name}.mlp_b1"), mlp1.weight.ncols(), mlp1.bias.len())?;
                    check_dim(format!("{name}.mlp_w2"), mlp1.weight.ncols(), mlp2.weight.nrows())?;
                    check_dim(format!("{name}.mlp_b2"), mlp2.weight.ncols(), mlp2.bias.len())?;
                    check_finite(&name, mlp1.weight.iter().chain(mlp1.bias.iter()))?;
                    check_finite(&name, mlp2.weight.iter().chain(mlp2.bias.iter()))?;
                    check_finite(&name, [eps])?;
                }
                _ => return Err(ModelError::LayerKind(name)),
            }
        }
        let last = layers.last().map(LayerSpec::output_dim).unwrap_or_default();
        check_dim("classifier".into(), last, classifier.weight.nrows())?;
        check_dim("classifier.bias".into(), classifier.weight.ncols(), classifier.bias.len())?;
        check_finite("classifier", classifier.weight.iter().chain(classifier.bias.iter()))?;
        Ok(ModelSpec {
            model_type,
            layers,
            readout,
            classifier,
            normalize: false,
        })
    }

    /// Toggles unit-norm scaling of node embeddings after every layer.
    pub fn with_normalize(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }

    /// Glorot-uniform weights, zero biases, deterministic in `seed`.
    pub fn init(arch: &Architecture, seed: u64) -> Result<Self, ModelError> {
        if arch.hidden.is_empty() {
            return Err(ModelError::NoLayers);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Biases start in [0, 1): with zero biases and constant input
        // features every node embedding starts on one ray, and positive
        // offsets keep most units alive.
        let mut linear = |rows: usize, cols: usize| {
            let s = (6.0 / (rows + cols) as f64).sqrt();
            let weight = Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-s..=s));
            let bias = Array1::from_shape_fn(cols, |_| rng.gen_range(0.0..1.0));
            Linear { weight, bias }
        };
        let mut layers = Vec::with_capacity(arch.hidden.len());
        let mut in_dim = arch.input_dim;
        for &out in &arch.hidden {
            let layer = match arch.model_type {
                ModelType::Gcn => {
                    let Linear { weight, bias } = linear(in_dim, out);
                    LayerSpec::Gcn {
                        weight,
                        bias: arch.bias.then_some(bias),
                    }
                }
                ModelType::Gin => {
                    let inner = arch.mlp_hidden.unwrap_or(out);
                    LayerSpec::Gin {
                        mlp1: linear(in_dim, inner),
                        mlp2: linear(inner, out),
                        eps: 0.0,
                    }
                }
            };
            layers.push(layer);
            in_dim = out;
        }
        let classifier = linear(in_dim, arch.num_classes);
        Ok(ModelSpec::new(arch.model_type, layers, arch.readout, classifier)?.with_normalize(arch.normalize))
    }

    pub fn model_type(&self) -> ModelType {
        self.model_type
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn readout(&self) -> Readout {
        self.readout
    }

    pub fn normalizes(&self) -> bool {
        self.normalize
    }

    pub fn is_node_level(&self) -> bool {
        self.readout == Readout::None
    }

    pub fn classifier(&self) -> &Linear {
        &self.classifier
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.classifier.weight.ncols()
    }

    /// Same shapes, every trainable entry zero.
    pub(crate) fn zeros_like(&self) -> ModelSpec {
        ModelSpec {
            model_type: self.model_type,
            layers: self.layers.iter().map(LayerSpec::zeros_like).collect(),
            readout: self.readout,
            classifier: self.classifier.zeros_like(),
            normalize: self.normalize,
        }
    }

    /// Trainable parameter blocks in a fixed order. GIN `eps` is not trainable.
    pub fn parameters(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                LayerSpec::Gcn { weight, bias } => {
                    out.push((format!("layers[{i}].weight"), slice(weight)));
                    if let Some(b) = bias {
                        out.push((format!("layers[{i}].bias"), slice1(b)));
                    }
                }
                LayerSpec::Gin { mlp1, mlp2, .. } => {
                    out.push((format!("layers[{i}].mlp_w1"), slice(&mlp1.weight)));
                    out.push((format!("layers[{i}].mlp_b1"), slice1(&mlp1.bias)));
                    out.push((format!("layers[{i}].mlp_w2"), slice(&mlp2.weight)));
                    out.push((format!("layers[{i}].mlp_b2"), slice1(&mlp2.bias)));
                }
            }
        }
        out.push(("classifier.weight".into(), slice(&self.classifier.weight)));
        out.push(("classifier.bias".into(), slice1(&self.classifier.bias)));
        out
    }

    /// Mutable view of [`ModelSpec::parameters`], same order.
    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for layer in &mut self.layers {
            match layer {
                LayerSpec::Gcn { weight, bias } => {
                    out.push(slice_mut(weight));
                    if let Some(b) = bias {
                        out.push(slice1_mut(b));
                    }
                }
                LayerSpec::Gin { mlp1, mlp2, .. } => {
                    out.push(slice_mut(&mut mlp1.weight));
                    out.push(slice1_mut(&mut mlp1.bias));
                    out.push(slice_mut(&mut mlp2.weight));
                    out.push(slice1_mut(&mut mlp2.bias));
                }
            }
        }
        out.push(slice_mut(&mut self.classifier.weight));
        out.push(slice1_mut(&mut self.classifier.bias));
        out
    }
}

// All arrays in this crate are built in standard (row-major) layout.
fn slice(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("row-major array")
}

fn slice1(a: &Array1<f64>) -> &[f64] {
    a.as_slice().expect("contiguous array")
}

fn slice_mut(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("row-major array")
}

fn slice1_mut(a: &mut Array1<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("contiguous array")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_and_chained() {
        let arch = Architecture::three_layer(ModelType::Gcn, 10, 2, Readout::Mean);
        let a = ModelSpec::init(&arch, 3).unwrap();
        let b = ModelSpec::init(&arch, 3).unwrap();
        let c = ModelSpec::init(&arch, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.input_dim(), 10);
        assert_eq!(a.num_classes(), 2);
        assert_eq!(a.num_layers(), 3);
    }

    #[test]
    fn glorot_bounds() {
        let arch = Architecture::three_layer(ModelType::Gin, 10, 4, Readout::Max);
        let m = ModelSpec::init(&arch, 1).unwrap();
        let s = (6.0f64 / 30.0).sqrt();
        for (name, values) in m.parameters() {
            if name == "layers[0].mlp_w1" {
                assert!(values.iter().all(|v| v.abs() <= s));
            }
            if name.ends_with("bias") || name.contains("mlp_b") {
                assert!(values.iter().all(|&v| (0.0..1.0).contains(&v)));
            }
        }
    }

    #[test]
    fn rejects_broken_chain() {
        let layers = vec![
            LayerSpec::Gcn {
                weight: Array2::zeros((3, 4)),
                bias: None,
            },
            LayerSpec::Gcn {
                weight: Array2::zeros((5, 2)),
                bias: None,
            },
        ];
        let classifier = Linear {
            weight: Array2::zeros((2, 2)),
            bias: Array1::zeros(2),
        };
        let err = ModelSpec::new(ModelType::Gcn, layers, Readout::Max, classifier).unwrap_err();
        assert!(err.to_string().contains("layers[1]"), "{err}");
    }

    #[test]
    fn rejects_mixed_kinds_and_nan() {
        let gin = LayerSpec::Gin {
            mlp1: Linear {
                weight: Array2::zeros((2, 2)),
                bias: Array1::zeros(2),
            },
            mlp2: Linear {
                weight: Array2::zeros((2, 2)),
                bias: Array1::zeros(2),
            },
            eps: 0.0,
        };
        let classifier = Linear {
            weight: Array2::zeros((2, 2)),
            bias: Array1::zeros(2),
        };
        assert!(matches!(
            ModelSpec::new(ModelType::Gcn, vec![gin], Readout::Max, classifier.clone()),
            Err(ModelError::LayerKind(_))
        ));
        let mut w = Array2::zeros((2, 2));
        w[[0, 1]] = f64::NAN;
        let gcn = LayerSpec::Gcn { weight: w, bias: None };
        assert!(matches!(
            ModelSpec::new(ModelType::Gcn, vec![gcn], Readout::Max, classifier),
            Err(ModelError::NonFinite(_))
        ));
    }
}
