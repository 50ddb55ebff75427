//! Full-batch gradient descent on softmax cross-entropy with hand-derived
//! backpropagation.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::forward::{add_bias, argmax, classify, gin_aggregate, l2_rows, l2_rows_backward, pool, relu, softmax, Csr};
use super::{Architecture, LayerSpec, ModelError, ModelSpec, Readout};
use crate::datagen::derive_seed;
use crate::graph::Graph;

/// One supervised output: the whole graph (`node == None`) or one node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Target {
    pub node: Option<usize>,
    pub label: usize,
}

/// A graph together with the outputs supervised on it. Node-level tasks
/// put many targets on a single shared graph.
#[derive(Clone, Debug)]
pub struct Example<'a> {
    pub graph: &'a Graph,
    pub targets: Vec<Target>,
}

impl<'a> Example<'a> {
    /// Graph-level example labelled with `graph.label()`.
    pub fn graph_level(graph: &'a Graph) -> Option<Self> {
        let label = graph.label()?;
        Some(Example {
            graph,
            targets: vec![Target { node: None, label }],
        })
    }

    pub fn node_level(graph: &'a Graph, targets: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Example {
            graph,
            targets: targets
                .into_iter()
                .map(|(node, label)| Target {
                    node: Some(node),
                    label,
                })
                .collect(),
        }
    }
}

/// Update rule applied to the full-batch gradient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    /// `θ ← θ − lr · g`.
    GradientDescent,
    /// Bias-corrected first/second moment scaling of the step.
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 3000,
            learning_rate: 0.005,
            optimizer: Optimizer::adam(),
        }
    }
}

enum LayerCache {
    Gcn {
        input: Array2<f64>,
        pre: Array2<f64>,
    },
    Gin {
        aggregated: Array2<f64>,
        hidden_pre: Array2<f64>,
        hidden: Array2<f64>,
        pre: Array2<f64>,
    },
}

struct Prepared<'a> {
    example: &'a Example<'a>,
    propagation: Csr,
}

fn prepare<'a>(model: &ModelSpec, examples: &'a [Example<'a>]) -> Result<Vec<Prepared<'a>>, ModelError> {
    if examples.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    examples
        .iter()
        .enumerate()
        .map(|(i, example)| {
            let g = example.graph;
            if g.feature_dim() != model.input_dim() {
                return Err(ModelError::InputDim {
                    expected: model.input_dim(),
                    found: g.feature_dim(),
                });
            }
            if example.targets.is_empty() {
                return Err(ModelError::MissingLabel(i));
            }
            for t in &example.targets {
                if t.label >= model.num_classes() {
                    return Err(ModelError::LabelRange {
                        label: t.label,
                        num_classes: model.num_classes(),
                    });
                }
                match (model.is_node_level(), t.node) {
                    (true, Some(v)) => g.check_node(v)?,
                    (true, None) => return Err(ModelError::MissingTarget),
                    (false, _) => {}
                }
            }
            let propagation = match model.layers[0] {
                LayerSpec::Gcn { .. } => Csr::gcn_normalized(g),
                LayerSpec::Gin { .. } => Csr::adjacency(g),
            };
            Ok(Prepared {
                example,
                propagation,
            })
        })
        .collect()
}

/// Unit-norm layer outputs and their divisors, kept for backprop.
type Scaled = Option<(Array2<f64>, Array1<f64>)>;

fn forward_cached(model: &ModelSpec, graph: &Graph, propagation: &Csr) -> (Vec<LayerCache>, Vec<Scaled>, Array2<f64>) {
    let mut h = graph.features().to_owned();
    let mut caches = Vec::with_capacity(model.layers.len());
    let mut scaled = Vec::with_capacity(model.layers.len());
    for layer in &model.layers {
        match layer {
            LayerSpec::Gcn { weight, bias } => {
                let mut z = propagation.apply(&h.dot(weight));
                if let Some(b) = bias {
                    add_bias(&mut z, b);
                }
                let next = relu(&z);
                caches.push(LayerCache::Gcn { input: h, pre: z });
                h = next;
            }
            LayerSpec::Gin { mlp1, mlp2, eps } => {
                let aggregated = gin_aggregate(propagation, &h, *eps);
                let mut hidden_pre = aggregated.dot(&mlp1.weight);
                add_bias(&mut hidden_pre, &mlp1.bias);
                let hidden = relu(&hidden_pre);
                let mut z = hidden.dot(&mlp2.weight);
                add_bias(&mut z, &mlp2.bias);
                h = relu(&z);
                caches.push(LayerCache::Gin {
                    aggregated,
                    hidden_pre,
                    hidden,
                    pre: z,
                });
            }
        }
        if model.normalize {
            let (y, norms) = l2_rows(h);
            scaled.push(Some((y.clone(), norms)));
            h = y;
        } else {
            scaled.push(None);
        }
    }
    (caches, scaled, h)
}

fn relu_grad(upstream: &Array2<f64>, pre: &Array2<f64>) -> Array2<f64> {
    let mut out = upstream.clone();
    out.zip_mut_with(pre, |g, &z| {
        if z <= 0.0 {
            *g = 0.0;
        }
    });
    out
}

/// Per-class loss gradient `p - onehot`, scaled; returns the unscaled loss.
fn cross_entropy(logits: &[f64], label: usize, scale: f64) -> (f64, Array1<f64>) {
    let p = softmax(logits);
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    let loss = log_z - logits[label];
    let mut grad = Array1::from(p);
    grad[label] -= 1.0;
    grad *= scale;
    (loss, grad)
}

fn backward_example(model: &ModelSpec, prepared: &Prepared, scale: f64, grad: &mut ModelSpec) -> f64 {
    let graph = prepared.example.graph;
    let (caches, scaled, h) = forward_cached(model, graph, &prepared.propagation);
    let classifier = &model.classifier;
    let mut dh = Array2::<f64>::zeros(h.raw_dim());
    let mut loss = 0.0;

    for target in &prepared.example.targets {
        let embedding = match (model.readout, target.node) {
            (Readout::None, Some(v)) => h.row(v).to_owned(),
            (readout, _) => pool(readout, &h),
        };
        let logits = classify(classifier, embedding.view());
        let (l, dlogits) = cross_entropy(&logits, target.label, scale);
        loss += l;

        let dlogits_col = dlogits.view().insert_axis(Axis(0));
        let emb_col = embedding.view().insert_axis(Axis(1));
        grad.classifier.weight += &emb_col.dot(&dlogits_col);
        grad.classifier.bias += &dlogits;
        let demb = classifier.weight.dot(&dlogits);

        match (model.readout, target.node) {
            (Readout::None, Some(v)) => {
                let mut row = dh.row_mut(v);
                row += &demb;
            }
            (Readout::Mean, _) => {
                let share = &demb / h.nrows() as f64;
                for mut row in dh.rows_mut() {
                    row += &share;
                }
            }
            (Readout::Max, _) => {
                for (c, column) in h.columns().into_iter().enumerate() {
                    let mut best = 0;
                    for (i, &v) in column.iter().enumerate() {
                        if v > column[best] {
                            best = i;
                        }
                    }
                    dh[[best, c]] += demb[c];
                }
            }
            (Readout::None, None) => unreachable!("validated in prepare"),
        }
    }

    for (i, (layer, cache)) in model.layers.iter().zip(&caches).enumerate().rev() {
        let first = i == 0;
        if let Some((y, norms)) = &scaled[i] {
            dh = l2_rows_backward(&dh, y, norms);
        }
        match (layer, cache, &mut grad.layers[i]) {
            (
                LayerSpec::Gcn { weight, .. },
                LayerCache::Gcn { input, pre },
                LayerSpec::Gcn {
                    weight: gw,
                    bias: gb,
                },
            ) => {
                let dz = relu_grad(&dh, pre);
                if let Some(gb) = gb {
                    *gb += &dz.sum_axis(Axis(0));
                }
                let dp = prepared.propagation.apply(&dz);
                *gw += &input.t().dot(&dp);
                if !first {
                    dh = dp.dot(&weight.t());
                }
            }
            (
                LayerSpec::Gin { mlp1, mlp2, eps },
                LayerCache::Gin {
                    aggregated,
                    hidden_pre,
                    hidden,
                    pre,
                },
                LayerSpec::Gin {
                    mlp1: g1, mlp2: g2, ..
                },
            ) => {
                let dz = relu_grad(&dh, pre);
                g2.weight += &hidden.t().dot(&dz);
                g2.bias += &dz.sum_axis(Axis(0));
                let du = relu_grad(&dz.dot(&mlp2.weight.t()), hidden_pre);
                g1.weight += &aggregated.t().dot(&du);
                g1.bias += &du.sum_axis(Axis(0));
                if !first {
                    let dagg = du.dot(&mlp1.weight.t());
                    dh = gin_aggregate(&prepared.propagation, &dagg, *eps);
                }
            }
            _ => unreachable!("gradient mirrors model layout"),
        }
    }
    loss
}

fn total_targets(examples: &[Example]) -> usize {
    examples.iter().map(|e| e.targets.len()).sum()
}

fn batch_gradient(model: &ModelSpec, prepared: &[Prepared], scale: f64) -> (f64, ModelSpec) {
    let mut grad = model.zeros_like();
    let loss: f64 = prepared
        .iter()
        .map(|p| backward_example(model, p, scale, &mut grad))
        .sum();
    (loss * scale, grad)
}

/// Mean cross-entropy over all targets and its gradient, shaped like the
/// model (the gradient's GIN `eps` entries are copies, not derivatives).
pub fn loss_and_gradients(model: &ModelSpec, examples: &[Example]) -> Result<(f64, ModelSpec), ModelError> {
    let prepared = prepare(model, examples)?;
    let scale = 1.0 / total_targets(examples) as f64;
    Ok(batch_gradient(model, &prepared, scale))
}

pub fn train(model: &ModelSpec, examples: &[Example], config: &TrainConfig) -> Result<ModelSpec, ModelError> {
    train_observed(model, examples, config, |_, _| {})
}

/// [`train`] with a callback receiving `(epoch, loss before the step)`.
pub fn train_observed(
    model: &ModelSpec,
    examples: &[Example],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<ModelSpec, ModelError> {
    let prepared = prepare(model, examples)?;
    let scale = 1.0 / total_targets(examples) as f64;
    let mut current = model.clone();
    let sizes: Vec<usize> = current.parameters().iter().map(|(_, p)| p.len()).collect();
    let mut first_moment: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; n]).collect();
    let mut second_moment = first_moment.clone();
    for epoch in 0..config.epochs {
        let (loss, grad) = batch_gradient(&current, &prepared, scale);
        if !loss.is_finite() {
            return Err(ModelError::Diverged { epoch, loss });
        }
        on_epoch(epoch, loss);
        if config.learning_rate == 0.0 {
            continue;
        }
        let grads: Vec<Vec<f64>> = grad.parameters().into_iter().map(|(_, g)| g.to_vec()).collect();
        let lr = config.learning_rate;
        match config.optimizer {
            Optimizer::GradientDescent => {
                for (param, g) in current.parameters_mut().into_iter().zip(&grads) {
                    for (p, d) in param.iter_mut().zip(g) {
                        *p -= lr * d;
                    }
                }
            }
            Optimizer::Adam { beta1, beta2, epsilon } => {
                let step = (epoch + 1) as i32;
                let correct1 = 1.0 - beta1.powi(step);
                let correct2 = 1.0 - beta2.powi(step);
                let params = current.parameters_mut().into_iter();
                for (((param, g), m), v) in params.zip(&grads).zip(&mut first_moment).zip(&mut second_moment) {
                    for i in 0..param.len() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                        let m_hat = m[i] / correct1;
                        let v_hat = v[i] / correct2;
                        param[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
        }
    }
    Ok(current)
}

/// Predicted class of every target, in example order.
pub fn predict_targets(model: &ModelSpec, examples: &[Example]) -> Result<Vec<usize>, ModelError> {
    let prepared = prepare(model, examples)?;
    let mut out = Vec::with_capacity(total_targets(examples));
    for p in &prepared {
        let (_, _, h) = forward_cached(model, p.example.graph, &p.propagation);
        for target in &p.example.targets {
            let embedding = match (model.readout, target.node) {
                (Readout::None, Some(v)) => h.row(v).to_owned(),
                (readout, _) => pool(readout, &h),
            };
            out.push(argmax(&classify(&model.classifier, embedding.view())));
        }
    }
    Ok(out)
}

/// Fraction of targets whose predicted class equals the label.
pub fn accuracy(model: &ModelSpec, examples: &[Example]) -> Result<f64, ModelError> {
    let predicted = predict_targets(model, examples)?;
    if predicted.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let labels = examples.iter().flat_map(|e| e.targets.iter().map(|t| t.label));
    let correct = predicted.iter().zip(labels).filter(|(p, l)| **p == *l).count();
    Ok(correct as f64 / predicted.len() as f64)
}

/// Training from several initialisations, keeping the model that does best
/// on held-out examples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub train: TrainConfig,
    /// Maximum number of initialisations tried.
    pub restarts: usize,
    /// Stop at the first model reaching this validation accuracy.
    pub target_accuracy: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            train: TrainConfig::default(),
            restarts: 5,
            target_accuracy: 0.95,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Fit {
    pub model: ModelSpec,
    /// Index of the chosen restart; its init seed is `derive_seed(seed, restart)`.
    pub restart: usize,
    pub validation_accuracy: f64,
    /// Validation accuracy of every restart run.
    pub attempts: Vec<f64>,
}

/// Trains from `derive_seed(seed, r)` for `r = 0, 1, ..` until a model
/// reaches the target validation accuracy or the restarts run out, then
/// returns the best one (earliest on ties).
pub fn fit(
    arch: &Architecture,
    train_set: &[Example],
    validation: &[Example],
    config: &FitConfig,
    seed: u64,
) -> Result<Fit, ModelError> {
    fit_observed(arch, train_set, validation, config, seed, |_, _, _| {})
}

/// [`fit`] with a callback receiving `(restart, epoch, loss)`.
pub fn fit_observed(
    arch: &Architecture,
    train_set: &[Example],
    validation: &[Example],
    config: &FitConfig,
    seed: u64,
    mut on_epoch: impl FnMut(usize, usize, f64),
) -> Result<Fit, ModelError> {
    let mut best: Option<Fit> = None;
    let mut attempts = Vec::new();
    for restart in 0..config.restarts.max(1) {
        let init = ModelSpec::init(arch, derive_seed(seed, restart as u64))?;
        let model = train_observed(&init, train_set, &config.train, |e, l| on_epoch(restart, e, l))?;
        let acc = accuracy(&model, validation)?;
        attempts.push(acc);
        if best.as_ref().is_none_or(|b| acc > b.validation_accuracy) {
            best = Some(Fit {
                model,
                restart,
                validation_accuracy: acc,
                attempts: Vec::new(),
            });
        }
        if acc >= config.target_accuracy {
            break;
        }
    }
    let mut best = best.expect("at least one restart");
    best.attempts = attempts;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::{forward, Architecture, ModelType};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_graph(seed: u64, n: usize, dim: usize) -> Graph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for v in 1..n {
            edges.push((rng.gen_range(0..v), v));
        }
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(0.25) && !edges.contains(&(u, v)) {
                    edges.push((u, v));
                }
            }
        }
        let feats = Array2::from_shape_fn((n, dim), |_| rng.gen_range(-1.0..1.0));
        Graph::new(n, edges, feats).unwrap()
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let g = random_graph(1, 6, 3).with_label(Some(1));
        let arch = Architecture::three_layer(ModelType::Gcn, 3, 2, Readout::Max);
        let init = ModelSpec::init(&arch, 5).unwrap();
        let ex = [Example::graph_level(&g).unwrap()];
        for optimizer in [Optimizer::GradientDescent, Optimizer::adam()] {
            let config = TrainConfig {
                epochs: 10,
                learning_rate: 0.0,
                optimizer,
            };
            assert_eq!(train(&init, &ex, &config).unwrap(), init);
        }
    }

    #[test]
    fn one_small_step_does_not_increase_loss() {
        let g = random_graph(2, 6, 3).with_label(Some(0));
        for model_type in [ModelType::Gcn, ModelType::Gin] {
            let arch = Architecture::three_layer(model_type, 3, 2, Readout::Mean);
            let init = ModelSpec::init(&arch, 11).unwrap();
            let ex = [Example::graph_level(&g).unwrap()];
            let (before, _) = loss_and_gradients(&init, &ex).unwrap();
            let config = TrainConfig {
                epochs: 1,
                learning_rate: 1e-3,
                optimizer: Optimizer::GradientDescent,
            };
            let trained = train(&init, &ex, &config).unwrap();
            let (after, _) = loss_and_gradients(&trained, &ex).unwrap();
            assert!(after <= before, "{model_type:?}: {after} > {before}");
        }
    }

    #[test]
    fn loss_matches_forward_probabilities() {
        let g = random_graph(3, 6, 2).with_label(Some(1));
        let arch = Architecture::three_layer(ModelType::Gin, 2, 3, Readout::Max);
        let model = ModelSpec::init(&arch, 2).unwrap();
        let (loss, _) = loss_and_gradients(&model, &[Example::graph_level(&g).unwrap()]).unwrap();
        let p = forward(&model, &g, None).unwrap();
        assert!((loss + p.probabilities[1].ln()).abs() < 1e-12);
    }

    #[test]
    fn divergence_is_reported() {
        let g = random_graph(4, 6, 2).with_label(Some(1));
        let arch = Architecture::three_layer(ModelType::Gcn, 2, 2, Readout::Mean);
        let model = ModelSpec::init(&arch, 2).unwrap();
        let config = TrainConfig {
            epochs: 50,
            learning_rate: 1e200,
            optimizer: Optimizer::GradientDescent,
        };
        let err = train(&model, &[Example::graph_level(&g).unwrap()], &config).unwrap_err();
        assert!(matches!(err, ModelError::Diverged { .. }), "{err}");
    }

    #[test]
    fn rejects_bad_labels() {
        let g = random_graph(4, 6, 2).with_label(Some(7));
        let arch = Architecture::three_layer(ModelType::Gcn, 2, 2, Readout::Mean);
        let model = ModelSpec::init(&arch, 2).unwrap();
        let err = loss_and_gradients(&model, &[Example::graph_level(&g).unwrap()]).unwrap_err();
        assert!(matches!(err, ModelError::LabelRange { label: 7, .. }));
        assert!(matches!(
            loss_and_gradients(&model, &[]),
            Err(ModelError::EmptyDataset)
        ));
    }
}
