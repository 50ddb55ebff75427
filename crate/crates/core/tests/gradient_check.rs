//! Analytic gradients against central finite differences.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subgraph_explainer::gnn::{loss_and_gradients, Architecture, Example, ModelSpec, ModelType, Readout};
use subgraph_explainer::Graph;

/// Jitter every parameter so no pre-activation sits on a ReLU kink by
/// construction.
fn jittered(arch: &Architecture, seed: u64) -> ModelSpec {
    let mut model = ModelSpec::init(arch, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for block in model.parameters_mut() {
        for w in block.iter_mut() {
            *w += rng.gen_range(-0.3..0.3);
        }
    }
    model
}

fn random_instance(seed: u64, n: usize, dim: usize, classes: usize) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((rng.gen_range(0..v), v));
    }
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(0.3) && !edges.contains(&(u, v)) {
                edges.push((u, v));
            }
        }
    }
    let feats = Array2::from_shape_fn((n, dim), |_| rng.gen_range(-1.0..1.0));
    Graph::new(n, edges, feats)
        .unwrap()
        .with_label(Some(rng.gen_range(0..classes)))
}

/// Worst |analytic - numeric| / max(|analytic|, |numeric|) over entries whose
/// absolute difference exceeds `1e-7`.
fn worst_relative_error(model: &ModelSpec, examples: &[Example]) -> (f64, String) {
    let (_, grad) = loss_and_gradients(model, examples).unwrap();
    let analytic: Vec<(String, Vec<f64>)> = grad.parameters().into_iter().map(|(n, g)| (n, g.to_vec())).collect();
    let eps = 1e-5;
    let mut worst = (0.0, String::new());
    let mut probe = model.clone();
    for (block, (name, grads)) in analytic.iter().enumerate() {
        for i in 0..grads.len() {
            let original = probe.parameters_mut()[block][i];
            probe.parameters_mut()[block][i] = original + eps;
            let (plus, _) = loss_and_gradients(&probe, examples).unwrap();
            probe.parameters_mut()[block][i] = original - eps;
            let (minus, _) = loss_and_gradients(&probe, examples).unwrap();
            probe.parameters_mut()[block][i] = original;
            let numeric = (plus - minus) / (2.0 * eps);
            let diff = (grads[i] - numeric).abs();
            if diff <= 1e-7 {
                continue;
            }
            let rel = diff / grads[i].abs().max(numeric.abs());
            if rel > worst.0 {
                worst = (rel, format!("{name}[{i}]: analytic {} numeric {numeric}", grads[i]));
            }
        }
    }
    worst
}

#[test]
fn graph_level_gradients_match_finite_differences() {
    for model_type in [ModelType::Gcn, ModelType::Gin] {
        for readout in [Readout::Max, Readout::Mean] {
            for seed in 0..10 {
                let g = random_instance(seed, 6, 3, 3);
                let mut arch = Architecture::three_layer(model_type, 3, 3, readout);
                arch.hidden = vec![5, 4, 4];
                let model = jittered(&arch, 100 + seed);
                let examples = [Example::graph_level(&g).unwrap()];
                let (err, at) = worst_relative_error(&model, &examples);
                assert!(err <= 1e-4, "{model_type:?} {readout:?} seed {seed}: {err} at {at}");
            }
        }
    }
}

#[test]
fn node_level_gradients_match_finite_differences() {
    for model_type in [ModelType::Gcn, ModelType::Gin] {
        for seed in 0..5 {
            let g = random_instance(seed, 6, 3, 3);
            let mut arch = Architecture::three_layer(model_type, 3, 3, Readout::None);
            arch.hidden = vec![5, 4];
            let model = jittered(&arch, seed);
            let examples = [Example::node_level(&g, [(0, 1), (3, 2), (5, 0)])];
            let (err, at) = worst_relative_error(&model, &examples);
            assert!(err <= 1e-4, "{model_type:?} seed {seed}: {err} at {at}");
        }
    }
}

#[test]
fn unit_norm_embeddings_backprop() {
    for model_type in [ModelType::Gcn, ModelType::Gin] {
        for readout in [Readout::Max, Readout::Mean] {
            for seed in 0..5 {
                let g = random_instance(seed, 6, 3, 3);
                let mut arch = Architecture::three_layer(model_type, 3, 3, readout);
                arch.hidden = vec![5, 4, 4];
                arch.normalize = true;
                let model = jittered(&arch, 200 + seed);
                let examples = [Example::graph_level(&g).unwrap()];
                let (err, at) = worst_relative_error(&model, &examples);
                assert!(err <= 1e-4, "{model_type:?} {readout:?} seed {seed}: {err} at {at}");
            }
        }
    }
}
