use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use subgraph_explainer::dataset::{read_dataset, split_indices, Instance, Split};
use subgraph_explainer::gnn::{
    accuracy, fit_observed, weights, Architecture, Example, FitConfig, ModelType, Optimizer, Readout, TrainConfig,
};

use crate::merge_fields;
use crate::settings::{require, List};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gcn,
    Gin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolKind {
    Max,
    Mean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Gd,
}

/// Train a classifier on a dataset file and write its weight file.
#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct TrainArgs {
    #[arg(long, env = "SUBGRAPHX_DATA")]
    pub data: Option<PathBuf>,
    #[arg(long = "gnn-model", value_enum, env = "SUBGRAPHX_GNN_MODEL")]
    pub gnn_model: Option<ModelKind>,
    /// Graph readout (ignored for node classification).
    #[arg(long, value_enum, env = "SUBGRAPHX_READOUT")]
    pub readout: Option<PoolKind>,
    /// Layer widths, e.g. `20,20,20`.
    #[arg(long, env = "SUBGRAPHX_HIDDEN")]
    pub hidden: Option<List<usize>>,
    /// Scale node embeddings to unit L2 norm after every layer.
    #[arg(long, env = "SUBGRAPHX_NORMALIZE", num_args = 0..=1, default_missing_value = "true")]
    pub normalize: Option<bool>,
    #[arg(long, env = "SUBGRAPHX_EPOCHS")]
    pub epochs: Option<usize>,
    #[arg(long = "lr", env = "SUBGRAPHX_LR")]
    pub lr: Option<f64>,
    #[arg(long, value_enum, env = "SUBGRAPHX_OPTIMIZER")]
    pub optimizer: Option<OptimizerKind>,
    /// Maximum number of initialisations; the best on the validation part wins.
    #[arg(long, env = "SUBGRAPHX_RESTARTS")]
    pub restarts: Option<usize>,
    /// Validation accuracy at which restarting stops.
    #[arg(long, env = "SUBGRAPHX_TARGET_ACCURACY")]
    pub target_accuracy: Option<f64>,
    #[arg(long, env = "SUBGRAPHX_SEED")]
    pub seed: Option<u64>,
    /// Weight file to write.
    #[arg(long, env = "SUBGRAPHX_OUT")]
    pub out: Option<PathBuf>,
    /// Training report (split membership and accuracies); defaults to
    /// `<out>.report.json`.
    #[arg(long, env = "SUBGRAPHX_REPORT")]
    pub report: Option<PathBuf>,
}

merge_fields!(TrainArgs {
    data,
    gnn_model,
    readout,
    hidden,
    normalize,
    epochs,
    lr,
    optimizer,
    restarts,
    target_accuracy,
    seed,
    out,
    report
});

/// Members of each split: graph ids, or node indices for node tasks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Members {
    Graphs(Vec<String>),
    Nodes(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub train: Members,
    pub validation: Members,
    pub test: Members,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Accuracies {
    pub train: f64,
    pub validation: f64,
    /// Absent when the test part is empty.
    pub test: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub task: String,
    pub dataset: String,
    pub architecture: Architecture,
    pub fit: FitConfig,
    pub seed: u64,
    pub restart: usize,
    pub attempts: Vec<f64>,
    pub accuracy: Accuracies,
    pub split: SplitReport,
}

impl TrainReport {
    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

fn pick<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

/// The single node-classification record, if the dataset is one.
pub fn node_dataset(instances: &[Instance]) -> anyhow::Result<Option<&Instance>> {
    let labelled = instances.iter().filter(|i| i.node_labels.is_some()).count();
    match (labelled, instances.len()) {
        (0, _) => Ok(None),
        (1, 1) => Ok(Some(&instances[0])),
        _ => bail!("node-labelled datasets must hold exactly one graph"),
    }
}

pub fn run(args: TrainArgs) -> anyhow::Result<()> {
    let data_path = require(args.data, "data")?;
    let out = require(args.out, "out")?;
    let report_path = args.report.unwrap_or_else(|| {
        let mut p = out.clone().into_os_string();
        p.push(".report.json");
        p.into()
    });
    let seed = args.seed.unwrap_or(0);
    let defaults = FitConfig::default();
    let fit_config = FitConfig {
        train: TrainConfig {
            epochs: args.epochs.unwrap_or(defaults.train.epochs),
            learning_rate: args.lr.unwrap_or(defaults.train.learning_rate),
            optimizer: match args.optimizer.unwrap_or(OptimizerKind::Adam) {
                OptimizerKind::Adam => Optimizer::adam(),
                OptimizerKind::Gd => Optimizer::GradientDescent,
            },
        },
        restarts: args.restarts.unwrap_or(defaults.restarts),
        target_accuracy: args.target_accuracy.unwrap_or(defaults.target_accuracy),
    };

    let instances = read_dataset(&data_path)?;
    if instances.is_empty() {
        bail!("{} holds no graphs", data_path.display());
    }
    let input_dim = instances[0].graph.feature_dim();
    if instances.iter().any(|i| i.graph.feature_dim() != input_dim) {
        bail!("graphs have different feature widths");
    }
    let model_type = match args.gnn_model.unwrap_or(ModelKind::Gcn) {
        ModelKind::Gcn => ModelType::Gcn,
        ModelKind::Gin => ModelType::Gin,
    };
    let hidden = args.hidden.map_or_else(|| vec![20, 20, 20], |l| l.0);
    let node_data = node_dataset(&instances)?;

    let (task, split, num_classes, sets): (&str, SplitReport, usize, [Vec<Example>; 3]) = match node_data {
        Some(inst) => {
            let labels = inst.node_labels.as_ref().expect("node dataset");
            let Split { train, validation, test } = split_indices(labels.len(), seed);
            let example = |idx: &[usize]| vec![Example::node_level(&inst.graph, idx.iter().map(|&v| (v, labels[v])))];
            let sets = [example(&train), example(&validation), example(&test)];
            let classes = labels.iter().max().map_or(0, |m| m + 1);
            let split = SplitReport {
                train: Members::Nodes(train),
                validation: Members::Nodes(validation),
                test: Members::Nodes(test),
            };
            ("node", split, classes, sets)
        }
        None => {
            let mut examples = Vec::with_capacity(instances.len());
            for inst in &instances {
                examples.push(
                    Example::graph_level(&inst.graph).with_context(|| format!("graph {} has no label", inst.id))?,
                );
            }
            let Split { train, validation, test } = split_indices(instances.len(), seed);
            let ids: Vec<String> = instances.iter().map(|i| i.id.clone()).collect();
            let classes = instances.iter().filter_map(|i| i.graph.label()).max().map_or(0, |m| m + 1);
            let split = SplitReport {
                train: Members::Graphs(pick(&ids, &train)),
                validation: Members::Graphs(pick(&ids, &validation)),
                test: Members::Graphs(pick(&ids, &test)),
            };
            let sets = [pick(&examples, &train), pick(&examples, &validation), pick(&examples, &test)];
            ("graph", split, classes, sets)
        }
    };
    let readout = match (task, args.readout.unwrap_or(PoolKind::Max)) {
        ("node", _) => Readout::None,
        (_, PoolKind::Max) => Readout::Max,
        (_, PoolKind::Mean) => Readout::Mean,
    };
    let arch = Architecture {
        model_type,
        input_dim,
        hidden,
        mlp_hidden: None,
        num_classes: num_classes.max(2),
        readout,
        bias: true,
        normalize: args.normalize.unwrap_or(false),
    };
    let [train_set, validation, test] = sets;
    if train_set.iter().all(|e| e.targets.is_empty()) || validation.iter().all(|e| e.targets.is_empty()) {
        bail!("dataset too small for an 80/10/10 split");
    }

    let epochs = fit_config.train.epochs;
    let fit = fit_observed(&arch, &train_set, &validation, &fit_config, seed, |restart, epoch, loss| {
        if epoch % 500 == 0 || epoch + 1 == epochs {
            eprintln!("restart {restart} epoch {epoch} loss {loss:.6}");
        }
    })?;
    let accuracy_of = |set: &[Example]| -> anyhow::Result<Option<f64>> {
        if set.iter().all(|e| e.targets.is_empty()) {
            Ok(None)
        } else {
            Ok(Some(accuracy(&fit.model, set)?))
        }
    };
    let acc = Accuracies {
        train: accuracy(&fit.model, &train_set)?,
        validation: fit.validation_accuracy,
        test: accuracy_of(&test)?,
    };
    weights::save(&fit.model, &out)?;
    let report = TrainReport {
        task: task.into(),
        dataset: data_path.display().to_string(),
        architecture: arch,
        fit: fit_config,
        seed,
        restart: fit.restart,
        attempts: fit.attempts.clone(),
        accuracy: acc.clone(),
        split,
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(&report_path, text).with_context(|| format!("writing {}", report_path.display()))?;
    let test_text = acc.test.map_or_else(|| "n/a".to_string(), |t| format!("{t:.4}"));
    println!(
        "train accuracy {:.4} validation accuracy {:.4} test accuracy {test_text} (restart {} of {})",
        acc.train,
        acc.validation,
        fit.restart + 1,
        fit.attempts.len()
    );
    println!("wrote {} and {}", out.display(), report_path.display());
    Ok(())
}
