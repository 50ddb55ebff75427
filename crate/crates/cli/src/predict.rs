use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use subgraph_explainer::dataset::read_dataset;
use subgraph_explainer::gnn::{weights, Evaluator};

use crate::common::{select_cases, write_jsonl, Selection, SplitPart, Task};
use crate::merge_fields;
use crate::settings::{require, List};

/// Dump logits and class probabilities for every selected instance.
#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct PredictArgs {
    #[arg(long, env = "SUBGRAPHX_MODEL")]
    pub model: Option<PathBuf>,
    #[arg(long, env = "SUBGRAPHX_DATA")]
    pub data: Option<PathBuf>,
    /// `all` or comma-separated graph ids.
    #[arg(long, env = "SUBGRAPHX_GRAPHS")]
    pub graphs: Option<String>,
    /// Target nodes for node classifiers; defaults to every node.
    #[arg(long, env = "SUBGRAPHX_TARGET_NODE")]
    pub target_node: Option<List<usize>>,
    #[arg(long, env = "SUBGRAPHX_SPLIT_REPORT")]
    pub split_report: Option<PathBuf>,
    #[arg(long, value_enum, env = "SUBGRAPHX_SPLIT")]
    pub split: Option<SplitPart>,
    #[arg(long, env = "SUBGRAPHX_OUT")]
    pub out: Option<PathBuf>,
}

merge_fields!(PredictArgs { model, data, graphs, target_node, split_report, split, out });

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogitsRow {
    pub graph_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_node: Option<usize>,
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub predicted_class: usize,
}

pub fn run(args: PredictArgs) -> anyhow::Result<()> {
    let model = weights::load(&require(args.model, "model")?)?;
    let instances = read_dataset(&require(args.data, "data")?)?;
    let out = require(args.out, "out")?;

    let every_node;
    let mut targets = args.target_node.as_ref();
    if model.is_node_level() && targets.is_none() && args.split_report.is_none() {
        let n = instances.first().map_or(0, |i| i.graph.num_nodes());
        every_node = List((0..n).collect());
        targets = Some(&every_node);
    }
    let cases = select_cases(
        &instances,
        &model,
        &Selection {
            task: None::<Task>,
            graphs: args.graphs.as_deref(),
            targets,
            split_report: args.split_report.as_deref(),
            split: args.split,
        },
    )?;

    let mut rows = Vec::with_capacity(cases.len());
    for case in &cases {
        let p = Evaluator::new(&model, &case.graph)?.predict(None);
        rows.push(LogitsRow {
            graph_id: case.graph_id.clone(),
            target_node: case.target,
            logits: p.logits,
            probabilities: p.probabilities,
            predicted_class: p.predicted_class,
        });
    }
    write_jsonl(&out, &rows)?;
    println!("wrote {} predictions to {}", rows.len(), out.display());
    Ok(())
}
