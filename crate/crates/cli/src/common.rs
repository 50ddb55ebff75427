//! Instance selection shared by `predict`, `explain` and `eval`.

use std::path::Path;

use anyhow::{anyhow, Context};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use subgraph_explainer::dataset::Instance;
use subgraph_explainer::gnn::ModelSpec;
use subgraph_explainer::graph::local_view;
use subgraph_explainer::{Graph, NodeSet};

use crate::settings::{usage, List};
use crate::train::{Members, TrainReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Graph,
    Node,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitPart {
    Train,
    Validation,
    Test,
}

/// One prediction to explain or evaluate. Node cases run on the target's
/// neighbourhood, which holds everything the model's output depends on.
pub struct Case {
    pub graph_id: String,
    pub target: Option<usize>,
    pub graph: Graph,
    /// Original index of each local node (node cases only).
    pub nodes: Option<NodeSet>,
}

impl Case {
    pub fn to_global(&self, local: &NodeSet) -> NodeSet {
        match &self.nodes {
            Some(map) => local.iter().map(|i| map.as_slice()[i]).collect(),
            None => local.clone(),
        }
    }

    pub fn to_local(&self, global: &NodeSet) -> anyhow::Result<NodeSet> {
        match &self.nodes {
            Some(map) => global
                .iter()
                .map(|v| {
                    map.as_slice()
                        .binary_search(&v)
                        .map_err(|_| anyhow!("node {v} lies outside the neighbourhood of the target"))
                })
                .collect(),
            None => Ok(global.clone()),
        }
    }

    pub fn key(&self) -> String {
        match self.target {
            Some(t) => format!("{}#{t}", self.graph_id),
            None => self.graph_id.clone(),
        }
    }
}

/// Which instances a command should process.
#[derive(Default)]
pub struct Selection<'a> {
    pub task: Option<Task>,
    /// `all` or a comma-separated id list.
    pub graphs: Option<&'a str>,
    pub targets: Option<&'a List<usize>>,
    pub split_report: Option<&'a Path>,
    pub split: Option<SplitPart>,
}

fn split_members(report: &TrainReport, part: SplitPart) -> &Members {
    match part {
        SplitPart::Train => &report.split.train,
        SplitPart::Validation => &report.split.validation,
        SplitPart::Test => &report.split.test,
    }
}

pub fn task_of(model: &ModelSpec, requested: Option<Task>) -> anyhow::Result<Task> {
    let native = if model.is_node_level() { Task::Node } else { Task::Graph };
    match requested {
        Some(t) if t != native => Err(usage(format!("the model is a {native:?}-level classifier, not {t:?}-level"))),
        _ => Ok(native),
    }
}

pub fn select_cases(instances: &[Instance], model: &ModelSpec, sel: &Selection) -> anyhow::Result<Vec<Case>> {
    let task = task_of(model, sel.task)?;
    let report = sel.split_report.map(TrainReport::load).transpose()?;
    let members = match (&report, sel.split) {
        (Some(r), part) => Some(split_members(r, part.unwrap_or(SplitPart::Test))),
        (None, Some(_)) => return Err(usage("--split needs --split-report")),
        (None, None) => None,
    };

    let wanted: Option<Vec<&str>> = match (sel.graphs, members) {
        (Some("all"), _) | (None, None) => None,
        (Some(list), _) => Some(list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()),
        (None, Some(Members::Graphs(ids))) => Some(ids.iter().map(String::as_str).collect()),
        (None, Some(Members::Nodes(_))) => None,
    };
    let chosen: Vec<&Instance> = match &wanted {
        None => instances.iter().collect(),
        Some(ids) => {
            let mut out = Vec::with_capacity(ids.len());
            for id in ids {
                out.push(
                    instances
                        .iter()
                        .find(|i| i.id == *id)
                        .ok_or_else(|| anyhow!("no graph with id {id:?}"))?,
                );
            }
            out
        }
    };

    let mut cases = Vec::new();
    match task {
        Task::Graph => {
            if sel.targets.is_some() {
                return Err(usage("--target-node applies to node tasks only"));
            }
            for inst in chosen {
                cases.push(Case {
                    graph_id: inst.id.clone(),
                    target: None,
                    graph: inst.graph.clone(),
                    nodes: None,
                });
            }
        }
        Task::Node => {
            let targets: Vec<usize> = match (sel.targets, members) {
                (Some(list), _) => list.0.clone(),
                (None, Some(Members::Nodes(nodes))) => nodes.clone(),
                _ => return Err(usage("node tasks need --target-node (or a node-task --split-report)")),
            };
            for inst in chosen {
                for &t in &targets {
                    cases.push(case_for(instances, model, &inst.id, Some(t))?);
                }
            }
        }
    }
    cases.sort_by(|a, b| (&a.graph_id, a.target).cmp(&(&b.graph_id, b.target)));
    cases.dedup_by(|a, b| a.graph_id == b.graph_id && a.target == b.target);
    Ok(cases)
}

/// The case for one (graph, target) pair of a dataset.
pub fn case_for(instances: &[Instance], model: &ModelSpec, graph_id: &str, target: Option<usize>) -> anyhow::Result<Case> {
    let inst = instances
        .iter()
        .find(|i| i.id == graph_id)
        .ok_or_else(|| anyhow!("no graph with id {graph_id:?}"))?;
    let (graph, nodes) = match target {
        Some(t) => {
            let (g, nodes) = local_view(&inst.graph, t, model.num_layers() + 1)
                .with_context(|| format!("target node {t} of {graph_id}"))?;
            (g, Some(nodes))
        }
        None => (inst.graph.clone(), None),
    };
    Ok(Case {
        graph_id: graph_id.to_owned(),
        target,
        graph,
        nodes,
    })
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut text = String::new();
    for row in rows {
        text.push_str(&serde_json::to_string(row)?);
        text.push('\n');
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<Vec<T>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1)))
        .collect()
}
