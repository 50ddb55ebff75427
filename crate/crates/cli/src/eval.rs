use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use serde::{Deserialize, Serialize};
use subgraph_explainer::dataset::{read_dataset, read_ground_truth, Instance};
use subgraph_explainer::gnn::{weights, ModelSpec};
use subgraph_explainer::mcts::{Diagnostics, Explanation, SizedSubgraph};
use subgraph_explainer::metrics::{batch_means, curve_csv, evaluate_mask, motif_recall, sparsity_fidelity_curve, CurvePoint};
use subgraph_explainer::{Graph, NodeSet};

use crate::common::{case_for, read_jsonl};
use crate::explain::ExplanationDoc;
use crate::merge_fields;
use crate::settings::{require, List};

/// Fidelity, sparsity, curves and motif recall of explanation files.
#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct EvalArgs {
    #[arg(long, env = "SUBGRAPHX_MODEL")]
    pub model: Option<PathBuf>,
    #[arg(long, env = "SUBGRAPHX_DATA")]
    pub data: Option<PathBuf>,
    /// Comma-separated explanation files, each evaluated on its own.
    #[arg(long, env = "SUBGRAPHX_EXPLANATIONS")]
    pub explanations: Option<List<PathBuf>>,
    /// Ground-truth sidecar; enables motif recall.
    #[arg(long, env = "SUBGRAPHX_TRUTH")]
    pub truth: Option<PathBuf>,
    /// Explanation sizes for the sparsity–fidelity curve.
    #[arg(long, env = "SUBGRAPHX_SIZES")]
    pub sizes: Option<List<usize>>,
    /// Receives `eval.json` and one `<file>.curve.csv` per input.
    #[arg(long, env = "SUBGRAPHX_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
}

merge_fields!(EvalArgs { model, data, explanations, truth, sizes, out_dir });

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileSummary {
    pub file: String,
    pub n: usize,
    pub fidelity: f64,
    pub sparsity: f64,
    /// Mean over the explanations that have a ground-truth record.
    pub recall: Option<f64>,
    pub recall_n: usize,
    pub curve: Vec<CurvePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_fingerprint: String,
    pub files: Vec<FileSummary>,
}

fn stem(path: &Path) -> String {
    let name = path.file_name().map_or_else(|| "explanations".into(), |n| n.to_string_lossy().into_owned());
    name.strip_suffix(".jsonl").unwrap_or(&name).to_owned()
}

fn evaluate_file(
    model: &ModelSpec,
    instances: &[Instance],
    truth: &HashMap<(String, Option<usize>), NodeSet>,
    sizes: &[usize],
    path: &Path,
) -> anyhow::Result<FileSummary> {
    let docs: Vec<ExplanationDoc> = read_jsonl(path)?;
    if docs.is_empty() {
        bail!("{} holds no explanations", path.display());
    }
    let mut records = Vec::with_capacity(docs.len());
    let mut graphs: Vec<Graph> = Vec::with_capacity(docs.len());
    let mut local = Vec::with_capacity(docs.len());
    let mut recalls = Vec::new();
    for doc in &docs {
        let case = case_for(instances, model, &doc.graph_id, doc.target_node)?;
        let mask = case.to_local(&doc.explanation_nodes)?;
        records.push(evaluate_mask(model, &case.graph, &case.key(), &mask)?);
        if let Some(t) = truth.get(&(doc.graph_id.clone(), doc.target_node)) {
            recalls.push(motif_recall(&doc.explanation_nodes, t)?);
        }
        let per_size = doc
            .per_size
            .iter()
            .map(|s| {
                Ok(SizedSubgraph {
                    size: s.size,
                    nodes: case.to_local(&s.nodes)?,
                    score: s.score,
                })
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        local.push(Explanation {
            nodes: mask,
            score: doc.score,
            sparsity: doc.sparsity,
            predicted_class: doc.predicted_class,
            predicted_probability: doc.predicted_probability,
            per_size,
            diagnostics: Diagnostics {
                iterations: 0,
                states_expanded: 0,
                states_scored: 0,
                forward_passes: 0,
            },
        });
        graphs.push(case.graph);
    }
    let (sparsity, fidelity) = batch_means(&records);
    let curve = if sizes.is_empty() {
        Vec::new()
    } else {
        let refs: Vec<&Graph> = graphs.iter().collect();
        sparsity_fidelity_curve(model, &refs, &local, sizes)?
    };
    let recall = (!recalls.is_empty()).then(|| recalls.iter().sum::<f64>() / recalls.len() as f64);
    Ok(FileSummary {
        file: path.display().to_string(),
        n: docs.len(),
        fidelity,
        sparsity,
        recall,
        recall_n: recalls.len(),
        curve,
    })
}

pub fn run(args: EvalArgs) -> anyhow::Result<()> {
    let model = weights::load(&require(args.model, "model")?)?;
    let instances = read_dataset(&require(args.data, "data")?)?;
    let files = require(args.explanations, "explanations")?.0;
    let out_dir = require(args.out_dir, "out-dir")?;
    let sizes = args.sizes.map(|l| l.0).unwrap_or_default();
    let truth: HashMap<_, _> = match &args.truth {
        Some(p) => read_ground_truth(p)?
            .into_iter()
            .map(|t| ((t.graph_id, t.node_id), t.motif_nodes))
            .collect(),
        None => HashMap::new(),
    };
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let mut summaries = Vec::with_capacity(files.len());
    println!("{:<32} {:>5} {:>9} {:>9} {:>9}", "file", "n", "fidelity", "sparsity", "recall");
    for path in &files {
        let s = evaluate_file(&model, &instances, &truth, &sizes, path)?;
        let recall = s.recall.map_or_else(|| "-".to_string(), |r| format!("{r:.4}"));
        println!("{:<32} {:>5} {:>9.4} {:>9.4} {:>9}", stem(path), s.n, s.fidelity, s.sparsity, recall);
        if !s.curve.is_empty() {
            let csv_path = out_dir.join(format!("{}.curve.csv", stem(path)));
            std::fs::write(&csv_path, curve_csv(&s.curve)).with_context(|| format!("writing {}", csv_path.display()))?;
        }
        summaries.push(s);
    }
    let report = EvalReport {
        model_fingerprint: crate::settings::fingerprint_bytes(weights::to_string(&model).as_bytes()),
        files: summaries,
    };
    let report_path = out_dir.join("eval.json");
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(&report_path, text).with_context(|| format!("writing {}", report_path.display()))?;
    println!("wrote {}", report_path.display());
    Ok(())
}
