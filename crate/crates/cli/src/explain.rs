use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use subgraph_explainer::datagen::derive_seed;
use subgraph_explainer::dataset::read_dataset;
use subgraph_explainer::gnn::{weights, ModelSpec};
use subgraph_explainer::mcts::{run_search, Diagnostics, SearchConfig, SizedSubgraph};
use subgraph_explainer::shapley::Scorer;
use subgraph_explainer::{NodeSet, PruneOrder, PruneStrategy};

use crate::common::{select_cases, write_jsonl, Case, Selection, SplitPart, Task};
use crate::merge_fields;
use crate::settings::{fingerprint_bytes, fnv64, require, usage, Limit, List};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScorerKind {
    ShapleyMc,
    ShapleyExact,
    Direct,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PruneKind {
    Low2high,
    High2low,
}

/// Search for the subgraph explaining each selected prediction.
#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExplainArgs {
    #[arg(long, env = "SUBGRAPHX_MODEL")]
    pub model: Option<PathBuf>,
    #[arg(long, env = "SUBGRAPHX_DATA")]
    pub data: Option<PathBuf>,
    /// Explanation documents (JSON lines) to write.
    #[arg(long, env = "SUBGRAPHX_OUT")]
    pub out: Option<PathBuf>,
    /// Must match the model when given.
    #[arg(long, value_enum, env = "SUBGRAPHX_TASK")]
    pub task: Option<Task>,
    #[arg(long, env = "SUBGRAPHX_TARGET_NODE")]
    pub target_node: Option<List<usize>>,
    /// `all` or comma-separated graph ids.
    #[arg(long, env = "SUBGRAPHX_GRAPHS")]
    pub graphs: Option<String>,
    /// Training report whose split selects the instances.
    #[arg(long, env = "SUBGRAPHX_SPLIT_REPORT")]
    pub split_report: Option<PathBuf>,
    #[arg(long, value_enum, env = "SUBGRAPHX_SPLIT")]
    pub split: Option<SplitPart>,
    #[arg(long, value_enum, env = "SUBGRAPHX_SCORER")]
    pub scorer: Option<ScorerKind>,
    /// Sampled permutations per Shapley estimate (T).
    #[arg(long, env = "SUBGRAPHX_SAMPLES")]
    pub samples: Option<usize>,
    /// Neighbourhood radius for the player set; `inf` uses every node.
    /// Defaults to the model's layer count.
    #[arg(long, env = "SUBGRAPHX_HOPS")]
    pub hops: Option<Limit>,
    #[arg(long, env = "SUBGRAPHX_NMIN")]
    pub nmin: Option<usize>,
    #[arg(long, env = "SUBGRAPHX_ITERATIONS")]
    pub iterations: Option<usize>,
    #[arg(long, env = "SUBGRAPHX_LAMBDA")]
    pub lambda: Option<f64>,
    #[arg(long, value_enum, env = "SUBGRAPHX_PRUNE")]
    pub prune: Option<PruneKind>,
    /// Candidate actions per expansion; `inf` for all.
    #[arg(long, env = "SUBGRAPHX_PRUNE_K")]
    pub prune_k: Option<Limit>,
    #[arg(long, env = "SUBGRAPHX_SEED")]
    pub seed: Option<u64>,
}

merge_fields!(ExplainArgs {
    model,
    data,
    out,
    task,
    target_node,
    graphs,
    split_report,
    split,
    scorer,
    samples,
    hops,
    nmin,
    iterations,
    lambda,
    prune,
    prune_k,
    seed
});

/// Settings echoed into every document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub model_fingerprint: String,
    pub seed: u64,
    /// Search settings; `search.seed` is the per-instance seed.
    pub search: SearchConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationDoc {
    pub graph_id: String,
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_node: Option<usize>,
    pub predicted_class: usize,
    pub predicted_probability: f64,
    pub explanation_nodes: NodeSet,
    pub score: f64,
    pub scorer: String,
    pub sparsity: f64,
    pub per_size: Vec<SizedSubgraph>,
    pub config: ConfigEcho,
    pub diagnostics: Diagnostics,
}

/// Search settings before the per-instance seed is filled in.
pub fn search_config(args: &ExplainArgs, model: &ModelSpec) -> anyhow::Result<SearchConfig> {
    let defaults = SearchConfig::default();
    let hops = args.hops.unwrap_or(Limit::Finite(model.num_layers())).finite();
    let scorer = match args.scorer.unwrap_or(ScorerKind::ShapleyMc) {
        ScorerKind::ShapleyMc => Scorer::ShapleyMc {
            samples: args.samples.unwrap_or(100),
            hops,
        },
        ScorerKind::ShapleyExact => Scorer::ShapleyExact { hops },
        ScorerKind::Direct => Scorer::Direct,
    };
    let order = match args.prune.unwrap_or(PruneKind::Low2high) {
        PruneKind::Low2high => PruneOrder::Low2high,
        PruneKind::High2low => PruneOrder::High2low,
    };
    let config = SearchConfig {
        iterations: args.iterations.unwrap_or(defaults.iterations),
        n_min: args.nmin.unwrap_or(defaults.n_min),
        lambda: args.lambda.unwrap_or(defaults.lambda),
        strategy: PruneStrategy {
            order,
            k: args.prune_k.map_or(defaults.strategy.k, Limit::finite),
        },
        scorer,
        seed: args.seed.unwrap_or(0),
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    Ok(config)
}

/// Explains one case; node ids in the document are those of the dataset.
pub fn explain_case(model: &ModelSpec, case: &Case, config: &SearchConfig, echo: &ConfigEcho) -> anyhow::Result<ExplanationDoc> {
    let search = SearchConfig {
        seed: derive_seed(config.seed, fnv64(case.key().as_bytes())),
        ..*config
    };
    let e = run_search(model, &case.graph, &search)?;
    Ok(ExplanationDoc {
        graph_id: case.graph_id.clone(),
        task: if case.target.is_some() { Task::Node } else { Task::Graph },
        target_node: case.target,
        predicted_class: e.predicted_class,
        predicted_probability: e.predicted_probability,
        explanation_nodes: case.to_global(&e.nodes),
        score: e.score,
        scorer: search.scorer.name().into(),
        sparsity: e.sparsity,
        per_size: e
            .per_size
            .iter()
            .map(|s| SizedSubgraph {
                size: s.size,
                nodes: case.to_global(&s.nodes),
                score: s.score,
            })
            .collect(),
        config: ConfigEcho {
            search,
            ..echo.clone()
        },
        diagnostics: e.diagnostics,
    })
}

pub fn run(args: ExplainArgs, workers: usize) -> anyhow::Result<()> {
    let model_path = require(args.model.clone(), "model")?;
    let data_path = require(args.data.clone(), "data")?;
    let out = require(args.out.clone(), "out")?;
    let model = weights::load(&model_path)?;
    let config = search_config(&args, &model)?;
    let instances = read_dataset(&data_path)?;
    let cases = select_cases(
        &instances,
        &model,
        &Selection {
            task: args.task,
            graphs: args.graphs.as_deref(),
            targets: args.target_node.as_ref(),
            split_report: args.split_report.as_deref(),
            split: args.split,
        },
    )?;
    let echo = ConfigEcho {
        model_fingerprint: fingerprint_bytes(weights::to_string(&model).as_bytes()),
        seed: config.seed,
        search: config,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("starting worker pool")?;
    let results: Vec<anyhow::Result<ExplanationDoc>> =
        pool.install(|| cases.par_iter().map(|c| explain_case(&model, c, &config, &echo)).collect());

    let mut docs = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    for (case, result) in cases.iter().zip(results) {
        match result {
            Ok(doc) => docs.push(doc),
            Err(e) => {
                eprintln!("{}: {e:#}", case.key());
                failed.push(case.key());
            }
        }
    }
    write_jsonl(&out, &docs)?;
    println!("wrote {} explanations to {}", docs.len(), out.display());
    if !failed.is_empty() {
        anyhow::bail!("{} of {} instances failed: {}", failed.len(), cases.len(), failed.join(", "));
    }
    Ok(())
}
