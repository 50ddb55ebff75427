use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::Deserialize;
use subgraph_explainer::datagen::{gen_ba2motifs, gen_bashape, BA2MOTIFS_DEFAULT_GRAPHS};
use subgraph_explainer::dataset::{write_dataset, write_ground_truth, GroundTruth, Instance};

use crate::merge_fields;
use crate::settings::require;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Ba2motifs,
    Bashape,
}

impl DatasetKind {
    fn name(self) -> &'static str {
        match self {
            DatasetKind::Ba2motifs => "ba2motifs",
            DatasetKind::Bashape => "bashape",
        }
    }
}

/// Generate a synthetic dataset and its ground-truth sidecar.
#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct GenArgs {
    #[arg(long, value_enum, env = "SUBGRAPHX_DATASET")]
    pub dataset: Option<DatasetKind>,
    /// Number of graphs (BA-2Motifs only).
    #[arg(long, env = "SUBGRAPHX_NUM_GRAPHS")]
    pub num_graphs: Option<usize>,
    #[arg(long, env = "SUBGRAPHX_SEED")]
    pub seed: Option<u64>,
    /// Directory receiving `<dataset>.jsonl` and `<dataset>.truth.jsonl`.
    #[arg(long, env = "SUBGRAPHX_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
}

merge_fields!(GenArgs { dataset, num_graphs, seed, out_dir });

pub fn run(args: GenArgs) -> anyhow::Result<()> {
    let kind = require(args.dataset, "dataset")?;
    let out_dir = require(args.out_dir, "out-dir")?;
    let seed = args.seed.unwrap_or(0);
    let (instances, truth): (Vec<Instance>, Vec<GroundTruth>) = match kind {
        DatasetKind::Ba2motifs => {
            let n = args.num_graphs.unwrap_or(BA2MOTIFS_DEFAULT_GRAPHS);
            if n % 2 == 1 {
                eprintln!("warning: odd graph count {n}; labels split {} / {}", n / 2 + 1, n / 2);
            }
            let data = gen_ba2motifs(n, seed)?;
            let truth = data.ground_truth();
            (data.instances, truth)
        }
        DatasetKind::Bashape => {
            if args.num_graphs.is_some() {
                eprintln!("warning: --num-graphs is ignored for bashape");
            }
            let data = gen_bashape(seed)?;
            (vec![data.instance()], data.ground_truth())
        }
    };
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let data_path = out_dir.join(format!("{}.jsonl", kind.name()));
    let truth_path = out_dir.join(format!("{}.truth.jsonl", kind.name()));
    write_dataset(&data_path, &instances)?;
    write_ground_truth(&truth_path, &truth)?;

    let nodes: usize = instances.iter().map(|i| i.graph.num_nodes()).sum();
    let edges: usize = instances.iter().map(|i| i.graph.num_edges()).sum();
    let mut counts = Vec::<usize>::new();
    for inst in &instances {
        let labels: Vec<usize> = match &inst.node_labels {
            Some(l) => l.clone(),
            None => inst.graph.label().into_iter().collect(),
        };
        for l in labels {
            if counts.len() <= l {
                counts.resize(l + 1, 0);
            }
            counts[l] += 1;
        }
    }
    println!(
        "{}: {} graphs, {nodes} nodes, {edges} edges, label counts {counts:?}, {} ground-truth records",
        kind.name(),
        instances.len(),
        truth.len()
    );
    println!("wrote {} and {}", data_path.display(), truth_path.display());
    Ok(())
}
