//! Explains individual predictions of graph neural networks by searching
//! connected subgraphs with Monte Carlo tree search and scoring each
//! candidate with a Shapley value under zero-feature occlusion.

pub mod dataset;
pub mod datagen;
pub mod gnn;
pub mod graph;
pub mod mcts;
pub mod metrics;
pub mod shapley;

pub use graph::{Graph, NodeSet, PruneOrder, PruneStrategy};
