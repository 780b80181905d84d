//! Association discovery among binary variables in sparse, high-dimensional
//! contingency tables.
//!
//! The pipeline: aggregate a binary observation matrix into a sparse table
//! ([`contingency`]); score clique loglinear models — partitions of the
//! variable set into freely interacting groups — with BIC via their
//! closed-form MLEs ([`cliquemodel`]); explore the model space with
//! parallel stochastic chains targeting `exp(-BIC)` ([`search`]); window
//! the visited models and Bayes-model-average edge and existence
//! probabilities ([`posterior`]); and report association graphs
//! ([`graphio`]). [`synth`] generates planted-clique benchmarks for
//! end-to-end validation.

pub mod cliquemodel;
pub mod contingency;
pub mod error;
pub mod graphio;
pub mod posterior;
pub mod search;
pub mod synth;

pub use cliquemodel::{
    bic, cell_probability, count_clique_models, count_set_partitions, enumerate_all_partitions,
    log_likelihood, log_mean_cell, mle_exists, param_count, CliquePartition, ScoredModel,
};
pub use contingency::{binarize, CellPattern, MarginalTable, SparseTable};
pub use error::{Error, Result};
pub use graphio::{
    connectivity_graph, degree_report, export_dot, graph_diff, partition_to_graph, prune_isolated,
    Graph, GraphDiff,
};
pub use posterior::{
    bma_cell_probability, edge_probabilities, existence_probabilities, occams_window,
    threshold_edges, Bucket, EdgeProbabilityMatrix, ExistenceReport, RetainedSet, ThresholdedEdge,
};
pub use search::{
    propose, random_valid_model, run_chain, run_search, step, ChainTrace, ModelBag, MoveType,
    SearchConfig, SearchOutcome, TableScorer,
};
pub use synth::{generate, inject_noise, recovery_score, SynthSpec};
