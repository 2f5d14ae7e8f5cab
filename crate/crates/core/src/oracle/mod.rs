//! Exact ground truth: shortest-path optimal values, quasimetric checks and
//! the constructions behind the recovery guarantees.

mod graph;
mod metrics;
mod paths;
mod theory;

pub use graph::{dataset_graph, DiscreteMdpGraph, Edge};
pub use metrics::{spearman, value_error_report, ValueErrorReport};
pub use paths::{floyd_warshall, shortest_paths, shortest_paths_to_set, DistanceMatrix};
pub use theory::{
    check_quasimetric, feasible_quasimetric_sample, feasible_quasimetric_with_scales,
    mdp_from_quasimetric, minplus_closure, on_policy_costs, three_cycle_counterexample, Violation,
};
