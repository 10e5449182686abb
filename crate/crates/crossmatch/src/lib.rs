//! Graph-based two-sample testing built around the crossmatch statistic.
//!
//! The pipeline: pair up the combined sample with a minimum-cost matching
//! (exact blossom solver or the greedy closest-pair heuristic), count the
//! matched pairs that join the two samples, and calibrate that count against
//! its exact distribution under exchangeable labels. Alternative graphs
//! (k-nearest-neighbor, minimum spanning tree) feed the same statistic with
//! permutation calibration. A density-model oracle evaluates the almost-sure
//! limit of `chi/t`, and a simulation harness checks convergence, size,
//! power, and the greedy edge-length scaling at desk scale.

pub mod asymptotics;
pub mod density;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod harness;
pub mod matching;
pub mod nulldist;
pub mod quadrature;
pub mod statistic;

pub use error::{Error, Result};
pub use geometry::{CostFunction, Distances, Label, PointCloud};
pub use graph::{build_knn, build_mst, GraphKind, SampleGraph};
pub use matching::{
    matching_to_graph, solve_brute_force, solve_exact, solve_greedy, Matching, SolverKind,
};
pub use nulldist::{
    null_moments, null_pmf, null_pmf_exact, pvalue_exact, pvalue_permutation, NullDistribution,
    NullMoments,
};
pub use statistic::{cross_count, matching_cross_pairs, CrossCount};
