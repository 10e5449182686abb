//! The cross-count statistic: the number of directed graph edges joining
//! points from opposite samples, both directions counted.
//!
//! For a matching graph the count is twice the number of crossmatched pairs;
//! `cross_pairs` carries that undoubled count, which is what the closed-form
//! null distribution is stated in. The factor of two is an easy trap, so both
//! values are reported.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Label, PointCloud};
use crate::graph::{GraphKind, SampleGraph};
use crate::matching::Matching;

/// Cross-count of a graph over a labeled cloud.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CrossCount {
    /// Directed edges with opposite-label endpoints (doubled convention).
    pub chi: usize,
    /// Undirected cross pairs; only defined for matching graphs.
    pub cross_pairs: Option<usize>,
    pub t: usize,
    pub m: usize,
    pub n: usize,
}

/// Count directed edges between opposite-label endpoints.
///
/// Requires `graph.len() == cloud.len()` and both samples non-empty; labels
/// follow the cloud's combined-sample ordering.
pub fn cross_count(graph: &SampleGraph, cloud: &PointCloud) -> Result<CrossCount> {
    if graph.len() != cloud.len() {
        return Err(Error::InvalidInput(format!(
            "graph has {} nodes but cloud has {} points",
            graph.len(),
            cloud.len()
        )));
    }
    cloud.require_two_samples()?;
    let chi = graph
        .edges()
        .filter(|&(i, j)| cloud.label(i) != cloud.label(j))
        .count();
    let cross_pairs = match graph.kind() {
        GraphKind::Matching => {
            debug_assert!(chi % 2 == 0, "matching graphs are symmetric");
            Some(chi / 2)
        }
        _ => None,
    };
    Ok(CrossCount { chi, cross_pairs, t: cloud.len(), m: cloud.m(), n: cloud.n() })
}

/// Independent computation path: count crossmatched pairs by iterating the
/// matching itself rather than graph edges.
pub fn matching_cross_pairs(matching: &Matching, cloud: &PointCloud) -> usize {
    matching
        .pairs()
        .into_iter()
        .filter(|&(i, j)| cloud.label(i) != cloud.label(j))
        .count()
}

/// Cross-count evaluated with an explicit label vector instead of the cloud's
/// own labels; used by permutation calibration.
pub(crate) fn cross_count_with_labels(graph: &SampleGraph, labels: &[Label]) -> usize {
    graph
        .edges()
        .filter(|&(i, j)| labels[i] != labels[j])
        .count()
}
