//! Graph constructions over the combined sample, and the empirical
//! diagnostics for the bounded-degree / constant-degree / short-edge
//! assumptions that the limit theory rests on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Distances, PointCloud};

/// How a [`SampleGraph`] was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphKind {
    /// Symmetric graph of a (near-)minimum-cost matching.
    Matching,
    /// Directed K-nearest-neighbor graph.
    Knn { k: usize },
    /// Symmetric Euclidean minimum spanning tree.
    Mst,
}

/// Simple directed graph over sample indices `0..t`: no self-loops, no
/// duplicate edges. Matching and MST graphs are symmetric; kNN need not be.
#[derive(Debug, Clone)]
pub struct SampleGraph {
    t: usize,
    out: Vec<Vec<u32>>,
    kind: GraphKind,
}

impl SampleGraph {
    /// Build from directed edges; rejects self-loops, deduplicates, and sorts
    /// adjacency lists.
    pub fn from_edges(t: usize, edges: &[(usize, usize)], kind: GraphKind) -> Result<Self> {
        let mut out = vec![Vec::new(); t];
        for &(i, j) in edges {
            if i == j {
                return Err(Error::InvalidInput(format!("self-loop at node {i}")));
            }
            if i >= t || j >= t {
                return Err(Error::InvalidInput(format!(
                    "edge ({i}, {j}) out of range for t = {t}"
                )));
            }
            out[i].push(j as u32);
        }
        for adj in &mut out {
            adj.sort_unstable();
            adj.dedup();
        }
        Ok(Self { t, out, kind })
    }

    pub fn len(&self) -> usize {
        self.t
    }

    pub fn is_empty(&self) -> bool {
        self.t == 0
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn out_neighbors(&self, i: usize) -> &[u32] {
        &self.out[i]
    }

    /// Number of directed edges.
    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    /// Iterate all directed edges `(i, j)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(i, adj)| adj.iter().map(move |&j| (i, j as usize)))
    }

    /// Whether every edge has its reverse.
    pub fn is_symmetric(&self) -> bool {
        self.edges().all(|(i, j)| self.out[j].binary_search(&(i as u32)).is_ok())
    }

    /// Exact maxima of out-degree and in-degree over all nodes.
    pub fn max_degrees(&self) -> (usize, usize) {
        let max_out = self.out.iter().map(Vec::len).max().unwrap_or(0);
        let mut indeg = vec![0usize; self.t];
        for (_, j) in self.edges() {
            indeg[j] += 1;
        }
        let max_in = indeg.into_iter().max().unwrap_or(0);
        (max_out, max_in)
    }

    /// Average out-degree. For a matching graph this equals
    /// `1 - (1/t) * [t odd]` exactly.
    pub fn mean_out_degree(&self) -> f64 {
        if self.t == 0 {
            return 0.0;
        }
        self.edge_count() as f64 / self.t as f64
    }

    /// Fraction of nodes with at least one out-edge longer than
    /// `a * t^(-1/d)`, the scale of nearest-neighbor distances. An empirical
    /// proxy for the short-edge assumption.
    pub fn long_edge_fraction(&self, cloud: &PointCloud, a: f64) -> Result<f64> {
        if cloud.len() != self.t {
            return Err(Error::InvalidInput(format!(
                "graph has {} nodes but cloud has {} points",
                self.t,
                cloud.len()
            )));
        }
        if !(a > 0.0) {
            return Err(Error::InvalidParameter(format!("a must be positive, got {a}")));
        }
        let threshold = a * (self.t as f64).powf(-1.0 / cloud.dim() as f64);
        let long = (0..self.t)
            .filter(|&i| {
                self.out[i]
                    .iter()
                    .any(|&j| cloud.distance(i, j as usize) > threshold)
            })
            .count();
        Ok(long as f64 / self.t as f64)
    }
}

/// Directed K-nearest-neighbor graph: `i -> j` when `j` is among the `K`
/// nearest neighbors of `i`. Distance ties are broken by smaller index, so
/// the construction is well-defined even with coincident points.
pub fn build_knn(cloud: &PointCloud, k: usize) -> Result<SampleGraph> {
    let t = cloud.len();
    if t < 2 {
        return Err(Error::TooFewPoints { min: 2, got: t });
    }
    if k == 0 || k > t - 1 {
        return Err(Error::InvalidParameter(format!(
            "K must be in 1..={}, got {k}",
            t - 1
        )));
    }
    let dists = Distances::new(cloud);
    let mut out = vec![Vec::with_capacity(k); t];
    let mut order: Vec<u32> = Vec::with_capacity(t - 1);
    for i in 0..t {
        order.clear();
        order.extend((0..t as u32).filter(|&j| j as usize != i));
        order.sort_by(|&a, &b| {
            dists
                .get(i, a as usize)
                .total_cmp(&dists.get(i, b as usize))
                .then(a.cmp(&b))
        });
        out[i].extend_from_slice(&order[..k]);
        out[i].sort_unstable();
    }
    Ok(SampleGraph { t, out, kind: GraphKind::Knn { k } })
}

/// Euclidean minimum spanning tree of the complete graph, as a symmetric
/// [`SampleGraph`] with `t - 1` undirected edges. Prim's algorithm on the
/// dense distance matrix; ties resolved by index order.
pub fn build_mst(cloud: &PointCloud) -> Result<SampleGraph> {
    let t = cloud.len();
    if t < 2 {
        return Err(Error::TooFewPoints { min: 2, got: t });
    }
    let dists = Distances::new(cloud);
    let mut in_tree = vec![false; t];
    let mut best = vec![f64::INFINITY; t];
    let mut parent = vec![usize::MAX; t];
    in_tree[0] = true;
    for j in 1..t {
        best[j] = dists.get(0, j);
        parent[j] = 0;
    }
    let mut edges = Vec::with_capacity(2 * (t - 1));
    for _ in 1..t {
        let mut next = usize::MAX;
        for j in 0..t {
            if !in_tree[j] && (next == usize::MAX || best[j] < best[next]) {
                next = j;
            }
        }
        in_tree[next] = true;
        edges.push((parent[next], next));
        edges.push((next, parent[next]));
        for j in 0..t {
            if !in_tree[j] {
                let d = dists.get(next, j);
                if d < best[j] {
                    best[j] = d;
                    parent[j] = next;
                }
            }
        }
    }
    SampleGraph::from_edges(t, &edges, GraphKind::Mst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud_1d(xs: &[f64]) -> PointCloud {
        let pts: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        PointCloud::from_samples(&pts, &[]).unwrap()
    }

    fn cloud_2d(pts: &[(f64, f64)]) -> PointCloud {
        let rows: Vec<Vec<f64>> = pts.iter().map(|&(x, y)| vec![x, y]).collect();
        PointCloud::from_samples(&rows, &[]).unwrap()
    }

    #[test]
    fn knn_nearest_neighbors_by_hand() {
        // 0 -> 1, 1 -> 0, 2 -> 1 for points {0, 1, 3}.
        let cloud = cloud_1d(&[0.0, 1.0, 3.0]);
        let g = build_knn(&cloud, 1).unwrap();
        assert_eq!(g.out_neighbors(0), &[1]);
        assert_eq!(g.out_neighbors(1), &[0]);
        assert_eq!(g.out_neighbors(2), &[1]);
    }

    #[test]
    fn knn_complete_when_k_is_t_minus_1() {
        let cloud = cloud_2d(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (2.0, 2.0)]);
        let g = build_knn(&cloud, 3).unwrap();
        assert_eq!(g.edge_count(), 4 * 3);
        let (max_out, max_in) = g.max_degrees();
        assert_eq!((max_out, max_in), (3, 3));
    }

    #[test]
    fn knn_two_points() {
        let cloud = cloud_1d(&[0.0, 5.0]);
        let g = build_knn(&cloud, 1).unwrap();
        assert_eq!(g.out_neighbors(0), &[1]);
        assert_eq!(g.out_neighbors(1), &[0]);
    }

    #[test]
    fn knn_k_out_of_range() {
        let cloud = cloud_1d(&[0.0, 1.0, 2.0]);
        assert!(build_knn(&cloud, 0).is_err());
        assert!(build_knn(&cloud, 3).is_err());
    }

    #[test]
    fn knn_out_degree_is_exactly_k() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random(), rng.random()]).collect();
        let cloud = PointCloud::from_samples(&pts, &[]).unwrap();
        for k in [1, 3, 7] {
            let g = build_knn(&cloud, k).unwrap();
            for i in 0..cloud.len() {
                assert_eq!(g.out_neighbors(i).len(), k);
            }
            assert_eq!(g.mean_out_degree(), k as f64);
        }
    }

    #[test]
    fn mst_path_in_1d() {
        let cloud = cloud_1d(&[0.0, 1.0, 3.0]);
        let g = build_mst(&cloud).unwrap();
        assert!(g.is_symmetric());
        assert_eq!(g.edge_count(), 2 * 2);
        assert_eq!(g.out_neighbors(0), &[1]);
        assert_eq!(g.out_neighbors(1), &[0, 2]);
        assert_eq!(g.out_neighbors(2), &[1]);
    }

    #[test]
    fn mst_two_points_single_edge() {
        let cloud = cloud_1d(&[0.0, 2.0]);
        let g = build_mst(&cloud).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.max_degrees(), (1, 1));
    }

    #[test]
    fn mst_equally_spaced_collinear_is_path() {
        let cloud = cloud_1d(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let g = build_mst(&cloud).unwrap();
        for i in 0..5 {
            let expected: Vec<u32> = match i {
                0 => vec![1],
                4 => vec![3],
                _ => vec![i as u32 - 1, i as u32 + 1],
            };
            assert_eq!(g.out_neighbors(i), expected.as_slice());
        }
    }

    // Brute-force minimum over all spanning trees, for small t.
    fn mst_weight_brute(cloud: &PointCloud) -> f64 {
        let t = cloud.len();
        let pairs: Vec<(usize, usize)> = (0..t)
            .flat_map(|i| ((i + 1)..t).map(move |j| (i, j)))
            .collect();
        let ne = pairs.len();
        let mut best = f64::INFINITY;
        // All edge subsets of size t-1; check connectivity via union-find.
        for mask in 0u32..(1 << ne) {
            if mask.count_ones() as usize != t - 1 {
                continue;
            }
            let mut root: Vec<usize> = (0..t).collect();
            fn find(root: &mut Vec<usize>, mut x: usize) -> usize {
                while root[x] != x {
                    root[x] = root[root[x]];
                    x = root[x];
                }
                x
            }
            let mut weight = 0.0;
            let mut merged = 0;
            for (e, &(i, j)) in pairs.iter().enumerate() {
                if mask & (1 << e) != 0 {
                    weight += cloud.distance(i, j);
                    let (ri, rj) = (find(&mut root, i), find(&mut root, j));
                    if ri != rj {
                        root[ri] = rj;
                        merged += 1;
                    }
                }
            }
            if merged == t - 1 && weight < best {
                best = weight;
            }
        }
        best
    }

    #[test]
    fn mst_matches_brute_force_spanning_tree_minimum() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for t in [3, 4, 5, 6] {
            for _ in 0..5 {
                let pts: Vec<Vec<f64>> =
                    (0..t).map(|_| vec![rng.random(), rng.random()]).collect();
                let cloud = PointCloud::from_samples(&pts, &[]).unwrap();
                let g = build_mst(&cloud).unwrap();
                let weight: f64 = g
                    .edges()
                    .filter(|(i, j)| i < j)
                    .map(|(i, j)| cloud.distance(i, j))
                    .sum();
                let brute = mst_weight_brute(&cloud);
                assert!(
                    (weight - brute).abs() < 1e-9,
                    "t = {t}: prim {weight} vs brute {brute}"
                );
            }
        }
    }

    #[test]
    fn mst_is_connected_spanning_tree_on_random_clouds() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec<f64>> = (0..60)
            .map(|_| vec![rng.random(), rng.random(), rng.random()])
            .collect();
        let cloud = PointCloud::from_samples(&pts, &[]).unwrap();
        let g = build_mst(&cloud).unwrap();
        assert_eq!(g.edge_count(), 2 * (60 - 1));
        // Union-find connectivity check.
        let mut root: Vec<usize> = (0..60).collect();
        fn find(root: &mut Vec<usize>, mut x: usize) -> usize {
            while root[x] != x {
                root[x] = root[root[x]];
                x = root[x];
            }
            x
        }
        for (i, j) in g.edges() {
            let (ri, rj) = (find(&mut root, i), find(&mut root, j));
            if ri != rj {
                root[ri] = rj;
            }
        }
        let r0 = find(&mut root, 0);
        assert!((0..60).all(|i| find(&mut root, i) == r0));
    }

    #[test]
    fn long_edge_fraction_extremes_and_monotonicity() {
        let cloud = cloud_2d(&[(0.0, 0.0), (1.0, 0.0), (0.5, 0.9), (3.0, 3.0)]);
        let g = build_mst(&cloud).unwrap();
        assert_eq!(g.long_edge_fraction(&cloud, 1e9).unwrap(), 0.0);
        assert_eq!(g.long_edge_fraction(&cloud, 1e-12).unwrap(), 1.0);
        let grid = [0.1, 0.5, 1.0, 2.0, 5.0, 10.0];
        let fracs: Vec<f64> = grid
            .iter()
            .map(|&a| g.long_edge_fraction(&cloud, a).unwrap())
            .collect();
        assert!(fracs.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_self_loops_and_bad_indices() {
        assert!(SampleGraph::from_edges(3, &[(0, 0)], GraphKind::Mst).is_err());
        assert!(SampleGraph::from_edges(3, &[(0, 5)], GraphKind::Mst).is_err());
    }

    #[test]
    fn duplicate_edges_are_collapsed() {
        let g = SampleGraph::from_edges(3, &[(0, 1), (0, 1), (1, 0)], GraphKind::Matching).unwrap();
        assert_eq!(g.edge_count(), 2);
    }
}
