//! Matching solvers: exact minimum-cost matching of the whole sample, the
//! greedy closest-pair heuristic, and a brute-force oracle for small
//! instances.
//!
//! A matching is an involution of `0..t` with at most one fixed point; the
//! fixed point exists iff `t` is odd. The exact solver minimizes the sum of
//! `lambda(||z_i - z_j||)` over matched pairs.

mod blossom;

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CostFunction, Distances, PointCloud};
use crate::graph::{GraphKind, SampleGraph};

/// Which algorithm produced a [`Matching`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Exact,
    Greedy,
    BruteForce,
}

/// Hard cap on brute-force instance size: (t-1)!! matchings.
pub const BRUTE_FORCE_MAX: usize = 12;

/// An involutive pairing of `0..t` with at most one fixed point.
///
/// `total_cost` is the sum of `lambda(edge length)` over matched pairs, each
/// pair counted once, accumulated in ascending order of the smaller index so
/// that equal pairings always produce bit-identical totals.
#[derive(Debug, Clone)]
pub struct Matching {
    sigma: Vec<usize>,
    fixed_point: Option<usize>,
    total_cost: f64,
    solver: SolverKind,
}

impl Matching {
    /// Assemble from matched pairs, validating the involution and fixed-point
    /// invariants against `t = cloud.len()`.
    pub fn from_pairs(
        pairs: &[(usize, usize)],
        cloud: &PointCloud,
        cf: &CostFunction,
        solver: SolverKind,
    ) -> Result<Self> {
        let t = cloud.len();
        let mut sigma: Vec<usize> = (0..t).collect();
        let mut seen = vec![false; t];
        let mut pairs: Vec<(usize, usize)> = pairs
            .iter()
            .map(|&(i, j)| if i < j { (i, j) } else { (j, i) })
            .collect();
        pairs.sort_unstable();
        for &(i, j) in &pairs {
            if i == j || j >= t {
                return Err(Error::InvalidInput(format!("bad pair ({i}, {j})")));
            }
            if seen[i] || seen[j] {
                return Err(Error::InvalidInput(format!(
                    "index matched twice in pair ({i}, {j})"
                )));
            }
            seen[i] = true;
            seen[j] = true;
            sigma[i] = j;
            sigma[j] = i;
        }
        let unmatched: Vec<usize> = (0..t).filter(|&k| !seen[k]).collect();
        let fixed_point = match (t % 2, unmatched.as_slice()) {
            (0, []) => None,
            (1, &[k]) => Some(k),
            _ => {
                return Err(Error::InvalidInput(format!(
                    "{} unmatched indices for t = {t}",
                    unmatched.len()
                )))
            }
        };
        let total_cost = pairs
            .iter()
            .map(|&(i, j)| cf.cost(cloud.distance(i, j)))
            .sum();
        Ok(Self { sigma, fixed_point, total_cost, solver })
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// The involution: partner of `k`, or `k` itself for the fixed point.
    pub fn sigma(&self, k: usize) -> usize {
        self.sigma[k]
    }

    pub fn fixed_point(&self) -> Option<usize> {
        self.fixed_point
    }

    pub fn total_cost(&self) -> f64 {
        self.total_cost
    }

    pub fn solver(&self) -> SolverKind {
        self.solver
    }

    /// Matched pairs `(i, j)` with `i < j`, ascending.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.sigma.len())
            .filter(|&k| k < self.sigma[k])
            .map(|k| (k, self.sigma[k]))
            .collect()
    }

    /// Total Euclidean length of the matched edges, independent of the cost
    /// function the matching was solved under.
    pub fn euclidean_length(&self, cloud: &PointCloud) -> f64 {
        self.pairs().iter().map(|&(i, j)| cloud.distance(i, j)).sum()
    }
}

/// The symmetric graph of a matching: `i -> j` and `j -> i` for each matched
/// pair; the fixed point is isolated.
pub fn matching_to_graph(matching: &Matching) -> SampleGraph {
    let edges: Vec<(usize, usize)> = matching
        .pairs()
        .into_iter()
        .flat_map(|(i, j)| [(i, j), (j, i)])
        .collect();
    SampleGraph::from_edges(matching.len(), &edges, GraphKind::Matching)
        .expect("matching pairs form a valid graph")
}

fn check_solvable(t: usize) -> Result<()> {
    if t < 2 {
        return Err(Error::TooFewPoints { min: 2, got: t });
    }
    Ok(())
}

// Quantization scale for the integer blossom core: costs are mapped to
// i64 with 2^40 steps per max-magnitude cost, keeping dual arithmetic exact
// while leaving ample headroom (sums stay far below 2^62).
const COST_QUANTUM_BITS: u32 = 40;

/// Exact minimum-cost matching via Edmonds' blossom algorithm, O(t^3).
///
/// Odd `t` is handled by a virtual vertex joined to every real vertex at zero
/// cost; its partner becomes the fixed point. When several minimizers exist,
/// the seeded permutation of the input order decides among them, so identical
/// seeds reproduce identical matchings.
pub fn solve_exact(cloud: &PointCloud, cf: &CostFunction, seed: u64) -> Result<Matching> {
    let t = cloud.len();
    check_solvable(t)?;
    let mut perm: Vec<usize> = (0..t).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let dists = Distances::new(cloud);
    let mut costs = Vec::with_capacity(t * (t - 1) / 2);
    let mut max_abs = 0.0f64;
    for a in 0..t {
        for b in (a + 1)..t {
            let c = cf.cost(dists.get(perm[a], perm[b]));
            if !c.is_finite() {
                return Err(Error::NumericalFailure(format!(
                    "non-finite edge cost between points {} and {}",
                    perm[a], perm[b]
                )));
            }
            max_abs = max_abs.max(c.abs());
            costs.push((a, b, c));
        }
    }
    let scale = if max_abs > 0.0 {
        (1u64 << COST_QUANTUM_BITS) as f64 / max_abs
    } else {
        1.0
    };
    // Maximize the negated quantized cost; max-cardinality forces a perfect
    // matching on the (virtually augmented) complete graph.
    let nv = if t % 2 == 0 { t } else { t + 1 };
    let mut edges: Vec<(usize, usize, i64)> = costs
        .into_iter()
        .map(|(a, b, c)| (a, b, -((c * scale).round() as i64)))
        .collect();
    if t % 2 == 1 {
        edges.extend((0..t).map(|a| (a, t, 0i64)));
    }
    let mate = blossom::max_weight_matching(nv, edges, true);

    let mut pairs = Vec::with_capacity(t / 2);
    for a in 0..t {
        match mate[a] {
            Some(b) if a < b && b < t => pairs.push((perm[a], perm[b])),
            Some(b) if b < t => {}
            _ => {} // partner is the virtual vertex: `perm[a]` stays unmatched
        }
    }
    Matching::from_pairs(&pairs, cloud, cf, SolverKind::Exact)
}

// Deterministic per-pair tie rank derived from the seed (SplitMix64 mix of
// the normalized pair).
#[inline]
fn pair_rank(seed: u64, i: usize, j: usize) -> u64 {
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    let mut z = seed
        .wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(1 + lo as u64))
        .wrapping_add(0xbf58476d1ce4e5b9u64.wrapping_mul(1 + hi as u64));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[derive(PartialEq)]
struct GreedyEntry {
    dist: f64,
    rank: u64,
    i: u32,
    j: u32,
}

impl Eq for GreedyEntry {}

impl Ord for GreedyEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.rank.cmp(&other.rank))
            .then(self.i.cmp(&other.i))
            .then(self.j.cmp(&other.j))
    }
}

impl PartialOrd for GreedyEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Greedy matching: repeatedly match the closest remaining pair (in raw
/// Euclidean distance, whatever `cf` is) and remove it; distance ties are
/// broken by a seeded per-pair rank. Odd `t` leaves the last point as the
/// fixed point. The reported `total_cost` is still evaluated under `cf`.
///
/// Candidate pairs are kept in a lazy min-heap holding, for every live point,
/// its nearest neighbor at insertion time; stale entries (dead partner) are
/// replaced on pop. O(t^2 log t) time for typical inputs, O(t) memory.
pub fn solve_greedy(cloud: &PointCloud, cf: &CostFunction, seed: u64) -> Result<Matching> {
    let t = cloud.len();
    check_solvable(t)?;
    let dists = Distances::new(cloud);
    let mut alive = vec![true; t];

    let nearest = |i: usize, alive: &[bool]| -> Option<GreedyEntry> {
        let mut best: Option<GreedyEntry> = None;
        for j in 0..t {
            if j == i || !alive[j] {
                continue;
            }
            let cand = GreedyEntry {
                dist: dists.get(i, j),
                rank: pair_rank(seed, i, j),
                i: i as u32,
                j: j as u32,
            };
            if best.as_ref().is_none_or(|b| cand < *b) {
                best = Some(cand);
            }
        }
        best
    };

    let mut heap: BinaryHeap<Reverse<GreedyEntry>> = (0..t)
        .map(|i| Reverse(nearest(i, &alive).expect("t >= 2")))
        .collect();
    let mut pairs = Vec::with_capacity(t / 2);
    while pairs.len() < t / 2 {
        let Reverse(entry) = heap.pop().expect("heap exhausted before matching completed");
        let (i, j) = (entry.i as usize, entry.j as usize);
        if !alive[i] {
            continue;
        }
        if !alive[j] {
            // Partner died since insertion; reinsert with the current nearest.
            heap.push(Reverse(nearest(i, &alive).expect("live partner exists")));
            continue;
        }
        alive[i] = false;
        alive[j] = false;
        pairs.push((i, j));
    }
    Matching::from_pairs(&pairs, cloud, cf, SolverKind::Greedy)
}

/// Visit every involution of `0..t` with at most one fixed point (a fixed
/// point is used exactly when `t` is odd). `visit` receives the matched pairs
/// and the fixed point.
pub fn for_each_matching(
    t: usize,
    mut visit: impl FnMut(&[(usize, usize)], Option<usize>),
) {
    fn recurse(
        remaining: &mut Vec<usize>,
        fixed: Option<usize>,
        need_fixed: bool,
        pairs: &mut Vec<(usize, usize)>,
        visit: &mut impl FnMut(&[(usize, usize)], Option<usize>),
    ) {
        if remaining.is_empty() {
            visit(pairs, fixed);
            return;
        }
        let k = remaining[0];
        if need_fixed && fixed.is_none() {
            let rest: Vec<usize> = remaining[1..].to_vec();
            let mut rest = rest;
            recurse(&mut rest, Some(k), need_fixed, pairs, visit);
        }
        for idx in 1..remaining.len() {
            let partner = remaining[idx];
            let mut rest: Vec<usize> = remaining[1..].to_vec();
            rest.retain(|&x| x != partner);
            pairs.push((k, partner));
            recurse(&mut rest, fixed, need_fixed, pairs, visit);
            pairs.pop();
        }
    }
    let mut remaining: Vec<usize> = (0..t).collect();
    let mut pairs = Vec::new();
    recurse(&mut remaining, None, t % 2 == 1, &mut pairs, &mut visit);
}

/// Oracle: enumerate all matchings and return the first minimizer in
/// enumeration order. Deterministic; refuses t > [`BRUTE_FORCE_MAX`].
pub fn solve_brute_force(cloud: &PointCloud, cf: &CostFunction) -> Result<Matching> {
    let t = cloud.len();
    check_solvable(t)?;
    if t > BRUTE_FORCE_MAX {
        return Err(Error::BruteForceTooLarge { max: BRUTE_FORCE_MAX, got: t });
    }
    let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
    for_each_matching(t, |pairs, _| {
        let cost: f64 = pairs.iter().map(|&(i, j)| cf.cost(cloud.distance(i, j))).sum();
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, pairs.to_vec()));
        }
    });
    let (_, pairs) = best.expect("at least one matching exists for t >= 2");
    Matching::from_pairs(&pairs, cloud, cf, SolverKind::BruteForce)
}
