//! Exact null distribution of the cross-count for a matching, its moments,
//! and permutation calibration.
//!
//! Under exchangeable labels the number of crossmatched pairs `A1` depends
//! only on `(m, n)`, not on the geometry, and for even `t = m + n` has the
//! closed form
//!
//! ```text
//! P(A1 = a1) = 2^a1 * I! / (C(t, m) * a0! * a1! * a2!),
//! ```
//!
//! with `I = t/2` pairs, `a0 = (n - a1)/2` pairs inside the second sample and
//! `a2 = (m - a1)/2` inside the first. The mean and variance of the doubled
//! statistic `chi = 2 * A1` are `2mn/(t-1)` and
//! `8m(m-1)n(n-1)/((t-1)^2 (t-3))`.
//!
//! No closed form is used for odd `t`; calibrate by permutation instead.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Label, PointCloud};
use crate::graph::SampleGraph;
use crate::statistic::{cross_count, cross_count_with_labels, CrossCount};

/// Exact pmf of the crossmatched-pair count `A1` under the null, for even
/// `t = m + n`.
#[derive(Debug, Clone, Serialize)]
pub struct NullDistribution {
    pub m: usize,
    pub n: usize,
    /// Achievable `a1` values, ascending; all share the parity of `m`.
    pub support: Vec<usize>,
    /// Probability of each support point.
    pub pmf: Vec<f64>,
}

fn check_mn(m: usize, n: usize) -> Result<usize> {
    if m < 1 || n < 1 {
        return Err(Error::InvalidParameter(format!(
            "both samples must be non-empty, got m = {m}, n = {n}"
        )));
    }
    Ok(m + n)
}

impl NullDistribution {
    /// Compute the pmf for `(m, n)`. The shape is built from the exact term
    /// ratios `P(a1+2)/P(a1) = 4 a0 a2 / ((a1+1)(a1+2))` anchored at the mode
    /// and then normalized, which is stable for t in the hundreds and beyond.
    pub fn new(m: usize, n: usize) -> Result<Self> {
        let t = check_mn(m, n)?;
        if t % 2 != 0 {
            return Err(Error::OddSampleSize { t });
        }
        let support: Vec<usize> = (0..=m.min(n)).filter(|a| a % 2 == m % 2).collect();
        debug_assert!(!support.is_empty());
        let ratio = |a1: usize| -> f64 {
            let a0 = (n - a1) / 2;
            let a2 = (m - a1) / 2;
            (4 * a0 * a2) as f64 / ((a1 + 1) * (a1 + 2)) as f64
        };
        // Mode: last support point reached by ratios >= 1.
        let mut mode = 0;
        for idx in 0..support.len() - 1 {
            if ratio(support[idx]) >= 1.0 {
                mode = idx + 1;
            } else {
                break;
            }
        }
        let mut weights = vec![0.0; support.len()];
        weights[mode] = 1.0;
        for idx in mode + 1..support.len() {
            weights[idx] = weights[idx - 1] * ratio(support[idx - 1]);
        }
        for idx in (0..mode).rev() {
            weights[idx] = weights[idx + 1] / ratio(support[idx]);
        }
        let total: f64 = weights.iter().sum();
        let pmf = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { m, n, support, pmf })
    }

    pub fn t(&self) -> usize {
        self.m + self.n
    }

    /// Lower-tail probability `P(A1 <= a1)`.
    pub fn cdf(&self, a1: usize) -> f64 {
        self.support
            .iter()
            .zip(&self.pmf)
            .take_while(|(&a, _)| a <= a1)
            .map(|(_, &p)| p)
            .sum::<f64>()
            .min(1.0)
    }

    /// Mean of the doubled statistic `chi = 2 * A1` under this pmf.
    pub fn mean_chi(&self) -> f64 {
        self.support
            .iter()
            .zip(&self.pmf)
            .map(|(&a, &p)| 2.0 * a as f64 * p)
            .sum()
    }

    /// Variance of `chi = 2 * A1` under this pmf.
    pub fn variance_chi(&self) -> f64 {
        let mean = self.mean_chi();
        self.support
            .iter()
            .zip(&self.pmf)
            .map(|(&a, &p)| {
                let x = 2.0 * a as f64 - mean;
                x * x * p
            })
            .sum()
    }
}

static NULL_CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<NullDistribution>>>> =
    OnceLock::new();

/// Cached [`NullDistribution`] for `(m, n)`; the distribution depends only on
/// the sample sizes, so repeated tests at the same sizes share one table.
pub fn null_pmf(m: usize, n: usize) -> Result<Arc<NullDistribution>> {
    let cache = NULL_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&(m, n)) {
        return Ok(Arc::clone(hit));
    }
    let dist = Arc::new(NullDistribution::new(m, n)?);
    cache
        .lock()
        .unwrap()
        .entry((m, n))
        .or_insert_with(|| Arc::clone(&dist));
    Ok(dist)
}

fn big_factorial(k: usize) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

fn big_binomial(n: usize, k: usize) -> BigInt {
    big_factorial(n) / (big_factorial(k) * big_factorial(n - k))
}

/// Exact rational pmf over `(a1, P(A1 = a1))`, ascending in `a1`. Used as the
/// reference the floating-point path and the brute-force enumeration are both
/// held against.
pub fn null_pmf_exact(m: usize, n: usize) -> Result<Vec<(usize, BigRational)>> {
    let t = check_mn(m, n)?;
    if t % 2 != 0 {
        return Err(Error::OddSampleSize { t });
    }
    let pairs = t / 2;
    let denom = big_binomial(t, m);
    let mut out = Vec::new();
    for a1 in (0..=m.min(n)).filter(|a| a % 2 == m % 2) {
        let a0 = (n - a1) / 2;
        let a2 = (m - a1) / 2;
        let numer = BigInt::from(2).pow(a1 as u32) * big_factorial(pairs);
        let p = BigRational::new(
            numer,
            &denom * big_factorial(a0) * big_factorial(a1) * big_factorial(a2),
        );
        out.push((a1, p));
    }
    debug_assert!(out.iter().map(|(_, p)| p).sum::<BigRational>() == BigRational::one());
    Ok(out)
}

/// Null moments of `chi` for a matching: exact mean and variance from the
/// closed forms. The variance needs `t >= 4`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NullMoments {
    pub mean_chi: f64,
    /// `None` when `t < 4`, where the variance formula is undefined.
    pub variance_chi: Option<f64>,
}

pub fn null_moments(m: usize, n: usize) -> Result<NullMoments> {
    let t = check_mn(m, n)?;
    let (mf, nf, tf) = (m as f64, n as f64, t as f64);
    let mean_chi = 2.0 * mf * nf / (tf - 1.0);
    let variance_chi = (t >= 4).then(|| {
        8.0 * mf * (mf - 1.0) * nf * (nf - 1.0) / ((tf - 1.0) * (tf - 1.0) * (tf - 3.0))
    });
    Ok(NullMoments { mean_chi, variance_chi })
}

/// Exact lower-tail p-value `P(A1 <= observed)` under the closed-form null.
///
/// Requires a matching-graph observation (`cross_pairs` present) and even
/// `t`; for odd `t` use [`pvalue_permutation`].
pub fn pvalue_exact(obs: &CrossCount) -> Result<f64> {
    let cross = obs.cross_pairs.ok_or_else(|| {
        Error::InvalidInput("exact p-value needs a matching-graph cross count".into())
    })?;
    let dist = null_pmf(obs.m, obs.n)?;
    Ok(dist.cdf(cross))
}

/// Monte Carlo permutation p-value: the graph stays fixed while labels are
/// reassigned uniformly at random `b` times;
/// `p = (1 + #{chi_b <= chi_obs}) / (b + 1)`.
///
/// Valid for any graph and any parity of `t`. Replicates run in parallel on
/// independent RNG streams derived from `seed`, so results are reproducible.
pub fn pvalue_permutation(
    graph: &SampleGraph,
    cloud: &PointCloud,
    b: usize,
    seed: u64,
) -> Result<f64> {
    if b < 1 {
        return Err(Error::InvalidParameter("need at least one permutation".into()));
    }
    let obs = cross_count(graph, cloud)?;
    let base: Vec<Label> = (0..cloud.len()).map(|i| cloud.label(i)).collect();
    let at_most = (0..b as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep + 1);
            let mut labels = base.clone();
            labels.shuffle(&mut rng);
            usize::from(cross_count_with_labels(graph, &labels) <= obs.chi)
        })
        .sum::<usize>();
    Ok((1 + at_most) as f64 / (b + 1) as f64)
}

/// Brute-force null pmf oracle: enumerate all `C(t, m)` label assignments
/// against a fixed perfect matching `(0,1), (2,3), ...` and tally the number
/// of cross pairs. Exact rational output; `t` must be even and small.
pub fn null_pmf_enumerate(m: usize, n: usize) -> Result<Vec<(usize, BigRational)>> {
    let t = check_mn(m, n)?;
    if t % 2 != 0 {
        return Err(Error::OddSampleSize { t });
    }
    if t > 24 {
        return Err(Error::InvalidParameter(format!(
            "enumeration oracle limited to t <= 24, got {t}"
        )));
    }
    let mut counts: HashMap<usize, BigInt> = HashMap::new();
    // Gosper's hack over all size-m subsets of t bits; bit i set = index i
    // carries the first-sample label.
    let even_bits: u32 = {
        let mut mask = 0u32;
        let mut i = 0;
        while i < t {
            mask |= 1 << i;
            i += 2;
        }
        mask
    };
    let mut subset: u32 = (1u32 << m) - 1;
    let limit: u32 = (1u32 << t) - 1;
    loop {
        // Pairs (2i, 2i+1) with differing labels.
        let diff = (subset ^ (subset >> 1)) & even_bits;
        let a1 = diff.count_ones() as usize;
        *counts.entry(a1).or_insert_with(BigInt::zero) += 1;
        // Gosper's hack: next subset with the same popcount.
        let c = subset & subset.wrapping_neg();
        let r = subset.wrapping_add(c);
        let next = (((r ^ subset) >> 2) / c) | r;
        if next > limit {
            break;
        }
        subset = next;
    }
    let denom = big_binomial(t, m);
    let mut out: Vec<(usize, BigRational)> = counts
        .into_iter()
        .map(|(a1, c)| (a1, BigRational::new(c, denom.clone())))
        .collect();
    out.sort_unstable_by_key(|&(a1, _)| a1);
    Ok(out)
}
