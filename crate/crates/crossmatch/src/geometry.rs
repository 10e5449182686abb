//! Point clouds, pairwise distances, and the edge-cost family.
//!
//! A [`PointCloud`] is the combined two-sample dataset: the first `m` points
//! carry label [`Label::First`] (the X sample), the remaining `n` carry
//! [`Label::Second`] (the Y sample). All downstream graph constructions and
//! statistics index into this combined ordering.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample membership of a point in the combined cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    /// X sample (CSV label `0`).
    First,
    /// Y sample (CSV label `1`).
    Second,
}

/// Labeled sample of points in `R^d`, stored in combined-sample order:
/// indices `0..m` are [`Label::First`], indices `m..t` are [`Label::Second`].
///
/// Duplicate points are permitted; ties are resolved downstream by the
/// solvers' deterministic tie-breaking. Note that the limit theory assumes a
/// diffuse distribution, so with coincident points every quantity here stays
/// well defined but the constant-degree argument behind the limit no longer
/// applies.
#[derive(Debug, Clone)]
pub struct PointCloud {
    coords: Vec<f64>,
    d: usize,
    m: usize,
    n: usize,
}

impl PointCloud {
    /// Build a cloud from the two samples. Either sample may be empty as long
    /// as the combined cloud is non-empty; test statistics require both.
    pub fn from_samples(first: &[Vec<f64>], second: &[Vec<f64>]) -> Result<Self> {
        let d = first
            .iter()
            .chain(second.iter())
            .map(Vec::len)
            .next()
            .ok_or_else(|| Error::InvalidInput("empty point cloud".into()))?;
        if d == 0 {
            return Err(Error::InvalidInput("points must have dimension >= 1".into()));
        }
        let mut coords = Vec::with_capacity((first.len() + second.len()) * d);
        for p in first.iter().chain(second.iter()) {
            if p.len() != d {
                return Err(Error::InvalidInput(format!(
                    "inconsistent dimension: expected {d}, got {}",
                    p.len()
                )));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("non-finite coordinate".into()));
            }
            coords.extend_from_slice(p);
        }
        Ok(Self { coords, d, m: first.len(), n: second.len() })
    }

    /// Build a cloud from labeled rows in any order. Rows are stably
    /// reordered into combined-sample order (all `First` before all `Second`).
    pub fn from_labeled(rows: &[(Vec<f64>, Label)]) -> Result<Self> {
        let first: Vec<Vec<f64>> = rows
            .iter()
            .filter(|(_, l)| *l == Label::First)
            .map(|(p, _)| p.clone())
            .collect();
        let second: Vec<Vec<f64>> = rows
            .iter()
            .filter(|(_, l)| *l == Label::Second)
            .map(|(p, _)| p.clone())
            .collect();
        Self::from_samples(&first, &second)
    }

    /// Read a cloud from CSV: header `x1,..,xd,label`, one row per point,
    /// label `0` for the first sample and `1` for the second.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 {
            return Err(Error::InvalidInput(
                "CSV must have columns x1..xd and label".into(),
            ));
        }
        let d = headers.len() - 1;
        for (k, name) in headers.iter().take(d).enumerate() {
            let expected = format!("x{}", k + 1);
            if name.trim() != expected {
                return Err(Error::InvalidInput(format!(
                    "unexpected CSV header column {:?}, expected {:?}",
                    name, expected
                )));
            }
        }
        if headers.get(d).map(str::trim) != Some("label") {
            return Err(Error::InvalidInput("last CSV column must be `label`".into()));
        }
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record?;
            if record.len() != d + 1 {
                return Err(Error::InvalidInput(format!(
                    "CSV row has {} fields, expected {}",
                    record.len(),
                    d + 1
                )));
            }
            let mut p = Vec::with_capacity(d);
            for k in 0..d {
                let v: f64 = record[k].trim().parse().map_err(|_| {
                    Error::InvalidInput(format!("bad coordinate {:?}", &record[k]))
                })?;
                p.push(v);
            }
            let label = match record[d].trim() {
                "0" => Label::First,
                "1" => Label::Second,
                other => {
                    return Err(Error::InvalidInput(format!(
                        "bad label {other:?}, expected 0 or 1"
                    )))
                }
            };
            rows.push((p, label));
        }
        Self::from_labeled(&rows)
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    /// Total point count `t = m + n`.
    pub fn len(&self) -> usize {
        self.m + self.n
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Size of the first (X) sample.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Size of the second (Y) sample.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn label(&self, i: usize) -> Label {
        assert!(i < self.len(), "point index {i} out of range");
        if i < self.m {
            Label::First
        } else {
            Label::Second
        }
    }

    /// Euclidean distance between points `i` and `j`.
    ///
    /// Panics if an index is out of range.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let a = self.point(i);
        let b = self.point(j);
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    /// Checked variant of [`PointCloud::distance`].
    pub fn try_distance(&self, i: usize, j: usize) -> Result<f64> {
        let t = self.len();
        if i >= t || j >= t {
            return Err(Error::InvalidParameter(format!(
                "point index out of range: ({i}, {j}) with t = {t}"
            )));
        }
        Ok(self.distance(i, j))
    }

    /// Require both samples non-empty, as every test statistic does.
    pub fn require_two_samples(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidInput(format!(
                "both samples must be non-empty (m = {}, n = {})",
                self.m, self.n
            )));
        }
        Ok(())
    }
}

/// Above this size the full distance matrix is no longer cached.
pub const FULL_MATRIX_LIMIT: usize = 4096;

/// Pairwise-distance accessor: a cached `t*t` matrix for `t <=`
/// [`FULL_MATRIX_LIMIT`] (solvers touch all pairs), on-demand computation
/// above.
pub struct Distances<'a> {
    cloud: &'a PointCloud,
    full: Option<Vec<f64>>,
}

impl<'a> Distances<'a> {
    pub fn new(cloud: &'a PointCloud) -> Self {
        Self::with_limit(cloud, FULL_MATRIX_LIMIT)
    }

    pub fn with_limit(cloud: &'a PointCloud, limit: usize) -> Self {
        let t = cloud.len();
        let full = (t <= limit).then(|| {
            let mut mat = vec![0.0; t * t];
            for i in 0..t {
                for j in (i + 1)..t {
                    let dist = cloud.distance(i, j);
                    mat[i * t + j] = dist;
                    mat[j * t + i] = dist;
                }
            }
            mat
        });
        Self { cloud, full }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.full {
            Some(mat) => mat[i * self.cloud.len() + j],
            None => self.cloud.distance(i, j),
        }
    }
}

/// Edge-cost function `lambda` applied to Euclidean edge lengths.
///
/// `Power { alpha }` is `b^alpha`; `CappedPower { alpha, cap }` is
/// `min(b^alpha, cap)`, a robust variant that stays bounded for long edges.
/// Both behave like `b^alpha` near zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostFunction {
    Power { alpha: f64 },
    CappedPower { alpha: f64, cap: f64 },
}

impl CostFunction {
    /// Plain Euclidean cost, `lambda(b) = b`.
    pub const EUCLIDEAN: CostFunction = CostFunction::Power { alpha: 1.0 };

    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        Ok(CostFunction::Power { alpha })
    }

    pub fn capped_power(alpha: f64, cap: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        if !(cap > 0.0) || !cap.is_finite() {
            return Err(Error::InvalidParameter(format!("cap must be positive, got {cap}")));
        }
        Ok(CostFunction::CappedPower { alpha, cap })
    }

    pub fn alpha(&self) -> f64 {
        match *self {
            CostFunction::Power { alpha } | CostFunction::CappedPower { alpha, .. } => alpha,
        }
    }

    /// Evaluate `lambda(b)` for an edge length `b >= 0`.
    pub fn cost(&self, b: f64) -> f64 {
        debug_assert!(b >= 0.0, "edge length must be nonnegative");
        match *self {
            CostFunction::Power { alpha } => pow_len(b, alpha),
            CostFunction::CappedPower { alpha, cap } => pow_len(b, alpha).min(cap),
        }
    }

    /// Checked variant of [`CostFunction::cost`]; rejects negative lengths.
    pub fn try_cost(&self, b: f64) -> Result<f64> {
        if !(b >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "edge length must be nonnegative, got {b}"
            )));
        }
        Ok(self.cost(b))
    }

    /// The consistency guarantee needs `alpha` in `(0, d)`. Outside that range
    /// the statistic is still computable, so this is a warning, not an error.
    pub fn consistency_warning(&self, d: usize) -> Option<String> {
        let alpha = self.alpha();
        (alpha >= d as f64).then(|| {
            format!(
                "alpha = {alpha} is outside (0, {d}); the cross-count remains computable \
                 but the consistency guarantee does not apply"
            )
        })
    }
}

// b^alpha with the conventions lambda(0) = 0 and 0^0 avoided (alpha > 0).
#[inline]
fn pow_len(b: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        b
    } else {
        b.powf(alpha)
    }
}
