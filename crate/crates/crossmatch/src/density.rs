//! Density models for sampling and for evaluating the limit integral:
//! diagonal Gaussians, uniform boxes, and finite mixtures of these.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sampleable density on `R^d` with pointwise evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityModel {
    /// Independent coordinates; `sigma` holds per-coordinate standard
    /// deviations.
    Gaussian { mean: Vec<f64>, sigma: Vec<f64> },
    /// Uniform on the axis-aligned box `[lo, hi]`.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Finite mixture; weights must be positive and sum to one.
    Mixture { weights: Vec<f64>, components: Vec<DensityModel> },
}

impl DensityModel {
    pub fn gaussian(mean: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        let model = DensityModel::Gaussian { mean, sigma };
        model.validate()?;
        Ok(model)
    }

    pub fn uniform_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let model = DensityModel::UniformBox { lo, hi };
        model.validate()?;
        Ok(model)
    }

    pub fn mixture(weights: Vec<f64>, components: Vec<DensityModel>) -> Result<Self> {
        let model = DensityModel::Mixture { weights, components };
        model.validate()?;
        Ok(model)
    }

    /// Standard normal in `d` dimensions.
    pub fn standard_gaussian(d: usize) -> Self {
        DensityModel::Gaussian { mean: vec![0.0; d], sigma: vec![1.0; d] }
    }

    /// Unit cube `[0, 1]^d`.
    pub fn unit_box(d: usize) -> Self {
        DensityModel::UniformBox { lo: vec![0.0; d], hi: vec![1.0; d] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DensityModel::Gaussian { mean, sigma } => {
                if mean.is_empty() || mean.len() != sigma.len() {
                    return Err(Error::InvalidParameter(
                        "gaussian mean and sigma must share a positive dimension".into(),
                    ));
                }
                if sigma.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
                    return Err(Error::InvalidParameter("gaussian sigma must be positive".into()));
                }
            }
            DensityModel::UniformBox { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(Error::InvalidParameter(
                        "box lo and hi must share a positive dimension".into(),
                    ));
                }
                if lo.iter().zip(hi).any(|(&l, &h)| !(h > l)) {
                    return Err(Error::InvalidParameter("box needs hi > lo coordinatewise".into()));
                }
            }
            DensityModel::Mixture { weights, components } => {
                if components.is_empty() || weights.len() != components.len() {
                    return Err(Error::InvalidParameter(
                        "mixture needs matching weights and components".into(),
                    ));
                }
                if weights.iter().any(|&w| !(w > 0.0)) {
                    return Err(Error::InvalidParameter("mixture weights must be positive".into()));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidParameter(format!(
                        "mixture weights sum to {total}, expected 1"
                    )));
                }
                let d = components[0].dim();
                for c in components {
                    c.validate()?;
                    if c.dim() != d {
                        return Err(Error::InvalidParameter(
                            "mixture components must share a dimension".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            DensityModel::Gaussian { mean, .. } => mean.len(),
            DensityModel::UniformBox { lo, .. } => lo.len(),
            DensityModel::Mixture { components, .. } => components[0].dim(),
        }
    }

    /// Density value at `x`.
    pub fn pdf(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        match self {
            DensityModel::Gaussian { mean, sigma } => {
                let mut log_p = 0.0;
                for k in 0..mean.len() {
                    let z = (x[k] - mean[k]) / sigma[k];
                    log_p += -0.5 * z * z - sigma[k].ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
                }
                log_p.exp()
            }
            DensityModel::UniformBox { lo, hi } => {
                let inside = x.iter().zip(lo.iter().zip(hi)).all(|(&v, (&l, &h))| v >= l && v <= h);
                if inside {
                    1.0 / lo.iter().zip(hi).map(|(&l, &h)| h - l).product::<f64>()
                } else {
                    0.0
                }
            }
            DensityModel::Mixture { weights, components } => weights
                .iter()
                .zip(components)
                .map(|(&w, c)| w * c.pdf(x))
                .sum(),
        }
    }

    /// Draw one point.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            DensityModel::Gaussian { mean, sigma } => mean
                .iter()
                .zip(sigma)
                .map(|(&mu, &s)| mu + s * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            DensityModel::UniformBox { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(&l, &h)| rng.random_range(l..h))
                .collect(),
            DensityModel::Mixture { weights, components } => {
                let mut u: f64 = rng.random();
                for (w, c) in weights.iter().zip(components) {
                    if u < *w {
                        return c.sample(rng);
                    }
                    u -= w;
                }
                components.last().expect("nonempty mixture").sample(rng)
            }
        }
    }

    /// Whether the model has compact support (required by the greedy
    /// edge-length scaling bound).
    pub fn has_compact_support(&self) -> bool {
        match self {
            DensityModel::Gaussian { .. } => false,
            DensityModel::UniformBox { .. } => true,
            DensityModel::Mixture { components, .. } => {
                components.iter().all(|c| c.has_compact_support())
            }
        }
    }

    /// Axis-aligned box holding all but a negligible sliver (< 1e-8) of the
    /// model's mass; Gaussians are truncated at 6.5 sigma per coordinate.
    pub fn support_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            DensityModel::Gaussian { mean, sigma } => {
                let lo = mean.iter().zip(sigma).map(|(&mu, &s)| mu - 6.5 * s).collect();
                let hi = mean.iter().zip(sigma).map(|(&mu, &s)| mu + 6.5 * s).collect();
                (lo, hi)
            }
            DensityModel::UniformBox { lo, hi } => (lo.clone(), hi.clone()),
            DensityModel::Mixture { components, .. } => {
                let (mut lo, mut hi) = components[0].support_box();
                for c in &components[1..] {
                    let (clo, chi) = c.support_box();
                    for k in 0..lo.len() {
                        lo[k] = lo[k].min(clo[k]);
                        hi[k] = hi[k].max(chi[k]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Per-dimension points where the density is discontinuous (box edges);
    /// passed to the quadrature as pre-split points.
    pub fn breakpoints(&self) -> Vec<Vec<f64>> {
        let mut breaks = vec![Vec::new(); self.dim()];
        self.collect_breakpoints(&mut breaks);
        breaks
    }

    fn collect_breakpoints(&self, breaks: &mut [Vec<f64>]) {
        match self {
            DensityModel::Gaussian { .. } => {}
            DensityModel::UniformBox { lo, hi } => {
                for k in 0..lo.len() {
                    breaks[k].push(lo[k]);
                    breaks[k].push(hi[k]);
                }
            }
            DensityModel::Mixture { components, .. } => {
                for c in components {
                    c.collect_breakpoints(breaks);
                }
            }
        }
    }

    /// Parse the compact CLI grammar:
    /// `gauss:mu=0,0;sigma=1,1`, `box:lo=0,0;hi=1,1`, or a JSON object
    /// (anything starting with `{`).
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec.starts_with('{') {
            let model: DensityModel = serde_json::from_str(spec)
                .map_err(|e| Error::InvalidParameter(format!("bad model JSON: {e}")))?;
            model.validate()?;
            return Ok(model);
        }
        let (kind, rest) = spec
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("bad model spec {spec:?}")))?;
        let mut fields = std::collections::HashMap::new();
        for part in rest.split(';') {
            let (key, vals) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("bad model field {part:?}")))?;
            let parsed: std::result::Result<Vec<f64>, _> =
                vals.split(',').map(|v| v.trim().parse::<f64>()).collect();
            let parsed =
                parsed.map_err(|_| Error::InvalidParameter(format!("bad numbers in {part:?}")))?;
            fields.insert(key.trim().to_string(), parsed);
        }
        let take = |fields: &mut std::collections::HashMap<String, Vec<f64>>, key: &str| {
            fields
                .remove(key)
                .ok_or_else(|| Error::InvalidParameter(format!("model spec missing {key:?}")))
        };
        match kind.trim() {
            "gauss" => {
                let mean = take(&mut fields, "mu")?;
                let sigma = take(&mut fields, "sigma")?;
                DensityModel::gaussian(mean, sigma)
            }
            "box" => {
                let lo = take(&mut fields, "lo")?;
                let hi = take(&mut fields, "hi")?;
                DensityModel::uniform_box(lo, hi)
            }
            other => Err(Error::InvalidParameter(format!(
                "unknown model kind {other:?} (use gauss:, box:, or JSON)"
            ))),
        }
    }
}
