//! Numerical oracle for the almost-sure limit of `chi/t` and the
//! threshold test that the consistency result is built on.
//!
//! For graphs with limiting degree `delta` (1 for matchings), `chi/t`
//! converges to
//!
//! ```text
//! 2 delta * Int p(1-p) f(z) g(z) / (p f(z) + (1-p) g(z)) dz.
//! ```
//!
//! Under `f = g` the integral collapses to `2 delta p(1-p)`; for `f != g` it
//! is strictly smaller, which is what gives the threshold test its power.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::DensityModel;
use crate::error::{Error, Result};
use crate::quadrature::integrate_box;
use crate::statistic::CrossCount;

/// How a [`LimitEstimate`] was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitMethod {
    Quadrature,
    MonteCarlo,
}

/// Value of the limit integral with an error estimate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LimitEstimate {
    pub value: f64,
    pub p: f64,
    pub delta: f64,
    pub method: LimitMethod,
    /// Quadrature: accumulated panel estimate. Monte Carlo: one standard
    /// error of the mean.
    pub error_estimate: f64,
}

/// Default number of Monte Carlo samples for [`limit_integral`].
pub const DEFAULT_MC_SAMPLES: usize = 2_000_000;

fn check_p_delta(f: &DensityModel, g: &DensityModel, p: f64, delta: f64) -> Result<()> {
    f.validate()?;
    g.validate()?;
    if f.dim() != g.dim() {
        return Err(Error::InvalidParameter(format!(
            "models have different dimensions {} and {}",
            f.dim(),
            g.dim()
        )));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p must be in (0, 1), got {p}")));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    Ok(())
}

/// Evaluate the limit integral, picking quadrature for `d <= 3` and
/// importance-sampling Monte Carlo above. Seeded with 0 for the Monte Carlo
/// path; use [`limit_integral_with`] to control the method, sample count,
/// and seed.
pub fn limit_integral(
    f: &DensityModel,
    g: &DensityModel,
    p: f64,
    delta: f64,
) -> Result<LimitEstimate> {
    let method = if f.dim() <= 3 { LimitMethod::Quadrature } else { LimitMethod::MonteCarlo };
    limit_integral_with(f, g, p, delta, method, DEFAULT_MC_SAMPLES, 0)
}

pub fn limit_integral_with(
    f: &DensityModel,
    g: &DensityModel,
    p: f64,
    delta: f64,
    method: LimitMethod,
    mc_samples: usize,
    seed: u64,
) -> Result<LimitEstimate> {
    check_p_delta(f, g, p, delta)?;
    match method {
        LimitMethod::Quadrature => limit_quadrature(f, g, p, delta),
        LimitMethod::MonteCarlo => limit_monte_carlo(f, g, p, delta, mc_samples, seed),
    }
}

// The integrand without the 2*delta*p*(1-p) prefactor, i.e.
// f g / (p f + (1-p) g), with the convention 0 where both densities vanish.
#[inline]
fn kernel(f: &DensityModel, g: &DensityModel, p: f64, x: &[f64]) -> f64 {
    let fv = f.pdf(x);
    let gv = g.pdf(x);
    let mix = p * fv + (1.0 - p) * gv;
    if mix > 0.0 {
        fv * gv / mix
    } else {
        0.0
    }
}

fn limit_quadrature(
    f: &DensityModel,
    g: &DensityModel,
    p: f64,
    delta: f64,
) -> Result<LimitEstimate> {
    let d = f.dim();
    if d > 3 {
        return Err(Error::InvalidParameter(format!(
            "quadrature oracle supports d <= 3, got {d}; use Monte Carlo"
        )));
    }
    let (flo, fhi) = f.support_box();
    let (glo, ghi) = g.support_box();
    let lo: Vec<f64> = flo.iter().zip(&glo).map(|(&a, &b)| a.min(b)).collect();
    let hi: Vec<f64> = fhi.iter().zip(&ghi).map(|(&a, &b)| a.max(b)).collect();
    let mut breaks = f.breakpoints();
    for (bk, gk) in breaks.iter_mut().zip(g.breakpoints()) {
        bk.extend(gk);
    }
    let prefactor = 2.0 * delta * p * (1.0 - p);
    let (raw, raw_err) = integrate_box(&|x| kernel(f, g, p, x), &lo, &hi, &breaks, 1e-8)?;
    if raw_err > 1e-3 {
        return Err(Error::NumericalFailure(format!(
            "quadrature failed to converge: error estimate {raw_err:.3e}"
        )));
    }
    Ok(LimitEstimate {
        value: prefactor * raw,
        p,
        delta,
        method: LimitMethod::Quadrature,
        error_estimate: prefactor * raw_err,
    })
}

// Importance sampling with the mixture p f + (1-p) g as proposal. The
// estimand f g / mix^2 is bounded by 1/(4 p (1-p)), so the plain CLT error
// estimate is reliable. Chunks run in parallel on RNG streams derived from
// the seed and are reduced in fixed order, so results are reproducible.
fn limit_monte_carlo(
    f: &DensityModel,
    g: &DensityModel,
    p: f64,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<LimitEstimate> {
    if samples < 2 {
        return Err(Error::InvalidParameter("Monte Carlo needs at least 2 samples".into()));
    }
    const CHUNK: usize = 16_384;
    let chunks: Vec<(usize, usize)> = (0..samples)
        .step_by(CHUNK)
        .enumerate()
        .map(|(c, start)| (c, (samples - start).min(CHUNK)))
        .collect();
    let partials: Vec<(f64, f64)> = chunks
        .par_iter()
        .map(|&(chunk_idx, len)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk_idx as u64 + 1);
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..len {
                let use_f = rng.random_bool(p);
                let x = if use_f { f.sample(&mut rng) } else { g.sample(&mut rng) };
                let fv = f.pdf(&x);
                let gv = g.pdf(&x);
                let mix = p * fv + (1.0 - p) * gv;
                // mix > 0 almost surely: x was drawn from the mixture.
                let est = fv * gv / (mix * mix);
                sum += est;
                sumsq += est * est;
            }
            (sum, sumsq)
        })
        .collect();
    let (sum, sumsq) =
        partials.into_iter().fold((0.0, 0.0), |(a, b), (s, q)| (a + s, b + q));
    let nf = samples as f64;
    let mean = sum / nf;
    let var = (sumsq / nf - mean * mean).max(0.0) / (nf - 1.0);
    let prefactor = 2.0 * delta * p * (1.0 - p);
    Ok(LimitEstimate {
        value: prefactor * mean,
        p,
        delta,
        method: LimitMethod::MonteCarlo,
        error_estimate: prefactor * var.sqrt(),
    })
}

/// Outcome of the threshold test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Reject,
    Retain,
}

/// Threshold test: reject when `chi/t < 2 p_hat (1 - p_hat) - eta` with the
/// plug-in `p_hat = m/t`. The inequality is strict, so landing exactly on
/// the boundary retains.
pub fn asymptotic_test(obs: &CrossCount, eta: f64) -> Result<Decision> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")));
    }
    let t = obs.t as f64;
    let p_hat = obs.m as f64 / t;
    let threshold = 2.0 * p_hat * (1.0 - p_hat) - eta;
    Ok(if (obs.chi as f64) / t < threshold { Decision::Reject } else { Decision::Retain })
}

/// Threshold sequence `eta_t = c t^(-gamma)`; any `gamma` in `(0, 1/2)` makes
/// `eta_t` vanish while `eta_t * sqrt(t)` grows, as consistency requires.
pub fn eta_schedule(t: usize, c: f64, gamma: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("c must be positive, got {c}")));
    }
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(Error::InvalidParameter(format!("gamma must lie in (0, 1/2), got {gamma}")));
    }
    if t == 0 {
        return Err(Error::InvalidParameter("t must be positive".into()));
    }
    Ok(c * (t as f64).powf(-gamma))
}
