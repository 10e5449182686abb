//! Monte Carlo experiment runner: convergence of `chi/t` to its limit, null
//! calibration and power curves, greedy edge-length scaling, and the
//! bounded-degree / short-edge diagnostics, all over a grid of sample sizes.
//!
//! Replicates are embarrassingly parallel; every `(t, replicate)` cell draws
//! from its own RNG stream derived from the experiment seed, and summaries
//! are reduced in fixed order, so a config plus seed pins the entire report
//! bit for bit.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{asymptotic_test, eta_schedule, limit_integral, Decision, LimitEstimate};
use crate::density::DensityModel;
use crate::error::{Error, Result};
use crate::geometry::{CostFunction, PointCloud};
use crate::graph::{build_knn, build_mst, SampleGraph};
use crate::matching::{matching_to_graph, solve_exact, solve_greedy, Matching};
use crate::nulldist::pvalue_exact;
use crate::statistic::cross_count;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    #[default]
    Exact,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphChoice {
    Matching,
    Knn { k: usize },
    Mst,
}

impl Default for GraphChoice {
    fn default() -> Self {
        GraphChoice::Matching
    }
}

/// Largest `t` the experiment runner will hand to the exact solver.
pub const EXACT_SOLVER_T_CAP: usize = 1600;

fn default_alpha() -> f64 {
    1.0
}

fn default_a_grid() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 5.0, 10.0]
}

fn default_level() -> f64 {
    0.05
}

fn default_eta_c() -> f64 {
    1.0
}

fn default_eta_gamma() -> f64 {
    0.25
}

/// Configuration of one experiment. Sample sizes follow the limiting regime:
/// `m_t = round(p t)`, `n_t = t - m_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub f: DensityModel,
    pub g: DensityModel,
    pub p: f64,
    pub t_grid: Vec<usize>,
    pub replicates: usize,
    #[serde(default)]
    pub solver: SolverChoice,
    #[serde(default = "GraphChoice::default")]
    pub graph: GraphChoice,
    /// Cost exponent for the matching objective.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Optional cap for a robust (bounded) cost.
    #[serde(default)]
    pub cap: Option<f64>,
    pub seed: u64,
    /// Thresholds for the long-edge diagnostic.
    #[serde(default = "default_a_grid")]
    pub a_grid: Vec<f64>,
    /// Test level for power experiments.
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_eta_c")]
    pub eta_c: f64,
    #[serde(default = "default_eta_gamma")]
    pub eta_gamma: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.f.validate()?;
        self.g.validate()?;
        if self.f.dim() != self.g.dim() {
            return Err(Error::InvalidParameter("f and g must share a dimension".into()));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::InvalidParameter(format!("p must be in (0,1), got {}", self.p)));
        }
        if self.replicates < 1 {
            return Err(Error::InvalidParameter("need at least one replicate".into()));
        }
        if self.t_grid.is_empty() {
            return Err(Error::InvalidParameter("t_grid must be non-empty".into()));
        }
        if self.t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("t_grid must be strictly ascending".into()));
        }
        if self.t_grid.iter().any(|&t| t < 2 || t % 2 != 0) {
            return Err(Error::InvalidParameter("t_grid entries must be even and >= 2".into()));
        }
        // The O(t^3) exact solver is budgeted for desk scale; use the greedy
        // solver beyond.
        if matches!((self.solver, self.graph), (SolverChoice::Exact, GraphChoice::Matching))
            && self.t_grid.iter().any(|&t| t > EXACT_SOLVER_T_CAP)
        {
            return Err(Error::InvalidParameter(format!(
                "exact matching is capped at t = {EXACT_SOLVER_T_CAP} in experiments; \
                 switch to the greedy solver for larger t"
            )));
        }
        if !(self.level > 0.0 && self.level <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "level must be in (0,1], got {}",
                self.level
            )));
        }
        CostFunction::power(self.alpha)?;
        if let Some(cap) = self.cap {
            CostFunction::capped_power(self.alpha, cap)?;
        }
        eta_schedule(2, self.eta_c, self.eta_gamma)?;
        Ok(())
    }

    pub fn cost_function(&self) -> CostFunction {
        match self.cap {
            Some(cap) => CostFunction::capped_power(self.alpha, cap).expect("validated"),
            None => CostFunction::power(self.alpha).expect("validated"),
        }
    }

    /// First-sample size at total size `t`, clamped so both samples stay
    /// non-empty.
    pub fn m_of(&self, t: usize) -> usize {
        (((self.p * t as f64).round() as usize).max(1)).min(t - 1)
    }

    // Independent RNG stream per (t, replicate) cell.
    fn rng_for(&self, t: usize, replicate: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((t as u64) << 32) | replicate as u64);
        rng
    }

    fn draw_cloud(&self, t: usize, rng: &mut ChaCha8Rng) -> Result<PointCloud> {
        let m = self.m_of(t);
        let first: Vec<Vec<f64>> = (0..m).map(|_| self.f.sample(rng)).collect();
        let second: Vec<Vec<f64>> = (0..t - m).map(|_| self.g.sample(rng)).collect();
        PointCloud::from_samples(&first, &second)
    }

    /// Limiting out-degree for the configured graph family. Only matchings
    /// (delta = 1) are covered by the convergence theory here; the others are
    /// experimental reference lines.
    pub fn delta(&self) -> f64 {
        match self.graph {
            GraphChoice::Matching => 1.0,
            GraphChoice::Knn { k } => k as f64,
            GraphChoice::Mst => 2.0,
        }
    }
}

/// One tidy long-format record: a named metric for one `(t, replicate)` cell.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub t: usize,
    pub replicate: usize,
    pub metric: String,
    pub value: f64,
}

/// Per-`t` summary of the convergence experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceSummary {
    pub t: usize,
    pub m: usize,
    pub n: usize,
    pub mean_chi: f64,
    pub mean_chi_over_t: f64,
    pub std_chi_over_t: f64,
    /// Standard error of `mean_chi_over_t`.
    pub se_chi_over_t: f64,
    pub var_chi: f64,
    /// `|mean chi/t - oracle limit|`.
    pub gap_to_limit: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub rows: Vec<Row>,
    pub summaries: Vec<ConvergenceSummary>,
    pub oracle_limit: LimitEstimate,
    pub warnings: Vec<String>,
}

/// Tidy long-format CSV: `t,replicate,metric,value`.
pub fn write_rows_csv<P: AsRef<Path>>(rows: &[Row], path: P) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["t", "replicate", "metric", "value"])?;
    for row in rows {
        w.write_record([
            row.t.to_string(),
            row.replicate.to_string(),
            row.metric.clone(),
            format!("{:.17e}", row.value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

impl ExperimentReport {
    pub fn write_report_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        write_rows_csv(&self.rows, path)
    }

    pub fn write_summary_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path.as_ref())?;
        let mut w = std::io::BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, &SummaryOnly::from(self))
            .map_err(|e| Error::NumericalFailure(format!("summary serialization: {e}")))?;
        w.flush()?;
        Ok(())
    }
}

#[derive(Serialize)]
struct SummaryOnly<'a> {
    summaries: &'a [ConvergenceSummary],
    oracle_limit: &'a LimitEstimate,
    warnings: &'a [String],
}

impl<'a> From<&'a ExperimentReport> for SummaryOnly<'a> {
    fn from(r: &'a ExperimentReport) -> Self {
        Self { summaries: &r.summaries, oracle_limit: &r.oracle_limit, warnings: &r.warnings }
    }
}

// Everything measured on one replicate.
struct ReplicateOutcome {
    rows: Vec<Row>,
    chi_over_t: f64,
    chi: f64,
    reject_exact: Option<bool>,
    reject_eta: bool,
}

fn build_graph(
    config: &ExperimentConfig,
    cloud: &PointCloud,
    solver_seed: u64,
) -> Result<(SampleGraph, Option<Matching>)> {
    match config.graph {
        GraphChoice::Matching => {
            let cf = config.cost_function();
            let matching = match config.solver {
                SolverChoice::Exact => solve_exact(cloud, &cf, solver_seed)?,
                SolverChoice::Greedy => solve_greedy(cloud, &cf, solver_seed)?,
            };
            Ok((matching_to_graph(&matching), Some(matching)))
        }
        GraphChoice::Knn { k } => Ok((build_knn(cloud, k)?, None)),
        GraphChoice::Mst => Ok((build_mst(cloud)?, None)),
    }
}

fn run_replicate(
    config: &ExperimentConfig,
    t: usize,
    replicate: usize,
    with_tests: bool,
) -> Result<ReplicateOutcome> {
    let mut rng = config.rng_for(t, replicate);
    let cloud = config.draw_cloud(t, &mut rng)?;
    let solver_seed = rand::Rng::random(&mut rng);
    let (graph, matching) = build_graph(config, &cloud, solver_seed).map_err(|e| {
        Error::InvalidInput(format!(
            "replicate (t = {t}, rep = {replicate}, experiment seed = {}): {e}",
            config.seed
        ))
    })?;
    let obs = cross_count(&graph, &cloud)?;
    let chi_over_t = obs.chi as f64 / t as f64;
    let mut rows = vec![
        Row { t, replicate, metric: "chi".into(), value: obs.chi as f64 },
        Row { t, replicate, metric: "chi_over_t".into(), value: chi_over_t },
    ];
    if let Some(cp) = obs.cross_pairs {
        rows.push(Row { t, replicate, metric: "cross_pairs".into(), value: cp as f64 });
    }
    if let Some(matching) = &matching {
        rows.push(Row {
            t,
            replicate,
            metric: "matching_cost".into(),
            value: matching.total_cost(),
        });
        rows.push(Row {
            t,
            replicate,
            metric: "euclidean_length".into(),
            value: matching.euclidean_length(&cloud),
        });
    }
    for &a in &config.a_grid {
        rows.push(Row {
            t,
            replicate,
            metric: format!("long_edge_frac_a{a}"),
            value: graph.long_edge_fraction(&cloud, a)?,
        });
    }
    rows.push(Row {
        t,
        replicate,
        metric: "mean_out_degree".into(),
        value: graph.mean_out_degree(),
    });

    let mut reject_exact = None;
    let mut reject_eta = false;
    if with_tests {
        if matches!(config.graph, GraphChoice::Matching) && t % 2 == 0 {
            let p = pvalue_exact(&obs)?;
            rows.push(Row { t, replicate, metric: "pvalue_exact".into(), value: p });
            reject_exact = Some(p <= config.level);
        }
        let eta = eta_schedule(t, config.eta_c, config.eta_gamma)?;
        reject_eta = asymptotic_test(&obs, eta)? == Decision::Reject;
        rows.push(Row {
            t,
            replicate,
            metric: "reject_eta".into(),
            value: f64::from(u8::from(reject_eta)),
        });
    }
    Ok(ReplicateOutcome { rows, chi_over_t, chi: obs.chi as f64, reject_exact, reject_eta })
}

fn run_cells(
    config: &ExperimentConfig,
    with_tests: bool,
) -> Result<Vec<(usize, Vec<ReplicateOutcome>)>> {
    config.validate()?;
    let mut out = Vec::with_capacity(config.t_grid.len());
    for &t in &config.t_grid {
        let outcomes: Result<Vec<ReplicateOutcome>> = (0..config.replicates)
            .into_par_iter()
            .map(|rep| run_replicate(config, t, rep, with_tests))
            .collect();
        out.push((t, outcomes?));
    }
    Ok(out)
}

/// Sample, build the configured graph, and record `chi/t` per replicate over
/// the whole `t_grid`, with the oracle limit alongside.
pub fn run_convergence(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let cells = run_cells(config, false)?;
    let oracle_limit = limit_integral(&config.f, &config.g, config.p, config.delta())?;
    let mut warnings = Vec::new();
    if !matches!(config.graph, GraphChoice::Matching) {
        warnings.push(
            "limit oracle with delta != 1 is experimental: the convergence theory here \
             covers matchings"
                .into(),
        );
    }
    if let Some(w) = config.cost_function().consistency_warning(config.f.dim()) {
        warnings.push(w);
    }
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (t, outcomes) in cells {
        let r = outcomes.len() as f64;
        let mean_chi = outcomes.iter().map(|o| o.chi).sum::<f64>() / r;
        let mean = outcomes.iter().map(|o| o.chi_over_t).sum::<f64>() / r;
        let var_over_t = outcomes
            .iter()
            .map(|o| (o.chi_over_t - mean) * (o.chi_over_t - mean))
            .sum::<f64>()
            / (r - 1.0).max(1.0);
        let var_chi = outcomes.iter().map(|o| (o.chi - mean_chi) * (o.chi - mean_chi)).sum::<f64>()
            / (r - 1.0).max(1.0);
        summaries.push(ConvergenceSummary {
            t,
            m: config.m_of(t),
            n: t - config.m_of(t),
            mean_chi,
            mean_chi_over_t: mean,
            std_chi_over_t: var_over_t.sqrt(),
            se_chi_over_t: (var_over_t / r).sqrt(),
            var_chi,
            gap_to_limit: (mean - oracle_limit.value).abs(),
        });
        for o in outcomes {
            rows.extend(o.rows);
        }
    }
    Ok(ExperimentReport { rows, summaries, oracle_limit, warnings })
}

/// Fitted log-log slope of greedy total edge length against `t`.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// `(t, mean greedy Euclidean length)` per grid point.
    pub points: Vec<(usize, f64)>,
    pub warnings: Vec<String>,
    /// Per-replicate lengths in tidy long format.
    pub rows: Vec<Row>,
}

/// Greedy total-length scaling: regress `ln(mean length)` on `ln t`. The
/// scaling bound assumes compactly supported models; non-compact models only
/// produce a warning, since the slope is still informative.
pub fn run_greedy_scaling(config: &ExperimentConfig) -> Result<ScalingFit> {
    config.validate()?;
    if config.t_grid.len() < 2 {
        return Err(Error::InvalidParameter(
            "greedy scaling needs at least two t values to fit a slope".into(),
        ));
    }
    let mut warnings = Vec::new();
    if !config.f.has_compact_support() || !config.g.has_compact_support() {
        warnings.push("greedy scaling bound assumes compact support; models are not compact".into());
    }
    let cf = config.cost_function();
    let mut points = Vec::with_capacity(config.t_grid.len());
    let mut rows = Vec::new();
    for &t in &config.t_grid {
        let lengths: Result<Vec<f64>> = (0..config.replicates)
            .into_par_iter()
            .map(|rep| {
                let mut rng = config.rng_for(t, rep);
                let cloud = config.draw_cloud(t, &mut rng)?;
                let seed = rand::Rng::random(&mut rng);
                Ok(solve_greedy(&cloud, &cf, seed)?.euclidean_length(&cloud))
            })
            .collect();
        let lengths = lengths?;
        for (rep, &len) in lengths.iter().enumerate() {
            rows.push(Row {
                t,
                replicate: rep,
                metric: "greedy_euclidean_length".into(),
                value: len,
            });
        }
        points.push((t, lengths.iter().sum::<f64>() / lengths.len() as f64));
    }
    let (slope, intercept) = least_squares_loglog(&points);
    Ok(ScalingFit { slope, intercept, points, warnings, rows })
}

fn least_squares_loglog(points: &[(usize, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(t, y) in points {
        let x = (t as f64).ln();
        let y = y.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    (slope, (sy - slope * sx) / n)
}

/// Empirical rejection rates per `t` for the exact-null level test and the
/// vanishing-threshold test.
#[derive(Debug, Clone, Serialize)]
pub struct PowerPoint {
    pub t: usize,
    /// Rejection rate of `pvalue_exact <= level`; `None` when the graph is
    /// not a matching.
    pub power_exact: Option<f64>,
    /// Rejection rate of the eta-threshold test.
    pub power_eta: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerCurve {
    pub level: f64,
    pub points: Vec<PowerPoint>,
    pub rows: Vec<Row>,
}

/// Rejection frequency along the `t_grid` for both calibrations.
pub fn run_power_curve(config: &ExperimentConfig, level: f64) -> Result<PowerCurve> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::InvalidParameter(format!("level must be in (0,1], got {level}")));
    }
    let config = ExperimentConfig { level, ..config.clone() };
    let cells = run_cells(&config, true)?;
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for (t, outcomes) in cells {
        let r = outcomes.len();
        let exact_rejections: Option<usize> = outcomes
            .iter()
            .map(|o| o.reject_exact.map(usize::from))
            .collect::<Option<Vec<usize>>>()
            .map(|v| v.into_iter().sum());
        let eta_rejections: usize = outcomes.iter().filter(|o| o.reject_eta).count();
        points.push(PowerPoint {
            t,
            power_exact: exact_rejections.map(|k| k as f64 / r as f64),
            power_eta: eta_rejections as f64 / r as f64,
            replicates: r,
        });
        for o in outcomes {
            rows.extend(o.rows);
        }
    }
    Ok(PowerCurve { level, points, rows })
}
