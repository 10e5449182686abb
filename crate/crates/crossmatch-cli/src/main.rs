//! Command-line front end: minimum-distance matchings, graph diagnostics,
//! the exact null distribution, the two-sample test itself, the limit
//! oracle, and the simulation harness.
//!
//! Point files are CSV with header `x1,..,xd,label`, label 0 for the first
//! sample and 1 for the second. Indices in JSON output are 1-based.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crossmatch::asymptotics::{limit_integral_with, LimitMethod};
use crossmatch::density::DensityModel;
use crossmatch::geometry::CostFunction;
use crossmatch::harness::{
    run_convergence, run_greedy_scaling, run_power_curve, write_rows_csv, ExperimentConfig,
};
use crossmatch::matching::{matching_to_graph, solve_exact, solve_greedy, Matching};
use crossmatch::nulldist::{null_moments, null_pmf, pvalue_exact, pvalue_permutation};
use crossmatch::statistic::cross_count;
use crossmatch::{build_knn, build_mst, PointCloud, SampleGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    Exact,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GraphArg {
    Matching,
    Knn,
    Mst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CalibrationArg {
    Exact,
    Permutation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Quad,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExperimentArg {
    Convergence,
    GreedyScaling,
    Power,
}

#[derive(Parser)]
#[command(name = "crossmatch", version, about = "Graph-based two-sample testing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a minimum-cost matching of the combined sample
    Match {
        /// Input CSV (x1..xd,label)
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = SolverArg::Exact)]
        solver: SolverArg,
        /// Cost exponent: edge cost is distance^alpha
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Optional cost cap: edge cost min(distance^alpha, cap)
        #[arg(long)]
        cap: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output JSON path (stdout if omitted)
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Degree and edge-length diagnostics for a sample graph
    Diagnose {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = GraphArg::Matching)]
        graph: GraphArg,
        /// Neighbor count for knn graphs
        #[arg(long)]
        k: Option<usize>,
        /// Comma-separated thresholds for the long-edge diagnostic
        #[arg(long, default_value = "0.5,1,2,5,10")]
        a_grid: String,
        #[arg(long, value_enum, default_value_t = SolverArg::Exact)]
        solver: SolverArg,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long)]
        cap: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Exact null distribution of the cross-count for sample sizes (m, n)
    Null {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        /// Output path; .json or .csv by extension (stdout JSON if omitted)
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the two-sample test on a labeled point file
    Test {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = GraphArg::Matching)]
        graph: GraphArg,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum, default_value_t = CalibrationArg::Exact)]
        calibration: CalibrationArg,
        /// Number of label permutations for permutation calibration
        #[arg(long, default_value_t = 10_000)]
        permutations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = SolverArg::Exact)]
        solver: SolverArg,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long)]
        cap: Option<f64>,
        /// Test level used for the reported reject/retain decision
        #[arg(long, default_value_t = 0.05)]
        level: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Evaluate the limit of chi/t for a pair of density models
    Limit {
        /// Model spec: gauss:mu=..;sigma=.., box:lo=..;hi=.., or JSON
        #[arg(long)]
        f: String,
        #[arg(long)]
        g: String,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Quad)]
        method: MethodArg,
        /// Sample count for the Monte Carlo method
        #[arg(long, default_value_t = 2_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a simulation experiment from a TOML or JSON config
    Simulate {
        /// Config file (.toml or .json) holding an experiment description
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = ExperimentArg::Convergence)]
        experiment: ExperimentArg,
        /// Directory for report.csv and summary.json (created if missing)
        #[arg(long)]
        output_dir: PathBuf,
    },
}

fn main() {
    if let Err(err) = run(Cli::parse()) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn emit(value: &serde_json::Value, output: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match output {
        Some(path) => std::fs::write(path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn cost_function(alpha: f64, cap: Option<f64>) -> Result<CostFunction> {
    Ok(match cap {
        Some(cap) => CostFunction::capped_power(alpha, cap)?,
        None => CostFunction::power(alpha)?,
    })
}

fn load_cloud(path: &Path) -> Result<PointCloud> {
    PointCloud::from_csv_path(path).with_context(|| format!("reading {}", path.display()))
}

fn solve(cloud: &PointCloud, solver: SolverArg, cf: &CostFunction, seed: u64) -> Result<Matching> {
    Ok(match solver {
        SolverArg::Exact => solve_exact(cloud, cf, seed)?,
        SolverArg::Greedy => solve_greedy(cloud, cf, seed)?,
    })
}

fn build_graph(
    cloud: &PointCloud,
    graph: GraphArg,
    k: Option<usize>,
    solver: SolverArg,
    cf: &CostFunction,
    seed: u64,
) -> Result<(SampleGraph, Option<Matching>)> {
    match graph {
        GraphArg::Matching => {
            let matching = solve(cloud, solver, cf, seed)?;
            Ok((matching_to_graph(&matching), Some(matching)))
        }
        GraphArg::Knn => {
            let k = k.context("--graph knn requires --k")?;
            Ok((build_knn(cloud, k)?, None))
        }
        GraphArg::Mst => Ok((build_mst(cloud)?, None)),
    }
}

fn warn_alpha(cf: &CostFunction, d: usize) {
    if let Some(w) = cf.consistency_warning(d) {
        eprintln!("warning: {w}");
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Match { input, solver, alpha, cap, seed, output } => {
            let cloud = load_cloud(&input)?;
            let cf = cost_function(alpha, cap)?;
            warn_alpha(&cf, cloud.dim());
            let matching = solve(&cloud, solver, &cf, seed)?;
            let pairs: Vec<[usize; 2]> =
                matching.pairs().into_iter().map(|(i, j)| [i + 1, j + 1]).collect();
            emit(
                &json!({
                    "t": cloud.len(),
                    "solver": solver_name(solver),
                    "alpha": alpha,
                    "cap": cap,
                    "pairs": pairs,
                    "fixed_point": matching.fixed_point().map(|k| k + 1),
                    "total_cost": matching.total_cost(),
                    "euclidean_length": matching.euclidean_length(&cloud),
                }),
                output.as_deref(),
            )
        }
        Command::Diagnose { input, graph, k, a_grid, solver, alpha, cap, seed, output } => {
            let cloud = load_cloud(&input)?;
            let cf = cost_function(alpha, cap)?;
            let a_values: Vec<f64> = a_grid
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| anyhow::anyhow!("bad a value {s:?}")))
                .collect::<Result<_>>()?;
            let (g, _) = build_graph(&cloud, graph, k, solver, &cf, seed)?;
            let (max_out, max_in) = g.max_degrees();
            let fractions: Vec<serde_json::Value> = a_values
                .iter()
                .map(|&a| {
                    Ok(json!({"a": a, "fraction": g.long_edge_fraction(&cloud, a)?}))
                })
                .collect::<Result<_>>()?;
            emit(
                &json!({
                    "t": cloud.len(),
                    "graph": graph_name(graph),
                    "k": k,
                    "edges": g.edge_count(),
                    "max_out_degree": max_out,
                    "max_in_degree": max_in,
                    "mean_out_degree": g.mean_out_degree(),
                    "long_edge_fractions": fractions,
                }),
                output.as_deref(),
            )
        }
        Command::Null { m, n, output } => {
            let dist = null_pmf(m, n)?;
            let moments = null_moments(m, n)?;
            match output.as_deref() {
                Some(path) if path.extension().is_some_and(|e| e == "csv") => {
                    write_null_csv(path, &dist, moments.mean_chi, moments.variance_chi)
                }
                other => emit(
                    &json!({
                        "m": m,
                        "n": n,
                        "support": dist.support,
                        "pmf": dist.pmf,
                        "mean_chi": moments.mean_chi,
                        "variance_chi": moments.variance_chi,
                    }),
                    other,
                ),
            }
        }
        Command::Test {
            input,
            graph,
            k,
            calibration,
            permutations,
            seed,
            solver,
            alpha,
            cap,
            level,
            output,
        } => {
            let cloud = load_cloud(&input)?;
            let cf = cost_function(alpha, cap)?;
            warn_alpha(&cf, cloud.dim());
            if !(level > 0.0 && level < 1.0) {
                bail!("level must be in (0, 1), got {level}");
            }
            let (g, _) = build_graph(&cloud, graph, k, solver, &cf, seed)?;
            let obs = cross_count(&g, &cloud)?;
            let p_value = match calibration {
                CalibrationArg::Exact => pvalue_exact(&obs)?,
                CalibrationArg::Permutation => {
                    pvalue_permutation(&g, &cloud, permutations, seed)?
                }
            };
            emit(
                &json!({
                    "t": obs.t,
                    "m": obs.m,
                    "n": obs.n,
                    "graph": graph_name(graph),
                    "chi": obs.chi,
                    "cross_pairs": obs.cross_pairs,
                    "calibration": match calibration {
                        CalibrationArg::Exact => "exact",
                        CalibrationArg::Permutation => "permutation",
                    },
                    "permutations": (calibration == CalibrationArg::Permutation)
                        .then_some(permutations),
                    "p_value": p_value,
                    "level": level,
                    "reject": p_value <= level,
                }),
                output.as_deref(),
            )
        }
        Command::Limit { f, g, p, delta, method, samples, seed, output } => {
            let f = DensityModel::parse_spec(&f)?;
            let g = DensityModel::parse_spec(&g)?;
            let method = match method {
                MethodArg::Quad => LimitMethod::Quadrature,
                MethodArg::Mc => LimitMethod::MonteCarlo,
            };
            let est = limit_integral_with(&f, &g, p, delta, method, samples, seed)?;
            emit(
                &json!({
                    "value": est.value,
                    "error_estimate": est.error_estimate,
                    "method": match est.method {
                        LimitMethod::Quadrature => "quadrature",
                        LimitMethod::MonteCarlo => "monte_carlo",
                    },
                    "p": est.p,
                    "delta": est.delta,
                }),
                output.as_deref(),
            )
        }
        Command::Simulate { config, experiment, output_dir } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let cfg: ExperimentConfig =
                if config.extension().is_some_and(|e| e == "json") {
                    serde_json::from_str(&text).context("parsing JSON config")?
                } else {
                    toml::from_str(&text).context("parsing TOML config")?
                };
            cfg.validate()?;
            std::fs::create_dir_all(&output_dir)
                .with_context(|| format!("creating {}", output_dir.display()))?;
            let report_path = output_dir.join("report.csv");
            let summary_path = output_dir.join("summary.json");
            match experiment {
                ExperimentArg::Convergence => {
                    let report = run_convergence(&cfg)?;
                    for w in &report.warnings {
                        eprintln!("warning: {w}");
                    }
                    report.write_report_csv(&report_path)?;
                    report.write_summary_json(&summary_path)?;
                }
                ExperimentArg::GreedyScaling => {
                    let fit = run_greedy_scaling(&cfg)?;
                    for w in &fit.warnings {
                        eprintln!("warning: {w}");
                    }
                    write_rows_csv(&fit.rows, &report_path)?;
                    std::fs::write(&summary_path, serde_json::to_string_pretty(&fit)? + "\n")?;
                }
                ExperimentArg::Power => {
                    let curve = run_power_curve(&cfg, cfg.level)?;
                    write_rows_csv(&curve.rows, &report_path)?;
                    std::fs::write(&summary_path, serde_json::to_string_pretty(&curve)? + "\n")?;
                }
            }
            eprintln!(
                "wrote {} and {}",
                report_path.display(),
                summary_path.display()
            );
            Ok(())
        }
    }
}

fn solver_name(s: SolverArg) -> &'static str {
    match s {
        SolverArg::Exact => "exact",
        SolverArg::Greedy => "greedy",
    }
}

fn graph_name(g: GraphArg) -> &'static str {
    match g {
        GraphArg::Matching => "matching",
        GraphArg::Knn => "knn",
        GraphArg::Mst => "mst",
    }
}

// Long-format CSV: pmf rows then the two moments.
fn write_null_csv(
    path: &Path,
    dist: &crossmatch::NullDistribution,
    mean_chi: f64,
    variance_chi: Option<f64>,
) -> Result<()> {
    let mut out = String::from("quantity,a1,value\n");
    for (a1, p) in dist.support.iter().zip(&dist.pmf) {
        out.push_str(&format!("pmf,{a1},{p:.17e}\n"));
    }
    out.push_str(&format!("mean_chi,,{mean_chi:.17e}\n"));
    if let Some(v) = variance_chi {
        out.push_str(&format!("variance_chi,,{v:.17e}\n"));
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
