//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured numbers (run with `--nocapture` to see them).
//!
//! Quantities with no closed form are pinned in `fixtures/frozen.json`;
//! everything else is checked against the exact formulas.

use crossmatch::asymptotics::{limit_integral_with, LimitMethod};
use crossmatch::density::DensityModel;
use crossmatch::geometry::CostFunction;
use crossmatch::harness::{
    run_convergence, run_greedy_scaling, run_power_curve, ExperimentConfig, GraphChoice,
    SolverChoice,
};
use crossmatch::matching::{
    matching_to_graph, solve_brute_force, solve_exact, solve_greedy,
};
use crossmatch::nulldist::{
    null_moments, null_pmf_enumerate, null_pmf_exact, pvalue_exact, pvalue_permutation,
    NullDistribution,
};
use crossmatch::statistic::cross_count;
use crossmatch::PointCloud;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

#[derive(Deserialize)]
struct FrozenConstant {
    value: f64,
    #[serde(default)]
    tolerance: Option<f64>,
    #[serde(default)]
    threshold: Option<f64>,
}

#[derive(Deserialize)]
struct Frozen {
    gaussian_shift_limit: FrozenConstant,
    power_exact_t500_gaussian_shift: FrozenConstant,
    power_eta_t500_gaussian_shift: FrozenConstant,
    long_edge_fraction_a5_t500_uniform2d: FrozenConstant,
}

fn frozen() -> Frozen {
    serde_json::from_str(include_str!("fixtures/frozen.json")).expect("valid fixtures")
}

fn random_cloud(rng: &mut ChaCha8Rng, m: usize, n: usize, d: usize) -> PointCloud {
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..d).map(|_| rng.random_range(-4.0..4.0)).collect()
    };
    let first: Vec<Vec<f64>> = (0..m).map(|_| draw(rng)).collect();
    let second: Vec<Vec<f64>> = (0..n).map(|_| draw(rng)).collect();
    PointCloud::from_samples(&first, &second).unwrap()
}

fn shift_config() -> ExperimentConfig {
    ExperimentConfig {
        f: DensityModel::standard_gaussian(2),
        g: DensityModel::gaussian(vec![2.0, 0.0], vec![1.0, 1.0]).unwrap(),
        p: 0.5,
        t_grid: vec![100, 200, 500],
        replicates: 150,
        solver: SolverChoice::Exact,
        graph: GraphChoice::Matching,
        alpha: 1.0,
        cap: None,
        seed: 7,
        a_grid: vec![],
        level: 0.05,
        eta_c: 1.0,
        eta_gamma: 0.25,
    }
}

#[test]
fn criterion_1_exact_solver_matches_brute_force_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(20260810);
    let alphas = [0.5, 1.0];
    let mut checked = 0;
    for case in 0..200 {
        let t = [4, 6, 8, 10][case % 4];
        let d = [1, 2, 3][case % 3];
        let alpha = alphas[case % 2];
        let m = rng.random_range(1..t);
        let cloud = random_cloud(&mut rng, m, t - m, d);
        let cf = CostFunction::power(alpha).unwrap();
        let exact = solve_exact(&cloud, &cf, rng.random()).unwrap();
        let brute = solve_brute_force(&cloud, &cf).unwrap();
        assert_eq!(
            exact.total_cost(),
            brute.total_cost(),
            "cloud {case}: t = {t}, d = {d}, alpha = {alpha}"
        );
        checked += 1;
    }
    println!("criterion 1 PASS: exact == brute-force objective on {checked} random clouds");
}

#[test]
fn criterion_2_null_distribution_exactness() {
    // Closed form vs full enumeration, in exact rational arithmetic.
    let mut enumerated = 0;
    for t in (2..=20usize).step_by(2) {
        for m in 1..t {
            let closed = null_pmf_exact(m, t - m).unwrap();
            let brute = null_pmf_enumerate(m, t - m).unwrap();
            assert_eq!(closed, brute, "closed form != enumeration at m = {m}, n = {}", t - m);
            enumerated += 1;
        }
    }
    // Normalization and the closed-form moments for the floating pmf.
    let mut swept = 0;
    for t in (2..=200usize).step_by(2) {
        for m in 1..t {
            let dist = NullDistribution::new(m, t - m).unwrap();
            let total: f64 = dist.pmf.iter().sum();
            assert!(
                (total - 1.0).abs() < 1e-12,
                "pmf sums to {total} at m = {m}, n = {}",
                t - m
            );
            let moments = null_moments(m, t - m).unwrap();
            assert!(
                (dist.mean_chi() - moments.mean_chi).abs() < 1e-10,
                "mean mismatch at m = {m}, n = {}",
                t - m
            );
            if let Some(var) = moments.variance_chi {
                assert!(
                    (dist.variance_chi() - var).abs() < 1e-10,
                    "variance mismatch at m = {m}, n = {}",
                    t - m
                );
            }
            swept += 1;
        }
    }
    println!(
        "criterion 2 PASS: {enumerated} (m, n) pairs match enumeration exactly; \
         {swept} pmfs normalized with closed-form moments"
    );
}

#[test]
fn criterion_3_null_simulation_calibration() {
    let config = ExperimentConfig {
        g: DensityModel::standard_gaussian(2),
        t_grid: vec![100],
        replicates: 2000,
        seed: 20260810,
        ..shift_config()
    };
    let report = run_convergence(&config).unwrap();
    let s = &report.summaries[0];
    let moments = null_moments(50, 50).unwrap();
    let se = (moments.variance_chi.unwrap() / 2000.0).sqrt();
    assert!(
        (s.mean_chi - moments.mean_chi).abs() <= 4.0 * se,
        "mean chi {} vs {} with se {se}",
        s.mean_chi,
        moments.mean_chi
    );
    assert!(
        (s.var_chi - moments.variance_chi.unwrap()).abs()
            <= 0.3 * moments.variance_chi.unwrap(),
        "empirical variance {} too far from {}",
        s.var_chi,
        moments.variance_chi.unwrap()
    );
    let curve = run_power_curve(&config, 0.05).unwrap();
    let size = curve.points[0].power_exact.unwrap();
    assert!(
        (0.03..=0.07).contains(&size),
        "empirical size {size} outside [0.03, 0.07]"
    );
    println!(
        "criterion 3 PASS: mean chi {:.3} (target {:.3} +- {:.3}), variance {:.2} \
         (target {:.2}), size {size:.4} in [0.03, 0.07]",
        s.mean_chi,
        moments.mean_chi,
        4.0 * se,
        s.var_chi,
        moments.variance_chi.unwrap()
    );
}

#[test]
fn criterion_4_limit_under_h0() {
    let config = ExperimentConfig {
        g: DensityModel::standard_gaussian(2),
        t_grid: vec![1000],
        replicates: 50,
        seed: 20260810,
        ..shift_config()
    };
    let report = run_convergence(&config).unwrap();
    let mean = report.summaries[0].mean_chi_over_t;
    assert!(
        (0.45..=0.55).contains(&mean),
        "mean chi/t {mean} outside [0.45, 0.55]"
    );
    assert!((report.oracle_limit.value - 0.5).abs() < 1e-7);
    println!(
        "criterion 4 PASS: H0 mean chi/t = {mean:.4} in [0.45, 0.55], oracle limit {:.6}",
        report.oracle_limit.value
    );
}

#[test]
fn criterion_5_limit_under_gaussian_shift() {
    let frozen = frozen().gaussian_shift_limit;
    let f = DensityModel::standard_gaussian(2);
    let g = DensityModel::gaussian(vec![2.0, 0.0], vec![1.0, 1.0]).unwrap();
    let quad = limit_integral_with(&f, &g, 0.5, 1.0, LimitMethod::Quadrature, 0, 0).unwrap();
    let mc =
        limit_integral_with(&f, &g, 0.5, 1.0, LimitMethod::MonteCarlo, 10_000_000, 20260810)
            .unwrap();
    assert!(
        (quad.value - frozen.value).abs() <= frozen.tolerance.unwrap(),
        "quadrature {} drifted from frozen {}",
        quad.value,
        frozen.value
    );
    assert!(
        (quad.value - mc.value).abs() <= 3.0 * (quad.error_estimate + mc.error_estimate),
        "oracles disagree: quadrature {} +- {} vs monte carlo {} +- {}",
        quad.value,
        quad.error_estimate,
        mc.value,
        mc.error_estimate
    );
    // The limit must be non-degenerate: strictly inside (0, 2p(1-p)).
    assert!(quad.value > 0.0 && quad.value < 0.5);

    let near = run_convergence(&ExperimentConfig {
        t_grid: vec![200],
        replicates: 600,
        ..shift_config()
    })
    .unwrap();
    let far = run_convergence(&ExperimentConfig {
        t_grid: vec![1600],
        replicates: 20,
        ..shift_config()
    })
    .unwrap();
    let (s200, s1600) = (&near.summaries[0], &far.summaries[0]);
    assert!(
        (s1600.mean_chi_over_t - frozen.value).abs() <= 0.05,
        "mean chi/t at t = 1600 is {} vs frozen limit {}",
        s1600.mean_chi_over_t,
        frozen.value
    );
    // Convergence along t: the gap shrinks, judged (as every convergence
    // statement here is) up to twice the Monte Carlo standard error.
    let slack = 2.0 * (s200.se_chi_over_t.powi(2) + s1600.se_chi_over_t.powi(2)).sqrt();
    assert!(
        s1600.gap_to_limit < s200.gap_to_limit + slack,
        "gap did not shrink: t=200 gap {} vs t=1600 gap {} (slack {slack})",
        s200.gap_to_limit,
        s1600.gap_to_limit
    );
    println!(
        "criterion 5 PASS: quadrature {:.10} == frozen {:.10} (tol {:.1e}); mc {:.6} +- {:.1e}; \
         gap t=200 {:.4} -> t=1600 {:.4} (strictly smaller: {})",
        quad.value,
        frozen.value,
        frozen.tolerance.unwrap(),
        mc.value,
        mc.error_estimate,
        s200.gap_to_limit,
        s1600.gap_to_limit,
        s1600.gap_to_limit < s200.gap_to_limit
    );
}

#[test]
fn criterion_6_consistency_power_curves() {
    let fz = frozen();
    let config = shift_config();
    let curve = run_power_curve(&config, 0.05).unwrap();
    let reps = config.replicates as f64;
    let se = |p: f64| (p * (1.0 - p) / reps).sqrt();
    let exact: Vec<f64> = curve.points.iter().map(|pt| pt.power_exact.unwrap()).collect();
    let eta: Vec<f64> = curve.points.iter().map(|pt| pt.power_eta).collect();
    for series in [&exact, &eta] {
        for w in series.windows(2) {
            let slack = 2.0 * (se(w[0]).powi(2) + se(w[1]).powi(2)).sqrt();
            assert!(
                w[1] >= w[0] - slack,
                "power decreased along t_grid: {w:?} with slack {slack}"
            );
        }
    }
    let (exact_500, eta_500) = (*exact.last().unwrap(), *eta.last().unwrap());
    assert!(exact_500 > fz.power_exact_t500_gaussian_shift.threshold.unwrap());
    assert!(eta_500 > fz.power_eta_t500_gaussian_shift.threshold.unwrap());
    assert!(
        (exact_500 - fz.power_exact_t500_gaussian_shift.value).abs() <= 0.05,
        "exact-test power {exact_500} drifted from frozen {}",
        fz.power_exact_t500_gaussian_shift.value
    );
    assert!(
        (eta_500 - fz.power_eta_t500_gaussian_shift.value).abs() <= 0.05,
        "eta-test power {eta_500} drifted from frozen {}",
        fz.power_eta_t500_gaussian_shift.value
    );
    println!(
        "criterion 6 PASS: power(exact) = {exact:?}, power(eta) = {eta:?}, both > 0.9 at t = 500"
    );
}

#[test]
fn criterion_7_greedy_scaling() {
    for (d, expected) in [(2usize, 0.5f64), (3, 2.0 / 3.0)] {
        let config = ExperimentConfig {
            f: DensityModel::unit_box(d),
            g: DensityModel::unit_box(d),
            t_grid: vec![500, 1000, 2000, 4000, 8000],
            replicates: 3,
            solver: SolverChoice::Greedy,
            ..shift_config()
        };
        let fit = run_greedy_scaling(&config).unwrap();
        assert!(fit.warnings.is_empty());
        assert!(
            (fit.slope - expected).abs() <= 0.1,
            "d = {d}: slope {} vs expected {expected} +- 0.1",
            fit.slope
        );
        println!(
            "criterion 7 PASS (d = {d}): log-log slope {:.4}, expected {expected:.4} +- 0.1",
            fit.slope
        );
    }
}

#[test]
fn criterion_8_assumption_diagnostics() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a_grid = [0.25, 1.0, 2.0, 5.0, 25.0, 1e6];
    let mut checked = 0;
    for case in 0..40 {
        let t = rng.random_range(3..=60);
        let m = rng.random_range(1..t);
        let d = [1, 2, 3][case % 3];
        let cloud = random_cloud(&mut rng, m, t - m, d);
        let cf = CostFunction::EUCLIDEAN;
        let matching = if case % 2 == 0 {
            solve_exact(&cloud, &cf, case as u64).unwrap()
        } else {
            solve_greedy(&cloud, &cf, case as u64).unwrap()
        };
        let graph = matching_to_graph(&matching);
        assert_eq!(graph.max_degrees(), (1, 1), "matching degree bound violated");
        let expected_mean = (t - t % 2) as f64 / t as f64;
        assert_eq!(
            graph.mean_out_degree(),
            expected_mean,
            "mean out-degree formula violated at t = {t}"
        );
        let fracs: Vec<f64> = a_grid
            .iter()
            .map(|&a| graph.long_edge_fraction(&cloud, a).unwrap())
            .collect();
        assert!(
            fracs.windows(2).all(|w| w[0] >= w[1]),
            "long-edge fraction not monotone in a: {fracs:?}"
        );
        checked += 1;
    }
    // Regression value for the short-edge proxy: an optimal matching of 500
    // uniform points in the unit square has essentially no edge longer than
    // 5 t^(-1/2).
    let fz = frozen().long_edge_fraction_a5_t500_uniform2d;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let ub = DensityModel::unit_box(2);
    let pts: Vec<Vec<f64>> = (0..500).map(|_| ub.sample(&mut rng)).collect();
    let (first, second) = pts.split_at(250);
    let cloud = PointCloud::from_samples(first, second).unwrap();
    let matching = solve_exact(&cloud, &CostFunction::EUCLIDEAN, 0).unwrap();
    let frac = matching_to_graph(&matching).long_edge_fraction(&cloud, 5.0).unwrap();
    assert!(frac < fz.threshold.unwrap(), "long-edge fraction {frac} >= 0.2");
    assert!(
        (frac - fz.value).abs() <= 0.05,
        "long-edge fraction {frac} drifted from frozen {}",
        fz.value
    );
    println!(
        "criterion 8 PASS: {checked} matchings satisfy degree <= 1, exact mean out-degree, \
         and monotone long-edge fractions; uniform-square fraction at a = 5 is {frac}"
    );
}

#[test]
fn criterion_9_permutation_exact_agreement() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let b = 10_000;
    for case in 0..20 {
        let t = 2 * rng.random_range(10..=30);
        let m = rng.random_range(1..t);
        let mut cloud = random_cloud(&mut rng, m, t - m, 2);
        if case % 2 == 0 {
            // Shifted alternative half the time so observed statistics cover
            // both tails.
            let shifted: Vec<Vec<f64>> = (0..t - m)
                .map(|_| vec![rng.random_range(1.0..6.0), rng.random_range(-4.0..4.0)])
                .collect();
            let first: Vec<Vec<f64>> =
                (0..m).map(|i| cloud.point(i).to_vec()).collect();
            cloud = PointCloud::from_samples(&first, &shifted).unwrap();
        }
        let matching = solve_exact(&cloud, &CostFunction::EUCLIDEAN, case as u64).unwrap();
        let graph = matching_to_graph(&matching);
        let obs = cross_count(&graph, &cloud).unwrap();
        let p_exact = pvalue_exact(&obs).unwrap();
        let p_perm = pvalue_permutation(&graph, &cloud, b, 1000 + case as u64).unwrap();
        let tol = 3.0 * (p_exact * (1.0 - p_exact) / b as f64).sqrt() + 2.0 / (b as f64 + 1.0);
        let diff = (p_perm - p_exact).abs();
        assert!(
            diff <= tol,
            "dataset {case}: permutation {p_perm} vs exact {p_exact} (tol {tol})"
        );
    }
    println!(
        "criterion 9 PASS: permutation p-values within 3 Monte Carlo SE of exact on 20 datasets"
    );
}
