//! End-to-end tests driving the compiled binary.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crossmatch"))
}

fn write_points(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("points.csv");
    std::fs::write(
        &path,
        "x1,x2,label\n\
         0.0,0.0,0\n\
         1.0,0.2,0\n\
         0.4,0.1,1\n\
         5.0,5.0,1\n",
    )
    .unwrap();
    path
}

fn json_stdout(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn match_subcommand_finds_the_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_points(dir.path());
    let out = bin()
        .args(["match", "--input"])
        .arg(&input)
        .args(["--solver", "exact", "--alpha", "1", "--seed", "3"])
        .output()
        .unwrap();
    let v = json_stdout(&out);
    // Optimal pairing: (X1, Y1) and (X2, Y2), 1-based over the combined order.
    assert_eq!(v["pairs"], serde_json::json!([[1, 3], [2, 4]]));
    assert_eq!(v["fixed_point"], serde_json::Value::Null);
    let cost = v["total_cost"].as_f64().unwrap();
    assert!((cost - 6.6605103032870885).abs() < 1e-9);
}

#[test]
fn match_writes_output_file_and_reports_odd_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("odd.csv");
    std::fs::write(&input, "x1,label\n0.0,0\n1.0,0\n5.0,1\n").unwrap();
    let output = dir.path().join("matching.json");
    let out = bin()
        .args(["match", "--input"])
        .arg(&input)
        .args(["--output"])
        .arg(&output)
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&output).unwrap()).unwrap();
    assert_eq!(v["pairs"], serde_json::json!([[1, 2]]));
    assert_eq!(v["fixed_point"], 3);
    assert_eq!(v["total_cost"].as_f64().unwrap(), 1.0);
}

#[test]
fn null_subcommand_matches_closed_form() {
    let out = bin().args(["null", "--m", "2", "--n", "2"]).output().unwrap();
    let v = json_stdout(&out);
    assert_eq!(v["support"], serde_json::json!([0, 2]));
    let pmf = v["pmf"].as_array().unwrap();
    assert!((pmf[0].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert!((pmf[1].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert!((v["mean_chi"].as_f64().unwrap() - 8.0 / 3.0).abs() < 1e-12);
}

#[test]
fn null_subcommand_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("null.csv");
    let out = bin()
        .args(["null", "--m", "3", "--n", "5", "--output"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("quantity,a1,value\n"));
    assert!(text.contains("mean_chi"));
    assert!(text.contains("variance_chi"));
}

#[test]
fn null_subcommand_rejects_odd_t() {
    let out = bin().args(["null", "--m", "2", "--n", "3"]).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("permutation"), "error should point at permutation: {stderr}");
}

#[test]
fn test_subcommand_exact_and_permutation_agree() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_points(dir.path());
    let exact = json_stdout(
        &bin()
            .args(["test", "--input"])
            .arg(&input)
            .args(["--calibration", "exact"])
            .output()
            .unwrap(),
    );
    assert_eq!(exact["chi"], 4);
    assert_eq!(exact["cross_pairs"], 2);
    let p_exact = exact["p_value"].as_f64().unwrap();
    assert!((p_exact - 1.0).abs() < 1e-12);

    let perm = json_stdout(
        &bin()
            .args(["test", "--input"])
            .arg(&input)
            .args([
                "--calibration",
                "permutation",
                "--permutations",
                "4000",
                "--seed",
                "5",
            ])
            .output()
            .unwrap(),
    );
    let p_perm = perm["p_value"].as_f64().unwrap();
    assert!((p_perm - p_exact).abs() < 0.05);
}

#[test]
fn test_subcommand_knn_graph() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_points(dir.path());
    let v = json_stdout(
        &bin()
            .args(["test", "--input"])
            .arg(&input)
            .args([
                "--graph",
                "knn",
                "--k",
                "1",
                "--calibration",
                "permutation",
                "--permutations",
                "500",
            ])
            .output()
            .unwrap(),
    );
    assert_eq!(v["graph"], "knn");
    assert_eq!(v["cross_pairs"], serde_json::Value::Null);
}

#[test]
fn limit_subcommand_equal_models() {
    let v = json_stdout(
        &bin()
            .args([
                "limit",
                "--f",
                "gauss:mu=0,0;sigma=1,1",
                "--g",
                "gauss:mu=0,0;sigma=1,1",
                "--p",
                "0.5",
                "--method",
                "quad",
            ])
            .output()
            .unwrap(),
    );
    assert!((v["value"].as_f64().unwrap() - 0.5).abs() < 1e-6);
}

#[test]
fn diagnose_subcommand_matching_degrees() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_points(dir.path());
    let v = json_stdout(
        &bin()
            .args(["diagnose", "--input"])
            .arg(&input)
            .args(["--graph", "matching", "--a-grid", "0.5,2,8"])
            .output()
            .unwrap(),
    );
    assert_eq!(v["max_out_degree"], 1);
    assert_eq!(v["max_in_degree"], 1);
    assert_eq!(v["mean_out_degree"], 1.0);
    let fracs = v["long_edge_fractions"].as_array().unwrap();
    assert_eq!(fracs.len(), 3);
    let values: Vec<f64> = fracs.iter().map(|f| f["fraction"].as_f64().unwrap()).collect();
    assert!(values.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn simulate_subcommand_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("experiment.toml");
    std::fs::write(
        &config,
        r#"
p = 0.5
t_grid = [8, 16]
replicates = 3
seed = 11
alpha = 1.0

[f]
kind = "gaussian"
mean = [0.0, 0.0]
sigma = [1.0, 1.0]

[g]
kind = "gaussian"
mean = [1.0, 0.0]
sigma = [1.0, 1.0]

[graph]
kind = "matching"
"#,
    )
    .unwrap();
    let outdir = dir.path().join("out");
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .args(["--output-dir"])
        .arg(&outdir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(outdir.join("report.csv")).unwrap();
    assert!(report.starts_with("t,replicate,metric,value\n"));
    assert!(report.contains("chi_over_t"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(outdir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["summaries"].as_array().unwrap().len(), 2);

    // Same config through the power experiment.
    let outdir2 = dir.path().join("out-power");
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .args(["--experiment", "power", "--output-dir"])
        .arg(&outdir2)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(outdir2.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["points"].as_array().unwrap().len(), 2);
}

#[test]
fn simulate_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    // Odd t in the grid.
    std::fs::write(
        &config,
        r#"
p = 0.5
t_grid = [7]
replicates = 1
seed = 1

[f]
kind = "gaussian"
mean = [0.0]
sigma = [1.0]

[g]
kind = "gaussian"
mean = [0.0]
sigma = [1.0]
"#,
    )
    .unwrap();
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .args(["--output-dir"])
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn alpha_warning_on_stderr_for_d1() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("d1.csv");
    std::fs::write(&input, "x1,label\n0.0,0\n1.0,0\n0.5,1\n2.0,1\n").unwrap();
    let out = bin()
        .args(["match", "--input"])
        .arg(&input)
        .args(["--alpha", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("warning"), "expected the alpha-range warning, got: {stderr}");
}
