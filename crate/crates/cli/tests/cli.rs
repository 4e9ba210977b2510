use std::path::Path;
use std::process::{Command, Output};

use seedrank::config::figure_one_params;

fn seedrank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seedrank")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = seedrank(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string(value).unwrap()).unwrap();
    path.display().to_string()
}

fn two_block_params(dir: &Path, n: usize, p_in: f64, p_out: f64) -> String {
    write_json(
        dir,
        "model.json",
        &serde_json::json!({"n": n, "pi": [0.5, 0.5], "P": [[p_in, p_out], [p_out, p_in]]}),
    )
}

/// Generates a graph into `dir` and returns `(edges, labels)` paths.
fn graph_files(dir: &Path, n: usize, p_in: f64, p_out: f64, seed: &str) -> (String, String) {
    let params = two_block_params(dir, n, p_in, p_out);
    ok(&["generate", "--params", &params, "--seed", seed, "--out", dir.to_str().unwrap()]);
    (dir.join("edges.tsv").display().to_string(), dir.join("labels.tsv").display().to_string())
}

#[test]
fn generate_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let params = two_block_params(tmp.path(), 200, 0.1, 0.02);
    let run = |sub: &str, seed: &str| {
        let out = tmp.path().join(sub);
        ok(&["generate", "--params", &params, "--seed", seed, "--out", out.to_str().unwrap()]);
        (read(&out, "edges.tsv"), read(&out, "labels.tsv"), read(&out, "params.json"))
    };
    let a = run("a", "7");
    let b = run("b", "7");
    let c = run("c", "8");
    assert_eq!(a, b);
    assert_ne!(a.0, c.0);
    assert_eq!(a.1, c.1);
    assert!(a.1.starts_with("0\t1\n"));
}

#[test]
fn four_block_label_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let params = write_json(tmp.path(), "fig1.json", &serde_json::to_value(figure_one_params()).unwrap());
    ok(&["generate", "--params", &params, "--out", tmp.path().to_str().unwrap()]);
    let mut counts = [0usize; 4];
    for line in read(tmp.path(), "labels.tsv").lines() {
        let block: usize = line.split('\t').nth(1).unwrap().parse().unwrap();
        counts[block - 1] += 1;
    }
    assert_eq!(counts, [491, 532, 471, 554]);
}

#[test]
fn malformed_params_exit_with_usage_code() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_json(tmp.path(), "bad.json", &serde_json::json!({"n": 10, "P": [[0.1]]}));
    let out = seedrank(&["generate", "--params", &bad, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pi"));

    let unsym = write_json(tmp.path(), "u.json", &serde_json::json!({"n": 10, "pi": [0.5, 0.5], "P": [[0.1, 0.2], [0.3, 0.1]]}));
    let out = seedrank(&["generate", "--params", &unsym, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_exits_with_io_code() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    let out = seedrank(&["generate", "--params", missing.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn bad_flags_exit_with_usage_code() {
    assert_eq!(seedrank(&["rank", "--method", "magic"]).status.code(), Some(2));
    assert_eq!(seedrank(&["experiment"]).status.code(), Some(2));
}

#[test]
fn walk_profile_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let (edges, labels) = graph_files(tmp.path(), 40, 0.3, 0.1, "2");
    ok(&["walk", "--edges", &edges, "--labels", &labels, "--seeds", "0,3", "--steps", "4", "--out", tmp.path().to_str().unwrap()]);
    let csv = read(tmp.path(), "profile.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("node,k1,k2,k3,k4"));
    let rows: Vec<Vec<f64>> =
        lines.map(|l| l.split(',').skip(1).map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 40);
    for k in 0..4 {
        let total: f64 = rows.iter().map(|r| r[k]).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn ppr_at_alpha_star_ranks_like_the_geometric_model() {
    let tmp = tempfile::tempdir().unwrap();
    let (edges, labels) = graph_files(tmp.path(), 128, 0.3125, 0.1875, "5");
    let ppr_dir = tmp.path().join("ppr");
    let geo_dir = tmp.path().join("geo");
    let common = ["--edges", &edges, "--labels", &labels, "--seed-node", "3", "--steps", "6"];
    let mut ppr: Vec<&str> = vec!["rank", "--method", "ppr", "--alpha", "0.25", "--out", ppr_dir.to_str().unwrap()];
    ppr.extend(common);
    ok(&ppr);
    let mut geo: Vec<&str> =
        vec!["rank", "--method", "geometric", "--n", "128", "--p-in", "0.3125", "--p-out", "0.1875", "--out", geo_dir.to_str().unwrap()];
    geo.extend(common);
    ok(&geo);
    let ranks = |dir: &Path| -> Vec<String> {
        read(dir, "scores.csv").lines().skip(1).map(|l| l.rsplit(',').next().unwrap().to_string()).collect()
    };
    assert_eq!(ranks(&ppr_dir), ranks(&geo_dir));
    let model: serde_json::Value = serde_json::from_str(&read(&geo_dir, "model.json")).unwrap();
    assert_eq!(model["kind"], "geometric");
    assert_eq!(model["K"], 6);
}

#[test]
fn estimate_reads_block_sizes_from_labels() {
    let tmp = tempfile::tempdir().unwrap();
    let (edges, labels) = graph_files(tmp.path(), 400, 0.3, 0.1, "9");
    ok(&["estimate", "--edges", &edges, "--labels", &labels, "--out", tmp.path().to_str().unwrap()]);
    let est: serde_json::Value = serde_json::from_str(&read(tmp.path(), "estimate.json")).unwrap();
    assert!((est["p_in_hat"].as_f64().unwrap() - 0.3).abs() < 0.05);
    assert!((est["p_out_hat"].as_f64().unwrap() - 0.1).abs() < 0.05);
    assert_eq!(est["method"], "balanced");
}

#[test]
fn bp_writes_beliefs_and_metadata() {
    let tmp = tempfile::tempdir().unwrap();
    let (edges, labels) = graph_files(tmp.path(), 60, 0.5, 0.05, "4");
    ok(&[
        "bp", "--edges", &edges, "--labels", &labels, "--n", "60", "--p-in", "0.5", "--p-out", "0.05", "--seeds", "0,1",
        "--out", tmp.path().to_str().unwrap(),
    ]);
    let csv = read(tmp.path(), "beliefs.csv");
    assert_eq!(csv.lines().next(), Some("node,class,belief"));
    assert_eq!(csv.lines().count(), 1 + 60 * 2);
    assert!(csv.contains("\n0,1,1.0000000000000000e0\n"));
    let meta: serde_json::Value = serde_json::from_str(&read(tmp.path(), "bp.json")).unwrap();
    assert_eq!(meta["converged"], true);
}

#[test]
fn centroids_report_alpha_star() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["centroids", "--n", "128", "--p-in", "0.3125", "--p-out", "0.1875", "--steps", "5", "--out", tmp.path().to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&read(tmp.path(), "theory.json")).unwrap();
    assert!((v["solution"]["alpha_star"].as_f64().unwrap() - 0.25).abs() < 1e-15);
    assert_eq!(v["solution"]["psi"].as_array().unwrap().len(), 5);
    assert_eq!(v["homogeneity"]["holds"], true);
}

#[test]
fn correlation_suite_rows_and_thread_independence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_json(
        tmp.path(),
        "cfg.json",
        &serde_json::json!({
            "experiment": "correlation-fig2", "trials": 3, "ratios": [0.1, 0.5],
            "methods": ["bp", "ppr-alpha-star", "lin-sbmrank"], "moment_realizations": 10
        }),
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&["experiment", "--config", &cfg, "--out", a.to_str().unwrap()]);
    ok(&["experiment", "--config", &cfg, "--jobs", "1", "--out", b.to_str().unwrap()]);
    let csv = read(&a, "correlation.csv");
    assert_eq!(csv, read(&b, "correlation.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("trial,method,ratio,r"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3 * 3 * 2);
    assert!(rows.iter().any(|r| r.starts_with("0,bp,1.0000000000000001e-1,")));
    let manifest: serde_json::Value = serde_json::from_str(&read(&a, "manifest.json")).unwrap();
    assert_eq!(manifest["experiment"], "correlation-fig2");
    assert_eq!(manifest["failures"].as_array().unwrap().len(), 0);
    assert_eq!(manifest["outputs"][0], "correlation.csv");
}

#[test]
fn seed_flag_changes_experiment_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_json(
        tmp.path(),
        "cfg.json",
        &serde_json::json!({"experiment": "recall-fig2", "trials": 4, "methods": ["ppr-alpha-star", "heat-kernel"]}),
    );
    let run = |seed: &str, sub: &str| {
        let out = tmp.path().join(sub);
        ok(&["experiment", "--config", &cfg, "--seed", seed, "--out", out.to_str().unwrap()]);
        read(&out, "recall.csv")
    };
    let (a, b) = (run("1", "a"), run("2", "b"));
    assert_ne!(a, b);
    assert_eq!(a.lines().count(), 1 + 2 * 128);
    assert_eq!(a.lines().next(), Some("method,m,recall_mean,recall_std"));
}

#[test]
fn unknown_config_keys_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_json(tmp.path(), "cfg.json", &serde_json::json!({"experiment": "recall-fig2", "trails": 4}));
    let out = seedrank(&["experiment", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trails"));
}

#[test]
fn small_centroid_and_heatmap_suites() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    ok(&["experiment", "--name", "centroids-fig1", "--trials", "4", "--out", out]);
    let bands = read(tmp.path(), "bands.csv");
    assert_eq!(bands.lines().next(), Some("class,k,lo,hi,empirical_mean,theory"));
    assert_eq!(bands.lines().count(), 1 + 3 * 6);
    let cfg = write_json(
        tmp.path(),
        "h.json",
        &serde_json::json!({"experiment": "heatmap-figS1", "trials": 2, "grid": [0.2, 0.4], "moment_realizations": 10}),
    );
    ok(&["experiment", "--config", &cfg, "--out", out]);
    let heat = read(tmp.path(), "heatmap.csv");
    assert_eq!(heat.lines().next(), Some("p_in,p_out,method,trials,r_mean"));
    assert_eq!(heat.lines().count(), 1 + 4 * 4);
}
