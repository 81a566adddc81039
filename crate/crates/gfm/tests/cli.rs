use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn gfm(args: &[&str], paths: &[&Path]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gfm"));
    cmd.env_remove("GFM_WORKERS").args(args);
    for p in paths {
        cmd.arg(p);
    }
    cmd.output().unwrap()
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

/// Long-format CSV with two shapes of series, 48 points each.
fn write_csv(dir: &Path, with_groups: bool) -> PathBuf {
    let path = dir.join("data.csv");
    let mut text = String::from(if with_groups { "series_id,value,region\n" } else { "series_id,value\n" });
    for s in 0..8 {
        for t in 0..48 {
            let v = if s < 4 {
                10.0 + s as f64 + 0.1 * t as f64 + ((t * 7 + s) % 5) as f64 * 0.2
            } else {
                30.0 + 4.0 * ((t % 4) as f64) + ((t * 3 + s) % 7) as f64 * 0.3
            };
            if with_groups {
                text.push_str(&format!("s{s},{v},{}\n", if s < 4 { "north" } else { "south" }));
            } else {
                text.push_str(&format!("s{s},{v}\n"));
            }
        }
    }
    std::fs::write(&path, text).unwrap();
    path
}

fn write_config(dir: &Path, cfg: &Value) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn csv_config(extra: Value) -> Value {
    let mut cfg = json!({
        "name": "cli",
        "dataset": {"source": "csv", "path": "data.csv", "horizon": 4, "seasonal_period": 4},
        "window": 5,
        "variants": ["Baseline", "Kmeans.Number", "Local.seasonal_naive"],
        "seed": 3
    });
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    cfg
}

fn read(path: PathBuf) -> String {
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn run_writes_every_artifact_and_manifest_reruns() {
    let dir = tempfile::tempdir().unwrap();
    write_csv(dir.path(), false);
    let config = write_config(dir.path(), &csv_config(json!({})));
    let out = dir.path().join("out");
    ok(gfm(&["run", "--workers", "2", "--config"], &[&config, Path::new("--out"), &out]));
    for f in ["forecasts.csv", "final_forecasts.csv", "metrics.csv", "aggregates.json", "manifest.json", "ranks.csv", "pairwise_p.csv", "stats.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let finals = read(out.join("final_forecasts.csv"));
    assert!(finals.starts_with("series_id,model_tag,h1,h2,h3,h4\n"));
    assert_eq!(finals.lines().count(), 1 + 3 * 8);
    let per_iteration = read(out.join("forecasts.csv"));
    let number_rows = per_iteration.lines().filter(|l| l.contains(",Kmeans.Number,")).count();
    assert_eq!(number_rows, 8 * 6);

    let manifest: Value = serde_json::from_str(&read(out.join("manifest.json"))).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert!(manifest["run"]["deviations"].as_array().unwrap().len() > 1);
    assert!(manifest["run"]["wall_times"]["load"].as_f64().is_some());

    let again = dir.path().join("again");
    ok(gfm(&["run", "--config"], &[&out.join("manifest.json"), Path::new("--out"), &again]));
    assert_eq!(finals, read(again.join("final_forecasts.csv")));
}

#[test]
fn evaluate_matches_run_metrics() {
    let dir = tempfile::tempdir().unwrap();
    write_csv(dir.path(), false);
    let config = write_config(dir.path(), &csv_config(json!({})));
    let out = dir.path().join("out");
    ok(gfm(&["run", "--config"], &[&config, Path::new("--out"), &out]));
    let eval = dir.path().join("eval");
    ok(gfm(&["evaluate", "--config"], &[&config, Path::new("--forecasts"), &out.join("final_forecasts.csv"), Path::new("--out"), &eval]));
    assert_eq!(read(out.join("metrics.csv")), read(eval.join("metrics.csv")));
    assert_eq!(read(out.join("aggregates.json")), read(eval.join("aggregates.json")));
}

#[test]
fn seed_flag_changes_stochastic_variants_only() {
    let dir = tempfile::tempdir().unwrap();
    write_csv(dir.path(), false);
    let config = write_config(dir.path(), &csv_config(json!({"variants": ["Baseline", "Random.Number"]})));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(gfm(&["run", "--seed", "1", "--config"], &[&config, Path::new("--out"), &a]));
    ok(gfm(&["run", "--seed", "2", "--config"], &[&config, Path::new("--out"), &b]));
    let rows = |p: &Path, tag: &str| -> Vec<String> {
        read(p.join("final_forecasts.csv")).lines().filter(|l| l.contains(tag)).map(String::from).collect()
    };
    assert_eq!(rows(&a, ",Baseline,"), rows(&b, ",Baseline,"));
    assert_ne!(rows(&a, ",Random.Number,"), rows(&b, ",Random.Number,"));
}

#[test]
fn group_by_trains_each_group_separately() {
    let dir = tempfile::tempdir().unwrap();
    write_csv(dir.path(), true);
    let mut cfg = csv_config(json!({"variants": ["Baseline"]}));
    cfg["dataset"]["group_by"] = json!(true);
    let config = write_config(dir.path(), &cfg);
    let out = dir.path().join("out");
    ok(gfm(&["run", "--config"], &[&config, Path::new("--out"), &out]));
    let manifest: Value = serde_json::from_str(&read(out.join("manifest.json"))).unwrap();
    let groups = manifest["run"]["groups"].as_array().unwrap();
    assert_eq!(groups.len(), 2);
    assert_eq!(groups[0]["group"], "north");
    assert_eq!(groups[1]["series"].as_array().unwrap().len(), 4);
    assert!(!out.join("stats.json").exists());
}

#[test]
fn features_and_cluster_commands() {
    let dir = tempfile::tempdir().unwrap();
    write_csv(dir.path(), false);
    let config = write_config(dir.path(), &csv_config(json!({})));
    let out = dir.path().join("f");
    ok(gfm(&["features", "--standardized", "--config"], &[&config, Path::new("--out"), &out]));
    let features = read(out.join("features.csv"));
    assert!(features.starts_with("series_id,mean,variance,acf1,"));
    assert_eq!(features.lines().count(), 9);

    let labels = dir.path().join("c");
    ok(gfm(&["cluster", "--method", "kmeans", "--k", "2", "--config"], &[&config, Path::new("--out"), &labels]));
    let text = read(labels.join("labels.csv"));
    let clusters: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(clusters.len(), 8);
    assert!(clusters[..4].iter().all(|c| *c == clusters[0]));
    assert!(clusters[4..].iter().all(|c| *c == clusters[4]));
    assert_ne!(clusters[0], clusters[4]);

    let elbow = dir.path().join("e");
    ok(gfm(&["cluster", "--method", "kmeanspp", "--config"], &[&config, Path::new("--out"), &elbow]));
    assert!(read(elbow.join("labels.csv")).lines().nth(1).unwrap().contains(",kmeanspp,"));

    let dtw = dir.path().join("d");
    ok(gfm(&["cluster", "--method", "kmedoids_dtw", "--k", "2", "--config"], &[&config, Path::new("--out"), &dtw]));
    let failed = gfm(&["cluster", "--method", "kmedoids_dtw", "--config"], &[&config, Path::new("--out"), &dtw]);
    assert!(!failed.status.success());
}

#[test]
fn stats_command_on_long_table() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("scores.csv");
    let mut text = String::from("dataset,model,mean_smape\n");
    for d in 0..4 {
        for (m, v) in [("A", 1.0), ("B", 2.0), ("C", 3.0)] {
            text.push_str(&format!("d{d},{m},{}\n", v + d as f64));
        }
    }
    std::fs::write(&input, text).unwrap();
    let out = dir.path().join("s");
    ok(gfm(&["stats", "--input"], &[&input, Path::new("--out"), &out]));
    let stats: Value = serde_json::from_str(&read(out.join("stats.json"))).unwrap();
    assert_eq!(stats["friedman_statistic"], 8.0);
    assert_eq!(read(out.join("ranks.csv")), "model_tag,average_rank\nA,1\nB,2\nC,3\n");
    assert_eq!(read(out.join("pairwise_p.csv")).lines().count(), 4);
}

#[test]
fn synth_output_loads_as_a_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        json!({
            "families": [{"kind": "ar", "intercept": 1.0, "coefficients": [0.5]},
                         {"kind": "seasonal", "level": 5.0, "amplitude": 1.0, "period": 4}],
            "count_per_family": 3, "length": 30, "noise_sd": 0.1, "seed": 1, "horizon": 3
        })
        .to_string(),
    )
    .unwrap();
    let out = dir.path().join("syn");
    ok(gfm(&["synth", "--config"], &[&spec, Path::new("--out"), &out]));
    assert_eq!(read(out.join("labels.csv")).lines().count(), 7);
    let loaded = gfm::io::load_dataset(&out.join("data.csv"), 3, 1, Default::default()).unwrap();
    assert_eq!(loaded.dataset.len(), 6);
    assert_eq!(loaded.groups[5].as_deref(), Some("family1"));
}

#[test]
fn bad_inputs_fail_with_context() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("data.csv"), "series_id,value\na,1\na,oops\n").unwrap();
    let config = write_config(dir.path(), &csv_config(json!({})));
    let out = gfm(&["run", "--config"], &[&config, Path::new("--out"), &dir.path().join("o")]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("load") && err.contains("row 3"), "{err}");

    let bad = write_config(dir.path(), &csv_config(json!({"variants": ["DTW.OC"]})));
    assert!(!gfm(&["run", "--config"], &[&bad, Path::new("--out"), &dir.path().join("o")]).status.success());
}
